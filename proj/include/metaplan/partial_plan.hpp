#pragma once
// Soft-Bellman partial planning under per-state inverse temperatures, and the
// KL cost of the resulting plans.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "metaplan/mdp.hpp"

namespace metaplan {

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// d softplus / dx, i.e. the logistic function.
inline double softplus_derivative(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Raw parameter whose softplus is y (y > 0).
inline double inverse_softplus(double y) {
    if (!(y > 0.0)) throw ModelError("inverse_softplus needs a positive argument");
    if (y > 30.0) return y + std::log(-std::expm1(-y));
    return std::log(std::expm1(y));
}

/**
 * Inverse temperatures beta(s~; s) for every ground state s and simulated
 * state s~, stored as unconstrained raw parameters with beta = softplus(raw).
 * The simulated state space equals the ground state space.
 */
class TemperatureField {
public:
    TemperatureField() = default;
    TemperatureField(std::size_t n_states, std::vector<double> raw) : n_(n_states), raw_(std::move(raw)) {
        if (raw_.size() != n_ * n_) throw ModelError("temperature field needs n_states^2 raw parameters");
    }

    static TemperatureField from_raw(std::size_t n_states, double raw) {
        return {n_states, std::vector<double>(n_states * n_states, raw)};
    }
    /// Constant beta everywhere. beta = 0 maps to raw = -inf.
    static TemperatureField constant(std::size_t n_states, double beta) {
        const double raw = beta > 0.0 ? inverse_softplus(beta) : -std::numeric_limits<double>::infinity();
        return from_raw(n_states, raw);
    }

    std::size_t n_states() const noexcept { return n_; }
    std::span<double> raw() noexcept { return raw_; }
    std::span<const double> raw() const noexcept { return raw_; }
    std::span<const double> raw_for(StateId ground) const { return {raw_.data() + ground * n_, n_}; }

    double beta(StateId ground, StateId simulated) const { return softplus(raw_[ground * n_ + simulated]); }
    std::vector<double> betas_for(StateId ground) const {
        std::vector<double> out(n_);
        for (StateId s = 0; s < n_; ++s) out[s] = beta(ground, s);
        return out;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> raw_;
};

/// Partial plan from one ground state, over all simulated states.
struct PartialPlanSlice {
    StateId ground = 0;
    StateActionTable policy;         // pi~(a | s~; s)
    StateActionTable q;              // Q~(s~, a; s)
    std::vector<double> values;      // V~(s~; s)
    std::vector<double> kl_per_state;  // D_KL[pi~(.|s~; s) || default(.|s~)], nats
    double total_cost = 0.0;         // sum of kl_per_state

    std::span<const double> action_distribution(StateId simulated) const { return policy.row(simulated); }
};

/// One slice per ground state.
struct PartialPlan {
    std::vector<PartialPlanSlice> slices;

    const PartialPlanSlice& operator[](StateId ground) const { return slices[ground]; }
    std::size_t size() const noexcept { return slices.size(); }

    /// pi~(. | s; s) for every ground state s.
    Policy acted_policy() const {
        const auto n = slices.size();
        StateActionTable t(n, n ? slices[0].policy.n_actions : 0);
        for (StateId s = 0; s < n; ++s) std::copy_n(slices[s].policy.row(s).begin(), t.n_actions, t.row(s).begin());
        return Policy(std::move(t));
    }
};

/// D_KL[p || q] in nats. Zero-probability terms of p contribute nothing.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) throw ModelError("KL divergence undefined: reference has zero mass where p is positive");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(kl, 0.0);
}

struct PlanCost {
    std::vector<double> kl_per_state;
    double total = 0.0;
};

/// Per-simulated-state KL of a plan slice from the default policy, and their sum.
inline PlanCost plan_cost(const PartialPlanSlice& slice, const Policy& default_policy) {
    PlanCost out;
    out.kl_per_state.resize(slice.policy.n_states);
    for (StateId s = 0; s < slice.policy.n_states; ++s) {
        out.kl_per_state[s] = kl_divergence(slice.policy.row(s), default_policy.row(s));
        out.total += out.kl_per_state[s];
    }
    return out;
}

namespace detail {

// pi = softmax(beta * q_row), max-subtracted. Returns sum_a pi(a) q(a).
inline double soft_row(std::span<const double> q_row, double beta, std::span<double> pi) {
    double top = -std::numeric_limits<double>::infinity();
    for (double q : q_row) top = std::max(top, beta * q);
    double z = 0.0;
    for (std::size_t a = 0; a < q_row.size(); ++a) {
        pi[a] = std::exp(beta * q_row[a] - top);
        z += pi[a];
    }
    double v = 0.0;
    for (std::size_t a = 0; a < q_row.size(); ++a) {
        pi[a] /= z;
        v += pi[a] * q_row[a];
    }
    return v;
}

}  // namespace detail

/**
 * Forward record of H soft-Bellman sweeps for a single ground state.
 *
 * q[t] and pi[t] hold Q~_t and pi~_t for t = 0..H; Q~_0 = 0 and
 * Q~_{t+1} = R + gamma * T V~_t. Terminal simulated states keep Q~ = 0,
 * V~ = 0 and follow the default policy, so they contribute no cost.
 */
class SoftBellmanTape {
public:
    SoftBellmanTape(const TabularMdp& mdp, std::span<const double> beta, std::size_t horizon,
                    const Policy& default_policy)
        : mdp_(&mdp), beta_(beta.begin(), beta.end()), horizon_(horizon) {
        const auto n = mdp.n_states();
        const auto na = mdp.n_actions();
        if (horizon == 0) throw ModelError("planning horizon must be at least 1");
        if (beta.size() != n) throw ModelError("beta size does not match state count");
        for (double b : beta_)
            if (!std::isfinite(b) || b < 0.0) throw ModelError("inverse temperatures must be finite and nonnegative");

        q_.assign((horizon + 1) * n * na, 0.0);
        pi_.assign((horizon + 1) * n * na, 0.0);
        v_.assign((horizon + 1) * n, 0.0);
        const double gamma = mdp.discount();
        for (std::size_t t = 0; t <= horizon; ++t) {
            double* q_t = q_.data() + t * n * na;
            double* pi_t = pi_.data() + t * n * na;
            double* v_t = v_.data() + t * n;
            for (StateId s = 0; s < n; ++s) {
                if (mdp.is_terminal(s)) {
                    const auto d = default_policy.row(s);
                    std::copy(d.begin(), d.end(), pi_t + s * na);
                    continue;
                }
                v_t[s] = detail::soft_row({q_t + s * na, na}, beta_[s], {pi_t + s * na, na});
            }
            if (t == horizon) break;
            double* q_next = q_.data() + (t + 1) * n * na;
            for (StateId s = 0; s < n; ++s) {
                if (mdp.is_terminal(s)) continue;
                for (ActionId a = 0; a < na; ++a) {
                    double future = 0.0;
                    for (const auto& tr : mdp.successors(s, a)) future += tr.probability * v_t[tr.next];
                    q_next[s * na + a] = mdp.expected_reward(s, a) + gamma * future;
                }
            }
        }
    }

    std::size_t horizon() const noexcept { return horizon_; }
    std::span<const double> q(std::size_t t) const {
        const auto block = mdp_->n_states() * mdp_->n_actions();
        return {q_.data() + t * block, block};
    }
    std::span<const double> pi(std::size_t t) const {
        const auto block = mdp_->n_states() * mdp_->n_actions();
        return {pi_.data() + t * block, block};
    }
    std::span<const double> v(std::size_t t) const { return {v_.data() + t * mdp_->n_states(), mdp_->n_states()}; }

    /**
     * Vector-Jacobian product: given dL/dpi~_H (row-major (s~, a)), returns
     * dL/dbeta(s~) by reverse accumulation through the softmax at t = H and
     * the H unrolled sweeps.
     */
    std::vector<double> backpropagate(std::span<const double> policy_adjoint) const {
        const auto& mdp = *mdp_;
        const auto n = mdp.n_states();
        const auto na = mdp.n_actions();
        const double gamma = mdp.discount();
        std::vector<double> beta_adj(n, 0.0);
        std::vector<double> q_adj(n * na, 0.0);
        std::vector<double> v_adj(n, 0.0);

        // Softmax at t = H.
        {
            const auto q_h = q(horizon_);
            const auto pi_h = pi(horizon_);
            for (StateId s = 0; s < n; ++s) {
                if (mdp.is_terminal(s)) continue;
                double mean = 0.0;
                for (ActionId a = 0; a < na; ++a) mean += pi_h[s * na + a] * policy_adjoint[s * na + a];
                double b_adj = 0.0;
                for (ActionId a = 0; a < na; ++a) {
                    const double z_adj = pi_h[s * na + a] * (policy_adjoint[s * na + a] - mean);
                    b_adj += z_adj * q_h[s * na + a];
                    q_adj[s * na + a] = z_adj * beta_[s];
                }
                beta_adj[s] += b_adj;
            }
        }
        // Q~_0 is constant, so pi~_0 carries no dependence on beta.
        for (std::size_t t = horizon_; t-- > 1;) {
            std::fill(v_adj.begin(), v_adj.end(), 0.0);
            for (StateId s = 0; s < n; ++s) {
                if (mdp.is_terminal(s)) continue;
                for (ActionId a = 0; a < na; ++a) {
                    const double g = gamma * q_adj[s * na + a];
                    if (g == 0.0) continue;
                    for (const auto& tr : mdp.successors(s, a)) v_adj[tr.next] += g * tr.probability;
                }
            }
            const auto q_t = q(t);
            const auto pi_t = pi(t);
            const auto v_t = v(t);
            for (StateId s = 0; s < n; ++s) {
                if (mdp.is_terminal(s)) {
                    for (ActionId a = 0; a < na; ++a) q_adj[s * na + a] = 0.0;
                    continue;
                }
                const double va = v_adj[s];
                double b_adj = 0.0;
                for (ActionId a = 0; a < na; ++a) {
                    const double p = pi_t[s * na + a];
                    const double qa = q_t[s * na + a];
                    // V = sum pi Q: direct path through Q plus the softmax path through beta * Q.
                    const double z_adj = va * p * (qa - v_t[s]);
                    b_adj += z_adj * qa;
                    q_adj[s * na + a] = va * p + z_adj * beta_[s];
                }
                beta_adj[s] += b_adj;
            }
        }
        return beta_adj;
    }

    PartialPlanSlice slice(StateId ground, const Policy& default_policy) const {
        const auto n = mdp_->n_states();
        const auto na = mdp_->n_actions();
        PartialPlanSlice out;
        out.ground = ground;
        out.policy = StateActionTable(n, na);
        out.q = StateActionTable(n, na);
        const auto p = pi(horizon_);
        const auto qh = q(horizon_);
        std::copy(p.begin(), p.end(), out.policy.data.begin());
        std::copy(qh.begin(), qh.end(), out.q.data.begin());
        const auto vh = v(horizon_);
        out.values.assign(vh.begin(), vh.end());
        auto cost = plan_cost(out, default_policy);
        out.kl_per_state = std::move(cost.kl_per_state);
        out.total_cost = cost.total;
        return out;
    }

private:
    const TabularMdp* mdp_;
    std::vector<double> beta_;
    std::size_t horizon_;
    std::vector<double> q_;
    std::vector<double> pi_;
    std::vector<double> v_;
};

/// Partial plan for one ground state given its inverse temperatures.
inline PartialPlanSlice soft_bellman_rollout(const TabularMdp& mdp, std::span<const double> beta, StateId ground,
                                             std::size_t horizon, const Policy& default_policy) {
    return SoftBellmanTape(mdp, beta, horizon, default_policy).slice(ground, default_policy);
}

inline PartialPlanSlice soft_bellman_rollout(const TabularMdp& mdp, const TemperatureField& field, StateId ground,
                                             std::size_t horizon, const Policy& default_policy) {
    const auto beta = field.betas_for(ground);
    return soft_bellman_rollout(mdp, beta, ground, horizon, default_policy);
}

inline PartialPlanSlice soft_bellman_rollout(const TabularMdp& mdp, const TemperatureField& field, StateId ground,
                                             std::size_t horizon) {
    return soft_bellman_rollout(mdp, field, ground, horizon, Policy::uniform(mdp.n_states(), mdp.n_actions()));
}

/// Slices for every ground state.
inline PartialPlan plan_all(const TabularMdp& mdp, const TemperatureField& field, std::size_t horizon,
                            const Policy& default_policy) {
    PartialPlan plan;
    plan.slices.reserve(mdp.n_states());
    for (StateId s = 0; s < mdp.n_states(); ++s)
        plan.slices.push_back(soft_bellman_rollout(mdp, field, s, horizon, default_policy));
    return plan;
}

inline double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return std::max(h, 0.0);
}

}  // namespace metaplan
