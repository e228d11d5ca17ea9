#pragma once
// Planning to plan: optimizes per-ground-state temperature allocations by
// gradient descent on the cost-penalized value of the plans they induce.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "metaplan/mdp.hpp"
#include "metaplan/partial_plan.hpp"

namespace metaplan {

struct AdamConfig {
    double step_size = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

enum class LossWeighting {
    AllStates,   // L = -sum_s V(s)
    StartState,  // L = -V(start)
};

/// How the gradient passes through the cost-penalized policy evaluation.
enum class EvaluationGradient {
    Adjoint,   // implicit differentiation of the linear fixed point
    Unrolled,  // reverse mode through iterated evaluation sweeps
};

struct MetaPlanConfig {
    double lambda = 0.01;
    std::size_t outer_iterations = 200;
    std::size_t horizon = 100;
    AdamConfig adam;
    std::uint64_t seed = 0;
    double eval_tolerance = 1e-10;
    LossWeighting weighting = LossWeighting::AllStates;
    std::optional<StateId> start_state;  // required for StartState weighting
    EvaluationGradient gradient_mode = EvaluationGradient::Adjoint;
    double init_low = -2.0;  // raw parameters start uniform on [init_low, init_high]
    double init_high = 0.0;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ModelError("lambda must be finite and >= 0");
        if (outer_iterations < 1) throw ModelError("outer_iterations must be >= 1");
        if (horizon < 1) throw ModelError("horizon must be >= 1");
        if (!(adam.step_size > 0.0)) throw ModelError("Adam step size must be positive");
        if (!(eval_tolerance > 0.0)) throw ModelError("eval_tolerance must be positive");
        if (weighting == LossWeighting::StartState && !start_state)
            throw ModelError("start-state weighting needs a start state");
        if (init_low > init_high) throw ModelError("empty initialization interval");
    }
};

struct MetaPlanResult {
    TemperatureField beta_star;
    PartialPlan plans;
    std::vector<double> costs;   // c(s); zero at terminal states
    std::vector<double> values;  // V_lambda(s)
    std::vector<double> loss_history;
    double wall_time_seconds = 0.0;
    MetaPlanConfig config;

    Policy acted_policy() const { return plans.acted_policy(); }
};

/**
 * Solves V(s) = sum_a pi(a|s) sum_s' T [R + gamma V(s')] - lambda c(s) for
 * the acted policies pi. Terminal states have V = 0 and no cost.
 */
inline std::vector<double> evaluate_meta_value(const TabularMdp& mdp, const Policy& acted,
                                               std::span<const double> costs, double lambda,
                                               double tolerance = 1e-10) {
    if (acted.n_states() != mdp.n_states() || acted.n_actions() != mdp.n_actions())
        throw ModelError("acted policy shape does not match MDP");
    if (costs.size() != mdp.n_states()) throw ModelError("cost vector size does not match MDP");
    if (!std::isfinite(lambda)) throw ModelError("lambda must be finite");
    std::vector<double> rhs(mdp.n_states(), 0.0);
    for (StateId s = 0; s < mdp.n_states(); ++s) {
        if (!std::isfinite(costs[s])) throw ModelError("non-finite planning cost at state " + std::to_string(s));
        if (mdp.is_terminal(s)) continue;
        for (ActionId a = 0; a < mdp.n_actions(); ++a) rhs[s] += acted(s, a) * mdp.expected_reward(s, a);
        rhs[s] -= lambda * costs[s];
    }
    return detail::solve_policy_system(mdp, acted, rhs, false, tolerance);
}

/// Adam on a flat parameter vector.
class Adam {
public:
    Adam(const AdamConfig& config, std::size_t n) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
            v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
            params[i] -= config_.step_size * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
        }
    }

    std::size_t steps() const noexcept { return t_; }

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

/// Forward state of one loss evaluation.
struct MetaEvaluation {
    double loss = 0.0;
    std::vector<double> gradient;  // d loss / d raw parameter; empty when not requested
    PartialPlan plans;
    std::vector<double> costs;
    std::vector<double> values;
};

namespace detail {

inline std::vector<double> loss_weights(const TabularMdp& mdp, const MetaPlanConfig& config) {
    if (config.weighting == LossWeighting::AllStates) return std::vector<double>(mdp.n_states(), 1.0);
    std::vector<double> w(mdp.n_states(), 0.0);
    w.at(*config.start_state) = 1.0;
    return w;
}

// Adjoint seeds for the acted policies, G(s, a) = dL/dpi~(a|s;s), and the
// costs, C(s) = dL/dc(s).
struct EvaluationAdjoint {
    StateActionTable policy;
    std::vector<double> cost;
};

inline EvaluationAdjoint adjoint_seeds(const TabularMdp& mdp, const Policy& acted, std::span<const double> values,
                                       std::span<const double> weights, double lambda) {
    const auto n = mdp.n_states();
    std::vector<double> rhs(n);
    for (StateId s = 0; s < n; ++s) rhs[s] = -weights[s];
    const auto mu = solve_policy_system(mdp, acted, rhs, true);
    StateActionTable q(n, mdp.n_actions());
    bellman_q(mdp, values, q);
    EvaluationAdjoint out{StateActionTable(n, mdp.n_actions()), std::vector<double>(n, 0.0)};
    for (StateId s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) continue;
        for (ActionId a = 0; a < mdp.n_actions(); ++a) out.policy(s, a) = mu[s] * q(s, a);
        out.cost[s] = -lambda * mu[s];
    }
    return out;
}

// Reverse mode through V_{k+1} = b + gamma P V_k from V_0 = 0. Returns the
// adjoint seeds and replaces `values` with the unrolled estimate.
inline EvaluationAdjoint unrolled_seeds(const TabularMdp& mdp, const Policy& acted, std::span<const double> costs,
                                        std::span<const double> weights, double lambda, double tolerance,
                                        std::vector<double>& values) {
    const auto n = mdp.n_states();
    const auto na = mdp.n_actions();
    const double gamma = mdp.discount();
    std::vector<double> b(n, 0.0);
    for (StateId s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) continue;
        for (ActionId a = 0; a < na; ++a) b[s] += acted(s, a) * mdp.expected_reward(s, a);
        b[s] -= lambda * costs[s];
    }
    std::vector<std::vector<double>> iterates{std::vector<double>(n, 0.0)};
    for (std::size_t k = 0; k < 1'000'000; ++k) {
        const auto& prev = iterates.back();
        std::vector<double> next(b);
        double delta = 0.0;
        for (StateId s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) continue;
            for (ActionId a = 0; a < na; ++a)
                for (const auto& tr : mdp.successors(s, a)) next[s] += gamma * acted(s, a) * tr.probability * prev[tr.next];
            delta = std::max(delta, std::abs(next[s] - prev[s]));
        }
        iterates.push_back(std::move(next));
        if (delta < tolerance) break;
    }
    values = iterates.back();

    EvaluationAdjoint out{StateActionTable(n, na), std::vector<double>(n, 0.0)};
    std::vector<double> adj(n);
    for (StateId s = 0; s < n; ++s) adj[s] = -weights[s];
    for (std::size_t k = iterates.size() - 1; k-- > 0;) {
        const auto& v_k = iterates[k];
        std::vector<double> prev_adj(n, 0.0);
        for (StateId s = 0; s < n; ++s) {
            if (mdp.is_terminal(s) || adj[s] == 0.0) continue;
            out.cost[s] += -lambda * adj[s];
            for (ActionId a = 0; a < na; ++a) {
                double future = 0.0;
                for (const auto& tr : mdp.successors(s, a)) {
                    future += tr.probability * v_k[tr.next];
                    prev_adj[tr.next] += gamma * acted(s, a) * tr.probability * adj[s];
                }
                out.policy(s, a) += adj[s] * (mdp.expected_reward(s, a) + gamma * future);
            }
        }
        adj.swap(prev_adj);
    }
    return out;
}

}  // namespace detail

/**
 * Evaluates L = -sum_s w(s) V_lambda(s) for the given temperatures and,
 * when requested, its exact gradient with respect to the raw parameters.
 */
inline MetaEvaluation evaluate_meta_objective(const TabularMdp& mdp, const TemperatureField& field,
                                              const MetaPlanConfig& config, bool with_gradient,
                                              const Policy* default_policy = nullptr) {
    config.validate();
    const auto n = mdp.n_states();
    const auto na = mdp.n_actions();
    if (field.n_states() != n) throw ModelError("temperature field does not match MDP");
    const Policy uniform = Policy::uniform(n, na);
    const Policy& prior = default_policy ? *default_policy : uniform;

    // Tapes are kept when they fit in ~512 MiB; otherwise rollouts are replayed.
    const std::size_t tape_bytes = (config.horizon + 1) * n * (2 * na + 1) * sizeof(double);
    const bool keep_tapes = with_gradient && tape_bytes * n <= (std::size_t{512} << 20);
    std::vector<SoftBellmanTape> tapes;
    if (keep_tapes) tapes.reserve(n);

    MetaEvaluation out;
    out.plans.slices.reserve(n);
    out.costs.assign(n, 0.0);
    for (StateId s = 0; s < n; ++s) {
        const auto beta = field.betas_for(s);
        SoftBellmanTape tape(mdp, beta, config.horizon, prior);
        out.plans.slices.push_back(tape.slice(s, prior));
        if (!mdp.is_terminal(s)) out.costs[s] = out.plans.slices.back().total_cost;
        if (keep_tapes) tapes.push_back(std::move(tape));
    }
    const Policy acted = out.plans.acted_policy();
    const auto weights = detail::loss_weights(mdp, config);

    std::optional<detail::EvaluationAdjoint> seeds;
    if (with_gradient && config.gradient_mode == EvaluationGradient::Unrolled) {
        seeds = detail::unrolled_seeds(mdp, acted, out.costs, weights, config.lambda, config.eval_tolerance, out.values);
    } else {
        out.values = evaluate_meta_value(mdp, acted, out.costs, config.lambda, config.eval_tolerance);
        if (with_gradient) seeds = detail::adjoint_seeds(mdp, acted, out.values, weights, config.lambda);
    }
    out.loss = 0.0;
    for (StateId s = 0; s < n; ++s) out.loss -= weights[s] * out.values[s];
    if (!with_gradient) return out;

    out.gradient.assign(n * n, 0.0);
    std::vector<double> policy_adj(n * na);
    for (StateId s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) continue;
        const double cost_adj = seeds->cost[s];
        bool any = cost_adj != 0.0;
        const auto& plan = out.plans.slices[s];
        std::fill(policy_adj.begin(), policy_adj.end(), 0.0);
        if (cost_adj != 0.0) {
            for (StateId t = 0; t < n; ++t) {
                if (mdp.is_terminal(t)) continue;
                for (ActionId a = 0; a < na; ++a) {
                    // An underflowed probability carries no gradient through the
                    // softmax; keep its seed finite so 0 * log 0 does not poison the sum.
                    const double pa = plan.policy(t, a);
                    if (pa > 0.0) policy_adj[t * na + a] = cost_adj * (std::log(pa / prior(t, a)) + 1.0);
                }
            }
        }
        for (ActionId a = 0; a < na; ++a) {
            policy_adj[s * na + a] += seeds->policy(s, a);
            any = any || seeds->policy(s, a) != 0.0;
        }
        if (!any) continue;

        std::vector<double> beta_adj;
        if (keep_tapes) {
            beta_adj = tapes[s].backpropagate(policy_adj);
        } else {
            const auto beta = field.betas_for(s);
            beta_adj = SoftBellmanTape(mdp, beta, config.horizon, prior).backpropagate(policy_adj);
        }
        const auto raw = field.raw_for(s);
        for (StateId t = 0; t < n; ++t) out.gradient[s * n + t] = beta_adj[t] * softplus_derivative(raw[t]);
    }
    return out;
}

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

inline LossAndGradient meta_loss_and_gradient(const TabularMdp& mdp, const TemperatureField& field,
                                              const MetaPlanConfig& config) {
    auto eval = evaluate_meta_objective(mdp, field, config, true);
    return {eval.loss, std::move(eval.gradient)};
}

inline double meta_loss(const TabularMdp& mdp, const TemperatureField& field, const MetaPlanConfig& config) {
    return evaluate_meta_objective(mdp, field, config, false).loss;
}

/// Raw parameters drawn uniformly on [init_low, init_high] under the config seed.
inline TemperatureField initial_temperatures(std::size_t n_states, const MetaPlanConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> dist(config.init_low, config.init_high);
    std::vector<double> raw(n_states * n_states);
    for (double& r : raw) r = dist(rng);
    return {n_states, std::move(raw)};
}

/// Thrown when the outer loop produces a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Runs `outer_iterations` Adam steps from a seeded random initialization.
 * loss_history[i] is the loss before step i; the returned plans, costs and
 * values belong to the final temperatures.
 */
/// Runs the Adam loop starting from `initial` instead of a seeded draw.
inline MetaPlanResult optimize_from(const TabularMdp& mdp, const MetaPlanConfig& config, TemperatureField initial,
                                    const Policy* default_policy = nullptr) {
    config.validate();
    if (initial.n_states() != mdp.n_states()) throw ModelError("initial temperature field does not match MDP");
    const auto started = std::chrono::steady_clock::now();
    MetaPlanResult result;
    result.config = config;
    result.beta_star = std::move(initial);
    Adam adam(config.adam, result.beta_star.raw().size());
    result.loss_history.reserve(config.outer_iterations);
    for (std::size_t it = 0; it < config.outer_iterations; ++it) {
        const auto eval = evaluate_meta_objective(mdp, result.beta_star, config, true, default_policy);
        if (!std::isfinite(eval.loss))
            throw DivergenceError("meta-planning loss became non-finite at iteration " + std::to_string(it));
        result.loss_history.push_back(eval.loss);
        adam.step(result.beta_star.raw(), eval.gradient);
    }
    auto final_eval = evaluate_meta_objective(mdp, result.beta_star, config, false, default_policy);
    result.plans = std::move(final_eval.plans);
    result.costs = std::move(final_eval.costs);
    result.values = std::move(final_eval.values);
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

inline MetaPlanResult optimize(const TabularMdp& mdp, const MetaPlanConfig& config,
                               const Policy* default_policy = nullptr) {
    config.validate();
    return optimize_from(mdp, config, initial_temperatures(mdp.n_states(), config), default_policy);
}

struct ParetoPoint {
    double lambda = 0.0;
    double planning_cost = 0.0;   // c(probe), nats
    double expected_value = 0.0;  // discounted task reward of the acted policies, no cost deduction
};

enum class SweepStart {
    Independent,   // every lambda starts from the seeded initialization
    Continuation,  // each lambda starts from the previous (smaller) lambda's optimum
};

/**
 * One optimization per distinct lambda; points come back in increasing lambda
 * order, and repeated lambdas repeat the same point. Under continuation the
 * smallest lambda is optimized twice (Adam restarted in between) so the chain
 * starts from a settled allocation.
 */
inline std::vector<ParetoPoint> pareto_sweep(const TabularMdp& mdp, std::vector<double> lambdas, StateId probe,
                                             const MetaPlanConfig& base = {},
                                             SweepStart start = SweepStart::Continuation) {
    if (lambdas.size() < 2) throw ModelError("a Pareto sweep needs at least two lambda values");
    std::vector<double> distinct = lambdas;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw ModelError("a Pareto sweep needs at least two distinct lambda values");
    if (probe >= mdp.n_states()) throw ModelError("probe state out of range");
    std::vector<ParetoPoint> points;
    points.reserve(distinct.size());
    std::optional<TemperatureField> previous;
    for (double lambda : distinct) {
        MetaPlanConfig config = base;
        config.lambda = lambda;
        MetaPlanResult result;
        if (start == SweepStart::Independent) {
            result = optimize(mdp, config);
        } else {
            if (!previous) previous = optimize(mdp, config).beta_star;
            result = optimize_from(mdp, config, *previous);
            previous = result.beta_star;
        }
        const auto task_values = evaluate_policy(mdp, result.acted_policy());
        points.push_back({lambda, result.costs[probe], task_values[probe]});
    }
    std::sort(lambdas.begin(), lambdas.end());
    std::vector<ParetoPoint> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas)
        out.push_back(*std::find_if(points.begin(), points.end(), [&](const ParetoPoint& p) { return p.lambda == lambda; }));
    return out;
}

}  // namespace metaplan
