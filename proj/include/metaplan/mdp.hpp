#pragma once
// Tabular MDPs, exact planning and occupancy measures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace metaplan {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Thrown when a model, policy or argument violates its contract.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Transition {
    StateId next;
    double probability;
    double reward;
};

/**
 * Finite MDP with sparse successor lists.
 *
 * Rows are indexed by (state, action). Terminal states are absorbing with a
 * zero-reward self loop; every planner in this library treats their value as
 * zero and stops accumulating occupancy once they are entered.
 */
class TabularMdp {
public:
    TabularMdp() = default;

    /// `rows` holds n_states * n_actions successor lists, indexed s * n_actions + a.
    TabularMdp(std::size_t n_states, std::size_t n_actions, double discount,
               std::vector<bool> terminal, std::vector<std::vector<Transition>> rows)
        : n_states_(n_states), n_actions_(n_actions), discount_(discount),
          terminal_(std::move(terminal)) {
        if (n_states == 0 || n_actions == 0) throw ModelError("MDP needs at least one state and action");
        if (!(discount >= 0.0 && discount < 1.0)) throw ModelError("discount must lie in [0, 1)");
        if (terminal_.size() != n_states) throw ModelError("terminal flags size mismatch");
        if (rows.size() != n_states * n_actions) throw ModelError("transition rows size mismatch");

        offsets_.reserve(rows.size() + 1);
        offsets_.push_back(0);
        expected_reward_.assign(rows.size(), 0.0);
        for (StateId s = 0; s < n_states; ++s) {
            for (ActionId a = 0; a < n_actions; ++a) {
                auto& row = rows[s * n_actions + a];
                if (terminal_[s]) row = {{s, 1.0, 0.0}};
                double total = 0.0;
                double reward = 0.0;
                for (const auto& tr : row) {
                    if (tr.next >= n_states) throw ModelError("successor state out of range");
                    if (!(tr.probability >= 0.0)) throw ModelError("negative transition probability");
                    if (!std::isfinite(tr.reward)) throw ModelError("non-finite reward");
                    total += tr.probability;
                    reward += tr.probability * tr.reward;
                }
                if (std::abs(total - 1.0) > 1e-12) {
                    throw ModelError("transition row (" + std::to_string(s) + ", " + std::to_string(a) +
                                     ") sums to " + std::to_string(total));
                }
                expected_reward_[s * n_actions + a] = reward;
                transitions_.insert(transitions_.end(), row.begin(), row.end());
                offsets_.push_back(transitions_.size());
            }
        }
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double discount() const noexcept { return discount_; }
    bool is_terminal(StateId s) const { return terminal_[s]; }
    const std::vector<bool>& terminal() const noexcept { return terminal_; }

    std::span<const Transition> successors(StateId s, ActionId a) const {
        const auto row = s * n_actions_ + a;
        return {transitions_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
    }

    /// Sum over s' of T(s, a, s') R(s, a, s').
    double expected_reward(StateId s, ActionId a) const { return expected_reward_[s * n_actions_ + a]; }

    double probability(StateId s, ActionId a, StateId next) const {
        double p = 0.0;
        for (const auto& tr : successors(s, a))
            if (tr.next == next) p += tr.probability;
        return p;
    }

    double reward(StateId s, ActionId a, StateId next) const {
        for (const auto& tr : successors(s, a))
            if (tr.next == next) return tr.reward;
        return 0.0;
    }

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    double discount_ = 0.0;
    std::vector<bool> terminal_;
    std::vector<std::size_t> offsets_;
    std::vector<Transition> transitions_;
    std::vector<double> expected_reward_;
};

/// Row-major table of per-(state, action) reals.
struct StateActionTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> data;

    StateActionTable() = default;
    StateActionTable(std::size_t states, std::size_t actions, double fill = 0.0)
        : n_states(states), n_actions(actions), data(states * actions, fill) {}

    double& operator()(StateId s, ActionId a) { return data[s * n_actions + a]; }
    double operator()(StateId s, ActionId a) const { return data[s * n_actions + a]; }
    std::span<double> row(StateId s) { return {data.data() + s * n_actions, n_actions}; }
    std::span<const double> row(StateId s) const { return {data.data() + s * n_actions, n_actions}; }
};

/// Stochastic policy pi(a | s).
class Policy {
public:
    Policy() = default;

    explicit Policy(StateActionTable probs) : probs_(std::move(probs)) {
        for (StateId s = 0; s < probs_.n_states; ++s) {
            double total = 0.0;
            for (double p : probs_.row(s)) {
                if (!(p >= 0.0)) throw ModelError("policy row " + std::to_string(s) + " has a negative entry");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw ModelError("policy row " + std::to_string(s) + " sums to " + std::to_string(total));
        }
    }

    static Policy uniform(std::size_t n_states, std::size_t n_actions) {
        return Policy(StateActionTable(n_states, n_actions, 1.0 / static_cast<double>(n_actions)));
    }

    static Policy deterministic(std::size_t n_actions, std::span<const ActionId> choice) {
        StateActionTable t(choice.size(), n_actions, 0.0);
        for (StateId s = 0; s < choice.size(); ++s) t(s, choice[s]) = 1.0;
        return Policy(std::move(t));
    }

    std::size_t n_states() const noexcept { return probs_.n_states; }
    std::size_t n_actions() const noexcept { return probs_.n_actions; }
    double operator()(StateId s, ActionId a) const { return probs_(s, a); }
    std::span<const double> row(StateId s) const { return probs_.row(s); }
    const StateActionTable& table() const noexcept { return probs_; }

private:
    StateActionTable probs_;
};

struct Trajectory {
    std::vector<StateId> states;
    std::vector<ActionId> actions;
    double total_reward = 0.0;

    std::size_t length() const noexcept { return actions.size(); }
};

struct ValueIterationResult {
    std::vector<double> values;
    StateActionTable q;
    std::size_t iterations = 0;
};

/// Bellman backup of a state-value vector into Q. Terminal rows stay zero.
inline void bellman_q(const TabularMdp& mdp, std::span<const double> values, StateActionTable& q) {
    const double gamma = mdp.discount();
    for (StateId s = 0; s < mdp.n_states(); ++s) {
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            if (mdp.is_terminal(s)) {
                q(s, a) = 0.0;
                continue;
            }
            double future = 0.0;
            for (const auto& tr : mdp.successors(s, a)) future += tr.probability * values[tr.next];
            q(s, a) = mdp.expected_reward(s, a) + gamma * future;
        }
    }
}

/**
 * Synchronous value iteration from V = 0.
 *
 * `iterations` counts the sweeps that changed V by at least `tolerance` in
 * max-norm; the confirming sweep that detects convergence is not counted, so
 * a myopic (discount 0) problem reports a single iteration.
 */
inline ValueIterationResult value_iteration(const TabularMdp& mdp, double tolerance,
                                            std::size_t max_sweeps = 1'000'000) {
    if (!(tolerance > 0.0)) throw ModelError("value iteration tolerance must be positive");
    ValueIterationResult out;
    out.values.assign(mdp.n_states(), 0.0);
    out.q = StateActionTable(mdp.n_states(), mdp.n_actions());
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bellman_q(mdp, out.values, out.q);
        double delta = 0.0;
        for (StateId s = 0; s < mdp.n_states(); ++s) {
            const auto row = out.q.row(s);
            const double v = mdp.is_terminal(s) ? 0.0 : *std::max_element(row.begin(), row.end());
            delta = std::max(delta, std::abs(v - out.values[s]));
            out.values[s] = v;
        }
        if (delta < tolerance) break;
        ++out.iterations;
    }
    bellman_q(mdp, out.values, out.q);
    return out;
}

namespace detail {

// Solves (I - gamma * M) x = b where M is the policy-induced transition
// matrix with terminal rows zeroed. When `transpose` is set the transposed
// system is solved instead.
inline std::vector<double> solve_policy_system(const TabularMdp& mdp, const Policy& policy,
                                               std::span<const double> rhs, bool transpose,
                                               double tolerance = 1e-12) {
    const auto n = mdp.n_states();
    const double gamma = mdp.discount();
    if (n <= 2000) {
        Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (StateId s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) continue;
            for (ActionId a = 0; a < mdp.n_actions(); ++a) {
                const double pa = policy(s, a);
                if (pa == 0.0) continue;
                for (const auto& tr : mdp.successors(s, a))
                    system(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(tr.next)) -= gamma * pa * tr.probability;
            }
        }
        Eigen::VectorXd b(static_cast<Eigen::Index>(n));
        for (StateId s = 0; s < n; ++s) b(static_cast<Eigen::Index>(s)) = rhs[s];
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
        Eigen::VectorXd x = transpose ? Eigen::VectorXd(lu.transpose().solve(b)) : Eigen::VectorXd(lu.solve(b));
        return {x.data(), x.data() + n};
    }
    // Large models: fixed-point iteration, a gamma-contraction.
    std::vector<double> x(rhs.begin(), rhs.end());
    std::vector<double> next(n);
    for (std::size_t it = 0; it < 10'000'000; ++it) {
        std::copy(rhs.begin(), rhs.end(), next.begin());
        for (StateId s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) continue;
            for (ActionId a = 0; a < mdp.n_actions(); ++a) {
                const double pa = policy(s, a);
                if (pa == 0.0) continue;
                for (const auto& tr : mdp.successors(s, a)) {
                    if (transpose)
                        next[tr.next] += gamma * pa * tr.probability * x[s];
                    else
                        next[s] += gamma * pa * tr.probability * x[tr.next];
                }
            }
        }
        double delta = 0.0;
        for (StateId s = 0; s < n; ++s) delta = std::max(delta, std::abs(next[s] - x[s]));
        x.swap(next);
        if (delta < tolerance) break;
    }
    return x;
}

}  // namespace detail

/// Exact policy evaluation; terminal states have value zero.
inline std::vector<double> evaluate_policy(const TabularMdp& mdp, const Policy& policy) {
    std::vector<double> rhs(mdp.n_states(), 0.0);
    for (StateId s = 0; s < mdp.n_states(); ++s) {
        if (mdp.is_terminal(s)) continue;
        for (ActionId a = 0; a < mdp.n_actions(); ++a) rhs[s] += policy(s, a) * mdp.expected_reward(s, a);
    }
    return detail::solve_policy_system(mdp, policy, rhs, false);
}

/**
 * Normalized discounted occupancy rho(s) proportional to
 * sum_t gamma^t Pr{s_t = s | s_0 = start}. Mass that enters a terminal state
 * is counted once and then stops.
 */
inline std::vector<double> discounted_occupancy(const TabularMdp& mdp, const Policy& policy, StateId start) {
    if (start >= mdp.n_states()) throw ModelError("start state out of range");
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw ModelError("policy shape does not match MDP");
    std::vector<double> rhs(mdp.n_states(), 0.0);
    rhs[start] = 1.0;
    auto visits = detail::solve_policy_system(mdp, policy, rhs, true);
    double total = 0.0;
    for (double& v : visits) {
        v = std::max(v, 0.0);
        total += v;
    }
    for (double& v : visits) v /= total;
    return visits;
}

/// Actions whose Q value is within a relative 1e-9 of the row maximum.
inline std::vector<ActionId> argmax_actions(std::span<const double> q_row) {
    const double best = *std::max_element(q_row.begin(), q_row.end());
    const double tol = 1e-9 * std::max(1.0, std::abs(best));
    std::vector<ActionId> out;
    for (ActionId a = 0; a < q_row.size(); ++a)
        if (q_row[a] >= best - tol) out.push_back(a);
    return out;
}

namespace detail {

inline StateId sample_successor(const TabularMdp& mdp, StateId s, ActionId a, std::mt19937_64& rng, double& reward) {
    const auto succ = mdp.successors(s, a);
    if (succ.size() == 1) {
        reward = succ[0].reward;
        return succ[0].next;
    }
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (const auto& tr : succ) {
        u -= tr.probability;
        if (u <= 0.0) {
            reward = tr.reward;
            return tr.next;
        }
    }
    reward = succ.back().reward;
    return succ.back().next;
}

}  // namespace detail

/**
 * Follows argmax-Q actions from `start` until a terminal state, breaking ties
 * uniformly at random under `seed`. Throws if no terminal state is reached
 * within `max_steps`.
 */
inline Trajectory greedy_path(const TabularMdp& mdp, const StateActionTable& q, StateId start, std::uint64_t seed,
                              std::size_t max_steps = 100'000) {
    std::mt19937_64 rng(seed);
    Trajectory traj;
    traj.states.push_back(start);
    StateId s = start;
    while (!mdp.is_terminal(s)) {
        if (traj.actions.size() >= max_steps) throw ModelError("greedy path did not reach a terminal state");
        const auto best = argmax_actions(q.row(s));
        const ActionId a = best.size() == 1
                               ? best.front()
                               : best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng)];
        double r = 0.0;
        const StateId next = detail::sample_successor(mdp, s, a, rng, r);
        if (next == s && mdp.successors(s, a).size() == 1)
            throw ModelError("greedy path is stuck; goal unreachable");
        traj.actions.push_back(a);
        traj.states.push_back(next);
        traj.total_reward += r;
        s = next;
    }
    return traj;
}

/// Samples states under T and the policy; stops at a terminal state or after max_steps actions.
inline Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& policy, StateId start, std::uint64_t seed,
                                    std::size_t max_steps) {
    if (max_steps == 0) throw ModelError("max_steps must be positive");
    std::mt19937_64 rng(seed);
    Trajectory traj;
    traj.states.push_back(start);
    StateId s = start;
    while (!mdp.is_terminal(s) && traj.actions.size() < max_steps) {
        const auto row = policy.row(s);
        ActionId a = 0;
        // Deterministic rows consume no randomness.
        const auto top = std::max_element(row.begin(), row.end());
        if (*top == 1.0) {
            a = static_cast<ActionId>(top - row.begin());
        } else {
            double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            a = row.size() - 1;
            for (ActionId b = 0; b < row.size(); ++b) {
                u -= row[b];
                if (u <= 0.0) {
                    a = b;
                    break;
                }
            }
        }
        double r = 0.0;
        s = detail::sample_successor(mdp, s, a, rng, r);
        traj.actions.push_back(a);
        traj.states.push_back(s);
        traj.total_reward += r;
    }
    return traj;
}

}  // namespace metaplan
