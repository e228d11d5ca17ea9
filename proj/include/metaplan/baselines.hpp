#pragma once
// Planning baselines: A* search, information-theoretic bounded rationality,
// softmax entropies and search-effort statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "metaplan/maze.hpp"
#include "metaplan/mdp.hpp"
#include "metaplan/partial_plan.hpp"

namespace metaplan {

enum class Heuristic {
    Manhattan,
    Zero,  // Dijkstra
};

struct AStarResult {
    std::optional<std::vector<Cell>> path;  // start..goal inclusive
    std::vector<Cell> expanded;             // pop order
    std::size_t expanded_count = 0;
    std::size_t inserted_count = 0;  // distinct cells ever placed on the frontier

    std::size_t path_length() const { return path ? path->size() - 1 : 0; }
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

/**
 * A* over 4-connected open cells with unit step costs.
 *
 * Frontier order is (f, h, row-major index). `expanded` lists the cells
 * popped before the goal is popped; when the goal is unreachable it holds the
 * whole reachable region and `path` is empty.
 */
inline AStarResult astar(const GridMaze& maze, Cell start, Cell goal, Heuristic heuristic = Heuristic::Manhattan) {
    if (!maze.is_open(start) || !maze.is_open(goal)) throw ModelError("A* endpoints must be open cells");
    const auto w = maze.width;
    const auto n = static_cast<std::size_t>(maze.width * maze.height);
    const auto id = [w](Cell c) { return static_cast<std::size_t>(c.row * w + c.col); };
    const auto h = [&](Cell c) { return heuristic == Heuristic::Manhattan ? manhattan(c, goal) : 0; };

    AStarResult out;
    if (start == goal) {
        out.path = std::vector<Cell>{start};
        out.expanded = {start};
        out.expanded_count = 1;
        out.inserted_count = 1;
        return out;
    }

    using Entry = std::tuple<int, int, std::size_t>;  // f, h, index
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::vector<int> g(n, -1);
    std::vector<std::size_t> parent(n, n);
    std::vector<bool> closed(n, false);
    g[id(start)] = 0;
    open.emplace(h(start), h(start), id(start));
    out.inserted_count = 1;

    while (!open.empty()) {
        const auto [f, hc, idx] = open.top();
        open.pop();
        if (closed[idx]) continue;
        const Cell c{static_cast<int>(idx) / w, static_cast<int>(idx) % w};
        if (f != g[idx] + hc) continue;  // stale entry
        if (c == goal) {
            std::vector<Cell> path;
            for (std::size_t at = idx; at != n; at = parent[at])
                path.push_back({static_cast<int>(at) / w, static_cast<int>(at) % w});
            std::reverse(path.begin(), path.end());
            out.path = std::move(path);
            break;
        }
        closed[idx] = true;
        out.expanded.push_back(c);
        for (const auto& [dr, dc] : kMoveDelta) {
            const Cell nb{c.row + dr, c.col + dc};
            if (!maze.is_open(nb)) continue;
            const auto j = id(nb);
            if (closed[j]) continue;
            const int cand = g[idx] + 1;
            if (g[j] >= 0 && g[j] <= cand) continue;
            if (g[j] < 0) ++out.inserted_count;
            g[j] = cand;
            parent[j] = idx;
            open.emplace(cand + h(nb), h(nb), j);
        }
    }
    out.expanded_count = out.expanded.size();
    return out;
}

/// Cells A* expands from `post` that it did not already expand from `pre`.
inline std::size_t astar_node_difference(const GridMaze& maze, Cell pre, Cell post, Cell goal) {
    const auto from_pre = astar(maze, pre, goal);
    const auto from_post = astar(maze, post, goal);
    if (!from_pre.path || !from_post.path) throw ModelError("goal unreachable for A* node difference");
    std::vector<bool> seen(static_cast<std::size_t>(maze.width * maze.height), false);
    for (const Cell& c : from_pre.expanded) seen[static_cast<std::size_t>(c.row * maze.width + c.col)] = true;
    std::size_t extra = 0;
    for (const Cell& c : from_post.expanded) extra += !seen[static_cast<std::size_t>(c.row * maze.width + c.col)];
    return extra;
}

struct FreeEnergyResult {
    std::vector<double> values;
    StateActionTable q;
    std::size_t iterations = 0;
};

/**
 * Free-energy soft-max values
 *   V(s) = (1/alpha) log sum_a prior(a|s) exp(alpha Q(s,a)),
 *   Q(s,a) = sum_s' T [R + gamma V(s')],
 * iterated to a fixed point with log-sum-exp.
 */
inline FreeEnergyResult free_energy_values(const TabularMdp& mdp, double alpha, const Policy& prior,
                                           double tolerance = 1e-12, std::size_t max_sweeps = 10'000'000) {
    if (!(alpha > 0.0)) throw ModelError("alpha must be positive");
    FreeEnergyResult out;
    out.values.assign(mdp.n_states(), 0.0);
    out.q = StateActionTable(mdp.n_states(), mdp.n_actions());
    for (; out.iterations < max_sweeps; ++out.iterations) {
        bellman_q(mdp, out.values, out.q);
        double delta = 0.0;
        for (StateId s = 0; s < mdp.n_states(); ++s) {
            if (mdp.is_terminal(s)) continue;
            const auto row = out.q.row(s);
            double top = -std::numeric_limits<double>::infinity();
            for (double q : row) top = std::max(top, alpha * q);
            double z = 0.0;
            for (ActionId a = 0; a < row.size(); ++a) z += prior(s, a) * std::exp(alpha * row[a] - top);
            const double v = (top + std::log(z)) / alpha;
            delta = std::max(delta, std::abs(v - out.values[s]));
            out.values[s] = v;
        }
        if (delta < tolerance) break;
    }
    bellman_q(mdp, out.values, out.q);
    return out;
}

/// pi_alpha(a|s) proportional to prior(a|s) exp(alpha Q(s,a)).
inline std::vector<double> free_energy_policy(std::span<const double> q_row, std::span<const double> prior_row,
                                              double alpha) {
    double top = -std::numeric_limits<double>::infinity();
    for (double q : q_row) top = std::max(top, alpha * q);
    std::vector<double> p(q_row.size());
    double z = 0.0;
    for (std::size_t a = 0; a < q_row.size(); ++a) {
        p[a] = prior_row[a] * std::exp(alpha * q_row[a] - top);
        z += p[a];
    }
    for (double& x : p) x /= z;
    return p;
}

/// KL of the bounded-rational policy from the uniform prior at `start`, in nats.
inline double itbr_first_step_cost(const TabularMdp& mdp, double alpha, StateId start, double tolerance = 1e-12) {
    const auto prior = Policy::uniform(mdp.n_states(), mdp.n_actions());
    const auto fe = free_energy_values(mdp, alpha, prior, tolerance);
    const auto p = free_energy_policy(fe.q.row(start), prior.row(start), alpha);
    return kl_divergence(p, prior.row(start));
}

/// Entropy of softmax(beta * Q(state, .)), in nats.
inline double softmax_entropy(const StateActionTable& q, StateId state, double beta = 1.0) {
    std::vector<double> pi(q.n_actions);
    detail::soft_row(q.row(state), beta, pi);
    return entropy(pi);
}

/**
 * Soft-Bellman iteration with a uniform inverse temperature, run until the
 * values move by less than `tolerance`. Returns the policy at every state
 * (terminal states keep the uniform default).
 */
inline StateActionTable soft_bellman_policy(const TabularMdp& mdp, double beta, double tolerance,
                                            std::size_t max_sweeps = 10'000'000) {
    const auto n = mdp.n_states();
    const auto na = mdp.n_actions();
    StateActionTable q(n, na);
    StateActionTable pi(n, na, 1.0 / static_cast<double>(na));
    std::vector<double> v(n, 0.0);
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double delta = 0.0;
        for (StateId s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) continue;
            const double nv = detail::soft_row(q.row(s), beta, pi.row(s));
            delta = std::max(delta, std::abs(nv - v[s]));
            v[s] = nv;
        }
        if (sweep > 0 && delta < tolerance) break;
        bellman_q(mdp, v, q);
    }
    return pi;
}

inline double soft_bellman_entropy(const TabularMdp& mdp, StateId state, double beta = 1.0,
                                   double tolerance = 1e-12) {
    if (!(tolerance > 0.0)) throw ModelError("tolerance must be positive");
    return entropy(soft_bellman_policy(mdp, beta, tolerance).row(state));
}

inline std::size_t vi_iterations(const TabularMdp& mdp, double tolerance) {
    return value_iteration(mdp, tolerance).iterations;
}

/// Number of consecutive action changes along a trajectory.
inline std::size_t count_turns(const Trajectory& traj) {
    std::size_t turns = 0;
    for (std::size_t t = 1; t < traj.actions.size(); ++t) turns += traj.actions[t] != traj.actions[t - 1];
    return turns;
}

/// Mean turns over `n_samples` greedy trajectories with seeded tie-breaking.
inline double trajectory_turns(const TabularMdp& mdp, const StateActionTable& q, StateId start,
                               std::size_t n_samples = 100, std::uint64_t seed = 0) {
    if (n_samples == 0) throw ModelError("n_samples must be at least 1");
    std::mt19937_64 seeds(seed);
    double total = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i)
        total += static_cast<double>(count_turns(greedy_path(mdp, q, start, seeds())));
    return total / static_cast<double>(n_samples);
}

}  // namespace metaplan
