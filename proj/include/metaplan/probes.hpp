#pragma once
// Teleportation probes: event simulation and partial-plan divergence.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "metaplan/maze.hpp"
#include "metaplan/mdp.hpp"
#include "metaplan/meta_planner.hpp"
#include "metaplan/partial_plan.hpp"

namespace metaplan {

struct TeleportEvent {
    std::string maze_id;
    Cell pre_state;
    Cell post_state;
    std::size_t step_index = 0;  // n, 1-based
    std::uint64_t seed = 0;      // tie-breaking seed of the greedy trajectory
};

/**
 * For each event: n ~ U{1..L} with L the optimal path length, pre_state is
 * the state occupied at step n of a seeded greedy optimal trajectory
 * (step 1 is the start), and post_state is uniform over open non-goal cells.
 */
inline std::vector<TeleportEvent> simulate_teleport_events(const GridMaze& maze, std::size_t count,
                                                           std::uint64_t seed, const std::string& maze_id = "") {
    if (count == 0) throw ModelError("event count must be at least 1");
    const auto problem = make_problem(maze);
    // Landing cells are restricted to those that can still reach the goal, so
    // every post-teleport predictor stays defined.
    const auto to_goal = bfs_distances(maze, maze.goal);
    std::vector<Cell> landing;
    for (StateId s = 0; s < problem.index.size(); ++s) {
        const Cell c = problem.index.cell(s);
        if (c != maze.goal && to_goal[static_cast<std::size_t>(c.row * maze.width + c.col)] >= 0) landing.push_back(c);
    }
    if (landing.size() <= 1) throw ModelError("maze has no reachable non-goal cells besides the start");

    const auto vi = value_iteration(problem.mdp, 1e-9);
    std::mt19937_64 rng(seed);
    std::vector<TeleportEvent> events;
    events.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        TeleportEvent ev;
        ev.maze_id = maze_id;
        ev.seed = rng();
        const auto path = greedy_path(problem.mdp, vi.q, problem.start(), ev.seed);
        ev.step_index = std::uniform_int_distribution<std::size_t>(1, path.length())(rng);
        ev.pre_state = problem.index.cell(path.states[ev.step_index - 1]);
        ev.post_state = landing[std::uniform_int_distribution<std::size_t>(0, landing.size() - 1)(rng)];
        events.push_back(std::move(ev));
    }
    return events;
}

/// State-action joint pi(a|s) rho(s) of a plan slice, rho rolled out from the slice's ground state.
inline std::vector<double> plan_joint(const PartialPlanSlice& slice, const TabularMdp& mdp, double epsilon) {
    const Policy policy(slice.policy);
    auto rho = discounted_occupancy(mdp, policy, slice.ground);
    const auto n = static_cast<double>(rho.size());
    for (double& r : rho) r = (1.0 - epsilon) * r + epsilon / n;
    std::vector<double> joint(slice.policy.data.size());
    for (StateId s = 0; s < mdp.n_states(); ++s)
        for (ActionId a = 0; a < mdp.n_actions(); ++a)
            joint[s * mdp.n_actions() + a] = policy(s, a) * rho[s];
    return joint;
}

/**
 * D_KL[p_post || p_pre] between the state-action joints of the partial plans
 * from post_state and pre_state. Occupancies are mixed with the uniform
 * distribution at weight `epsilon` before the joints are formed.
 */
inline double partial_plan_divergence(const MetaPlanResult& result, const TabularMdp& mdp, StateId pre_state,
                                      StateId post_state, double epsilon = 1e-6) {
    if (pre_state >= result.plans.size() || post_state >= result.plans.size())
        throw ModelError("probe state out of range");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ModelError("smoothing epsilon must lie in (0, 1)");
    const auto pre = plan_joint(result.plans[pre_state], mdp, epsilon);
    const auto post = plan_joint(result.plans[post_state], mdp, epsilon);
    return kl_divergence(post, pre);
}

/// Euclidean distance between cell centres.
inline double teleport_distance(Cell pre, Cell post) {
    return std::hypot(static_cast<double>(pre.row - post.row), static_cast<double>(pre.col - post.col));
}

}  // namespace metaplan
