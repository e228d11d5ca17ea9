#pragma once
// Maze stimuli: random generation, cost-stratified selection, symmetry
// expansion, and the per-maze / per-event predictor records.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "metaplan/baselines.hpp"
#include "metaplan/maze.hpp"
#include "metaplan/meta_planner.hpp"
#include "metaplan/probes.hpp"

namespace metaplan {

struct DensityRange {
    double low = 0.1;
    double high = 0.4;
};

inline std::string maze_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "maze-%04zu", i);
    return buf;
}

/**
 * Mazes with the start in the lower-right corner and the goal in the
 * upper-left. Each maze draws a wall density from `densities`, places walls
 * i.i.d. and is redrawn until the goal is reachable. The maze id is stored
 * as the file comment.
 */
inline std::vector<GridMaze> generate_mazes(int width, int height, std::size_t count, std::uint64_t seed,
                                            DensityRange densities = {}) {
    if (width < 3 || height < 3) throw MazeError(MazeErrorKind::InvalidDimensions, "mazes must be at least 3x3");
    if (count == 0) throw ModelError("maze count must be at least 1");
    if (!(densities.low >= 0.0 && densities.high <= 0.6 && densities.low <= densities.high))
        throw ModelError("wall densities must satisfy 0 <= low <= high <= 0.6");
    std::mt19937_64 master(seed);
    std::vector<GridMaze> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(master());
        const double density = std::uniform_real_distribution<double>(densities.low, densities.high)(rng);
        GridMaze maze;
        maze.width = width;
        maze.height = height;
        maze.start = {height - 1, width - 1};
        maze.goal = {0, 0};
        maze.comment = maze_id(i);
        std::bernoulli_distribution wall(density);
        do {
            maze.walls.assign(static_cast<std::size_t>(width * height), false);
            for (int r = 0; r < height; ++r)
                for (int c = 0; c < width; ++c) {
                    const Cell cell{r, c};
                    if (cell == maze.start || cell == maze.goal) continue;
                    maze.walls[static_cast<std::size_t>(r * width + c)] = wall(rng);
                }
        } while (!goal_reachable(maze));
        out.push_back(std::move(maze));
    }
    return out;
}

struct Selection {
    std::vector<std::size_t> indices;  // one per bin, in bin order
    bool with_replacement = false;     // fewer distinct costs than bins
};

/**
 * Sorts the costs, splits them into k equal-count quantile bins and draws one
 * item per bin. With fewer than k distinct values the bins are laid over the
 * distinct values instead and items are drawn with replacement.
 */
inline Selection select_by_cost(const std::vector<double>& costs, std::size_t k, std::uint64_t seed) {
    const auto m = costs.size();
    if (k == 0 || k > m) throw ModelError("selection size must lie in [1, number of mazes]");
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });

    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i : order) {
        if (groups.empty() || costs[groups.back().front()] != costs[i]) groups.emplace_back();
        groups.back().push_back(i);
    }

    std::mt19937_64 rng(seed);
    Selection out;
    out.with_replacement = groups.size() < k;
    for (std::size_t b = 0; b < k; ++b) {
        if (out.with_replacement) {
            const auto& g = groups[b * groups.size() / k];
            out.indices.push_back(g[std::uniform_int_distribution<std::size_t>(0, g.size() - 1)(rng)]);
        } else {
            const auto lo = b * m / k;
            const auto hi = (b + 1) * m / k;
            out.indices.push_back(order[std::uniform_int_distribution<std::size_t>(lo, hi - 1)(rng)]);
        }
    }
    return out;
}

/// Initial-state planning cost c(start) of the optimized plans for a maze.
inline double initial_state_cost(const GridMaze& maze, const MetaPlanConfig& config) {
    const auto problem = make_problem(maze);
    const auto result = optimize(problem.mdp, config);
    return result.costs[problem.start()];
}

struct StimulusSelection {
    std::vector<GridMaze> mazes;
    std::vector<double> batch_costs;
    Selection selection;
};

inline StimulusSelection select_spanning_costs(const std::vector<GridMaze>& mazes, const MetaPlanConfig& config,
                                               std::size_t k, std::uint64_t seed) {
    StimulusSelection out;
    out.batch_costs.reserve(mazes.size());
    for (const auto& m : mazes) out.batch_costs.push_back(initial_state_cost(m, config));
    out.selection = select_by_cost(out.batch_costs, k, seed);
    for (std::size_t i : out.selection.indices) out.mazes.push_back(mazes[i]);
    return out;
}

struct LabeledMaze {
    std::string id;
    std::size_t base = 0;  // index of the base maze
    Symmetry symmetry = Symmetry::Identity;
    GridMaze maze;
};

/// Every base maze under all eight symmetries, ids "<base id>/<symmetry>".
inline std::vector<LabeledMaze> expand_symmetries(const std::vector<GridMaze>& bases) {
    std::vector<LabeledMaze> out;
    for (std::size_t b = 0; b < bases.size(); ++b) {
        const std::string base_id = bases[b].comment.empty() ? maze_id(b) : bases[b].comment;
        for (Symmetry sym : kAllSymmetries) {
            LabeledMaze lm{base_id + "/" + to_string(sym), b, sym, apply_symmetry(bases[b], sym)};
            lm.maze.comment = lm.id;
            out.push_back(std::move(lm));
        }
    }
    return out;
}

enum class RoundCondition { Normal, Teleport };

inline const char* to_string(RoundCondition c) { return c == RoundCondition::Normal ? "normal" : "teleport"; }

struct Round {
    std::string maze_id;
    RoundCondition condition;
};

/// Each maze once per condition, in seeded random order.
inline std::vector<Round> schedule_rounds(const std::vector<LabeledMaze>& mazes, std::uint64_t seed) {
    std::vector<Round> rounds;
    for (const auto& m : mazes) {
        rounds.push_back({m.id, RoundCondition::Normal});
        rounds.push_back({m.id, RoundCondition::Teleport});
    }
    std::mt19937_64 rng(seed);
    std::shuffle(rounds.begin(), rounds.end(), rng);
    return rounds;
}

struct PredictorOptions {
    MetaPlanConfig meta;
    double itbr_alpha = 100.0;  // 1 / alpha = lambda = 0.01
    double softmax_beta = 1.0;
    double vi_tolerance = 1e-9;
    double soft_bellman_tolerance = 1e-10;
    std::size_t turn_samples = 100;
    std::uint64_t seed = 0;
};

struct PredictorRecord {
    std::string maze_id;
    double partial_plan_cost = 0.0;
    std::size_t astar_expanded = 0;
    std::size_t astar_inserted = 0;
    std::size_t optimal_plan_length = 0;
    double itbr_cost = 0.0;
    double softmax_entropy = 0.0;
    double soft_bellman_entropy = 0.0;
    std::size_t vi_iterations = 0;
    double trajectory_turns = 0.0;
};

inline PredictorRecord exp1_predictors(const std::string& id, const GridMaze& maze, const PredictorOptions& opt) {
    const auto problem = make_problem(maze);
    const auto start = problem.start();
    const auto vi = value_iteration(problem.mdp, opt.vi_tolerance);
    const auto search = astar(maze, maze.start, maze.goal);

    PredictorRecord rec;
    rec.maze_id = id;
    rec.partial_plan_cost = optimize(problem.mdp, opt.meta).costs[start];
    rec.astar_expanded = search.expanded_count;
    rec.astar_inserted = search.inserted_count;
    rec.optimal_plan_length = greedy_path(problem.mdp, vi.q, start, opt.seed).length();
    rec.itbr_cost = itbr_first_step_cost(problem.mdp, opt.itbr_alpha, start);
    rec.softmax_entropy = softmax_entropy(vi.q, start, opt.softmax_beta);
    rec.soft_bellman_entropy = soft_bellman_entropy(problem.mdp, start, opt.softmax_beta, opt.soft_bellman_tolerance);
    rec.vi_iterations = vi.iterations;
    rec.trajectory_turns = trajectory_turns(problem.mdp, vi.q, start, opt.turn_samples, opt.seed);
    return rec;
}

struct TeleportRecord {
    TeleportEvent event;
    double partial_plan_divergence = 0.0;
    std::size_t astar_destination_nodes = 0;
    std::size_t astar_node_difference = 0;
    std::size_t optimal_path_length_post = 0;
    double teleport_distance = 0.0;
};

/**
 * Teleport records for every symmetry-expanded maze. Plans are optimized
 * once per base maze; a transformed maze's MDP is a relabeling of its base,
 * so divergences are read off the base plans at the mapped cells. Search
 * predictors run on the transformed maze itself.
 */
inline std::vector<TeleportRecord> exp2_predictors(const std::vector<LabeledMaze>& mazes,
                                                   std::size_t events_per_maze, std::uint64_t seed,
                                                   const MetaPlanConfig& config, double epsilon = 1e-6) {
    std::map<std::size_t, std::pair<MazeProblem, MetaPlanResult>> base_plans;
    std::vector<TeleportRecord> out;
    std::mt19937_64 seeds(seed);
    for (const auto& lm : mazes) {
        auto it = base_plans.find(lm.base);
        if (it == base_plans.end()) {
            auto base_maze = apply_symmetry(lm.maze, inverse(lm.symmetry));
            auto problem = make_problem(std::move(base_maze));
            auto result = optimize(problem.mdp, config);
            it = base_plans.emplace(lm.base, std::make_pair(std::move(problem), std::move(result))).first;
        }
        const auto& [base_problem, base_result] = it->second;
        const auto back = inverse(lm.symmetry);
        const int side = lm.maze.width;
        const auto goal_dist = bfs_distances(lm.maze, lm.maze.goal);

        for (auto& ev : simulate_teleport_events(lm.maze, events_per_maze, seeds(), lm.id)) {
            TeleportRecord rec;
            const auto pre = base_problem.index.at(map_cell(ev.pre_state, back, side));
            const auto post = base_problem.index.at(map_cell(ev.post_state, back, side));
            rec.partial_plan_divergence = partial_plan_divergence(base_result, base_problem.mdp, pre, post, epsilon);
            rec.astar_destination_nodes = astar(lm.maze, ev.post_state, lm.maze.goal).expanded_count;
            rec.astar_node_difference = astar_node_difference(lm.maze, ev.pre_state, ev.post_state, lm.maze.goal);
            rec.optimal_path_length_post = static_cast<std::size_t>(
                goal_dist[static_cast<std::size_t>(ev.post_state.row * side + ev.post_state.col)]);
            rec.teleport_distance = teleport_distance(ev.pre_state, ev.post_state);
            rec.event = std::move(ev);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace metaplan
