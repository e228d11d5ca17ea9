#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "metaplan/maze.hpp"
#include "metaplan/stimuli.hpp"
#include "support.hpp"

using namespace metaplan;

namespace {

// Flood fill, written separately from the library's BFS.
bool connected(const GridMaze& m) {
    std::vector<bool> seen(m.walls.size(), false);
    std::vector<Cell> stack{m.start};
    seen[static_cast<std::size_t>(m.start.row * m.width + m.start.col)] = true;
    while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        if (c == m.goal) return true;
        for (const Cell n : {Cell{c.row + 1, c.col}, Cell{c.row - 1, c.col}, Cell{c.row, c.col + 1}, Cell{c.row, c.col - 1}}) {
            if (!m.is_open(n)) continue;
            auto i = static_cast<std::size_t>(n.row * m.width + n.col);
            if (seen[i]) continue;
            seen[i] = true;
            stack.push_back(n);
        }
    }
    return false;
}

}  // namespace

TEST(GenerateMazes, ZeroDensityGivesOpenGrid) {
    const auto mazes = generate_mazes(7, 5, 3, 1, {0.0, 0.0});
    for (const auto& m : mazes) {
        EXPECT_EQ(m.wall_count(), 0u);
        EXPECT_EQ(optimal_plan_length(m), 6u + 4u);
    }
}

TEST(GenerateMazes, LargeBatchIsSolvableAndReproducible) {
    const auto a = generate_mazes(9, 9, 2000, 2024);
    const auto b = generate_mazes(9, 9, 2000, 2024);
    ASSERT_EQ(a.size(), 2000u);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(connected(a[i]));
        EXPECT_EQ(a[i].start, (Cell{8, 8}));
        EXPECT_EQ(a[i].goal, (Cell{0, 0}));
        EXPECT_EQ(serialize_maze(a[i]), serialize_maze(b[i]));
        ids.insert(a[i].comment);
    }
    EXPECT_EQ(ids.size(), 2000u);
    EXPECT_EQ(a[17].comment, "maze-0017");
}

TEST(GenerateMazes, DensityVariesAcrossMazes) {
    std::set<std::size_t> counts;
    for (const auto& m : generate_mazes(9, 9, 40, 6)) counts.insert(m.wall_count());
    EXPECT_GT(counts.size(), 5u);
}

TEST(GenerateMazes, RejectsBadArguments) {
    EXPECT_THROW(generate_mazes(2, 9, 1, 0), MazeError);
    EXPECT_THROW(generate_mazes(9, 9, 0, 0), ModelError);
    EXPECT_THROW(generate_mazes(9, 9, 1, 0, {0.1, 0.7}), ModelError);
}

TEST(SelectByCost, AllItemsWhenKEqualsCount) {
    const std::vector<double> costs{3, 1, 4, 1.5, 9, 2.6};
    auto sel = select_by_cost(costs, costs.size(), 0);
    EXPECT_FALSE(sel.with_replacement);
    std::sort(sel.indices.begin(), sel.indices.end());
    EXPECT_EQ(sel.indices, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(SelectByCost, ExtremeBinsHoldExtremeItems) {
    std::vector<double> costs(100);
    for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = static_cast<double>((i * 37) % 100);
    const auto sel = select_by_cost(costs, 10, 5);
    ASSERT_EQ(sel.indices.size(), 10u);
    EXPECT_LT(costs[sel.indices.front()], 10.0);
    EXPECT_GE(costs[sel.indices.back()], 90.0);
    for (std::size_t b = 0; b + 1 < sel.indices.size(); ++b) EXPECT_LT(costs[sel.indices[b]], costs[sel.indices[b + 1]]);
}

TEST(SelectByCost, FallsBackWithReplacementOnFewDistinctValues) {
    const std::vector<double> costs{1, 1, 1, 2, 2, 2};
    const auto sel = select_by_cost(costs, 4, 3);
    EXPECT_TRUE(sel.with_replacement);
    EXPECT_EQ(sel.indices.size(), 4u);
    EXPECT_EQ(costs[sel.indices.front()], 1.0);
    EXPECT_EQ(costs[sel.indices.back()], 2.0);
}

TEST(SelectByCost, RejectsBadK) {
    EXPECT_THROW(select_by_cost({1, 2}, 3, 0), ModelError);
    EXPECT_THROW(select_by_cost({1, 2}, 0, 0), ModelError);
}

TEST(SelectSpanningCosts, SpansMostOfTheBatchRange) {
    const auto mazes = generate_mazes(5, 5, 60, 11);
    MetaPlanConfig c;
    c.horizon = 25;
    c.outer_iterations = 15;
    const auto out = select_spanning_costs(mazes, c, 10, 2);
    ASSERT_EQ(out.mazes.size(), 10u);
    const auto [lo, hi] = std::minmax_element(out.batch_costs.begin(), out.batch_costs.end());
    double sel_lo = 1e300, sel_hi = -1e300;
    for (std::size_t i : out.selection.indices) {
        sel_lo = std::min(sel_lo, out.batch_costs[i]);
        sel_hi = std::max(sel_hi, out.batch_costs[i]);
    }
    EXPECT_GE(sel_hi - sel_lo, 0.8 * (*hi - *lo));
}

TEST(ExpandSymmetries, FourBasesGiveThirtyTwoDistinctMazes) {
    const auto bases = generate_mazes(12, 12, 4, 77);
    const auto expanded = expand_symmetries(bases);
    ASSERT_EQ(expanded.size(), 32u);
    std::set<std::string> texts, ids;
    for (const auto& lm : expanded) {
        GridMaze m = lm.maze;
        m.comment.clear();
        texts.insert(serialize_maze(m));
        ids.insert(lm.id);
        EXPECT_EQ(apply_symmetry(bases[lm.base], lm.symmetry).walls, lm.maze.walls);
    }
    EXPECT_EQ(texts.size(), 32u);
    EXPECT_EQ(ids.size(), 32u);
}

TEST(ScheduleRounds, EachMazeOncePerCondition) {
    const auto expanded = expand_symmetries(generate_mazes(6, 6, 4, 1));
    const auto rounds = schedule_rounds(expanded, 8);
    ASSERT_EQ(rounds.size(), 64u);
    std::map<std::pair<std::string, RoundCondition>, int> seen;
    for (const auto& r : rounds) ++seen[{r.maze_id, r.condition}];
    EXPECT_EQ(seen.size(), 64u);
    for (const auto& [key, n] : seen) EXPECT_EQ(n, 1);
    const auto again = schedule_rounds(expanded, 8);
    for (std::size_t i = 0; i < rounds.size(); ++i) EXPECT_EQ(rounds[i].maze_id, again[i].maze_id);
}

TEST(Exp1Predictors, AllFieldsFiniteAndConsistent) {
    const auto m = generate_mazes(6, 6, 1, 3).front();
    PredictorOptions opt;
    opt.meta.horizon = 30;
    opt.meta.outer_iterations = 10;
    const auto r = exp1_predictors("x", m, opt);
    EXPECT_EQ(r.maze_id, "x");
    EXPECT_TRUE(std::isfinite(r.partial_plan_cost));
    EXPECT_GE(r.partial_plan_cost, 0.0);
    EXPECT_EQ(r.optimal_plan_length, optimal_plan_length(m));
    EXPECT_GE(r.astar_expanded, 1u);
    EXPECT_GE(r.astar_inserted, r.astar_expanded);
    EXPECT_GT(r.itbr_cost, 0.0);
    EXPECT_LE(r.softmax_entropy, std::log(4.0));
    EXPECT_LE(r.soft_bellman_entropy, std::log(4.0));
    EXPECT_GT(r.vi_iterations, 0u);
    EXPECT_GE(r.trajectory_turns, 0.0);
}

TEST(Exp2Predictors, OneRecordPerEventAndBasePlansReused) {
    const auto bases = generate_mazes(6, 6, 1, 9);
    const auto expanded = expand_symmetries(bases);
    MetaPlanConfig c;
    c.horizon = 20;
    c.outer_iterations = 8;
    const auto records = exp2_predictors(expanded, 3, 4, c);
    ASSERT_EQ(records.size(), 24u);
    for (const auto& r : records) {
        EXPECT_GE(r.partial_plan_divergence, 0.0);
        EXPECT_TRUE(std::isfinite(r.partial_plan_divergence));
        EXPECT_GE(r.astar_destination_nodes, 1u);
        EXPECT_NEAR(r.teleport_distance, teleport_distance(r.event.pre_state, r.event.post_state), 0.0);
    }
    // The identity image shares the base maze's state numbering, so a direct
    // optimization must agree exactly.
    const auto& id_maze = expanded.front();
    ASSERT_EQ(id_maze.symmetry, Symmetry::Identity);
    const auto problem = make_problem(id_maze.maze);
    const auto direct = optimize(problem.mdp, c);
    std::size_t checked = 0;
    for (const auto& r : records) {
        if (r.event.maze_id != id_maze.id) continue;
        const double d = partial_plan_divergence(direct, problem.mdp, problem.index.at(r.event.pre_state),
                                                 problem.index.at(r.event.post_state));
        EXPECT_EQ(d, r.partial_plan_divergence);
        ++checked;
    }
    EXPECT_EQ(checked, 3u);
    // Other images read the base plans at the pulled-back cells.
    const auto& rot = expanded[1];
    for (const auto& r : records) {
        if (r.event.maze_id != rot.id) continue;
        const auto back = inverse(rot.symmetry);
        const Cell pre = map_cell(r.event.pre_state, back, 6);
        const Cell post = map_cell(r.event.post_state, back, 6);
        EXPECT_TRUE(bases[0].is_open(pre));
        EXPECT_EQ(partial_plan_divergence(direct, problem.mdp, problem.index.at(pre), problem.index.at(post)),
                  r.partial_plan_divergence);
    }
}
