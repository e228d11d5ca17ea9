#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "metaplan/maze.hpp"
#include "metaplan/meta_planner.hpp"
#include "support.hpp"

using namespace metaplan;
using metaplan::testing::random_mdp;

namespace {

std::vector<double> central_difference(const TabularMdp& mdp, const TemperatureField& field, const MetaPlanConfig& c,
                                       double h = 1e-5) {
    std::vector<double> g(field.raw().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto plus = field;
        auto minus = field;
        plus.raw()[i] += h;
        minus.raw()[i] -= h;
        g[i] = (meta_loss(mdp, plus, c) - meta_loss(mdp, minus, c)) / (2 * h);
    }
    return g;
}

TemperatureField random_field(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto f = TemperatureField::from_raw(n, 0.0);
    for (double& r : f.raw()) r = std::uniform_real_distribution<double>(-2.0, 1.0)(rng);
    return f;
}

}  // namespace

TEST(EvaluateMetaValue, ZeroLambdaOptimalPolicyGivesVStar) {
    const auto p = build_four_rooms();
    const auto vi = value_iteration(p.mdp, 1e-12);
    std::vector<ActionId> choice(p.mdp.n_states());
    for (StateId s = 0; s < choice.size(); ++s) choice[s] = argmax_actions(vi.q.row(s)).front();
    const auto v = evaluate_meta_value(p.mdp, Policy::deterministic(4, choice), std::vector<double>(104, 3.0), 0.0);
    for (StateId s = 0; s < v.size(); ++s) EXPECT_NEAR(v[s], vi.values[s], 1e-6);
}

TEST(EvaluateMetaValue, SelfLoopGeometricSeriesAndCostShift) {
    const TabularMdp loop(1, 2, 0.9, {false}, {{{0, 1.0, 1.5}}, {{0, 1.0, 1.5}}});
    const auto pi = Policy::uniform(1, 2);
    EXPECT_NEAR(evaluate_meta_value(loop, pi, std::vector<double>{0.0}, 0.0)[0], 15.0, 1e-10);
    const double k = 0.7, lambda = 0.3;
    const double shifted = evaluate_meta_value(loop, pi, std::vector<double>{k}, lambda)[0];
    EXPECT_NEAR(15.0 - shifted, lambda * k / (1 - 0.9), 1e-10);
}

TEST(EvaluateMetaValue, RejectsNonFiniteCost) {
    const TabularMdp loop(1, 1, 0.5, {false}, {{{0, 1.0, 1.0}}});
    EXPECT_THROW(evaluate_meta_value(loop, Policy::uniform(1, 1), std::vector<double>{INFINITY}, 1.0), ModelError);
}

TEST(MetaGradient, MatchesCentralDifferences) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto mdp = random_mdp(seed, {5, 3, 0.85, 3, seed % 2 == 0});
        MetaPlanConfig c;
        c.lambda = seed % 3 == 0 ? 0.0 : 0.5;
        c.horizon = 2 + seed;
        const auto field = random_field(5, 100 + seed);
        const auto g = meta_loss_and_gradient(mdp, field, c).gradient;
        const auto fd = central_difference(mdp, field, c);
        for (std::size_t i = 0; i < g.size(); ++i)
            EXPECT_LE(std::abs(g[i] - fd[i]), 1e-4 * std::max({std::abs(fd[i]), std::abs(g[i]), 1e-6}))
                << "seed " << seed << " coordinate " << i;
    }
}

TEST(MetaGradient, AdjointAgreesWithUnrolledEvaluation) {
    const auto mdp = random_mdp(42, {6, 3, 0.9, 3, true});
    MetaPlanConfig c;
    c.lambda = 0.2;
    c.horizon = 6;
    c.eval_tolerance = 1e-13;
    const auto field = random_field(6, 9);
    const auto adjoint = meta_loss_and_gradient(mdp, field, c);
    c.gradient_mode = EvaluationGradient::Unrolled;
    const auto unrolled = meta_loss_and_gradient(mdp, field, c);
    EXPECT_NEAR(adjoint.loss, unrolled.loss, 1e-9);
    for (std::size_t i = 0; i < adjoint.gradient.size(); ++i) EXPECT_NEAR(adjoint.gradient[i], unrolled.gradient[i], 1e-7);
}

TEST(MetaGradient, FiniteWhenPlanProbabilitiesUnderflow) {
    const auto p = make_problem(metaplan::testing::open_grid(4, 4));
    MetaPlanConfig c;
    c.lambda = 0.01;
    c.horizon = 10;
    const auto field = TemperatureField::from_raw(p.mdp.n_states(), 2000.0);
    const auto plans = plan_all(p.mdp, field, c.horizon, Policy::uniform(p.mdp.n_states(), 4));
    bool underflowed = false;
    for (const auto& slice : plans.slices)
        for (double x : slice.policy.data) underflowed = underflowed || x == 0.0;
    ASSERT_TRUE(underflowed);
    for (double g : meta_loss_and_gradient(p.mdp, field, c).gradient) EXPECT_TRUE(std::isfinite(g));
}

TEST(MetaGradient, StartStateWeightingMatchesDifferences) {
    const auto mdp = random_mdp(5, {4, 2, 0.8, 2, true});
    MetaPlanConfig c;
    c.weighting = LossWeighting::StartState;
    c.start_state = 1;
    c.horizon = 4;
    const auto field = random_field(4, 3);
    const auto g = meta_loss_and_gradient(mdp, field, c).gradient;
    const auto fd = central_difference(mdp, field, c);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], fd[i], 1e-4 * std::max(1e-6, std::abs(fd[i])));
}

TEST(MetaGradient, SymmetricActionsAtZeroBetaGiveZeroGradient) {
    // Every action in a state has the same successors and rewards.
    std::vector<std::vector<Transition>> rows;
    for (StateId s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) rows.push_back({{(s + 1) % 3, 1.0, static_cast<double>(s)}});
    const TabularMdp mdp(3, 2, 0.9, {false, false, false}, rows);
    const auto field = TemperatureField::from_raw(3, -40.0);
    for (double lambda : {0.0, 1.0}) {
        MetaPlanConfig c;
        c.lambda = lambda;
        c.horizon = 5;
        for (double g : meta_loss_and_gradient(mdp, field, c).gradient) EXPECT_NEAR(g, 0.0, 1e-15);
    }
}

TEST(MetaGradient, HugeLambdaPushesTemperaturesDown) {
    const auto mdp = random_mdp(17, {4, 3, 0.9, 2, true});
    MetaPlanConfig c;
    c.lambda = 1e3;
    c.horizon = 5;
    const auto field = TemperatureField::from_raw(4, -1.0);
    for (double g : meta_loss_and_gradient(mdp, field, c).gradient) EXPECT_GE(g, -1e-9);
}

TEST(MetaPlanConfig, Validation) {
    MetaPlanConfig c;
    c.outer_iterations = 0;
    EXPECT_THROW(c.validate(), ModelError);
    c = {};
    c.horizon = 0;
    EXPECT_THROW(c.validate(), ModelError);
    c = {};
    c.adam.step_size = 0.0;
    EXPECT_THROW(c.validate(), ModelError);
    c = {};
    c.lambda = -1.0;
    EXPECT_THROW(c.validate(), ModelError);
    c = {};
    c.weighting = LossWeighting::StartState;
    EXPECT_THROW(c.validate(), ModelError);
}

TEST(Adam, FirstStepMovesByStepSize) {
    AdamConfig cfg;
    cfg.step_size = 0.1;
    Adam adam(cfg, 2);
    std::vector<double> x{1.0, -1.0};
    const std::vector<double> g{3.0, -0.01};
    adam.step(x, g);
    EXPECT_NEAR(x[0], 0.9, 1e-6);
    EXPECT_NEAR(x[1], -0.9, 1e-5);
    EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, MinimizesAQuadratic) {
    AdamConfig cfg;
    cfg.step_size = 0.05;
    Adam adam(cfg, 1);
    std::vector<double> x{4.0};
    for (int i = 0; i < 2000; ++i) {
        const std::vector<double> g{2 * (x[0] - 1.5)};
        adam.step(x, g);
    }
    EXPECT_NEAR(x[0], 1.5, 1e-3);
}

TEST(Optimize, DeterministicAndConsistent) {
    const auto mdp = random_mdp(31, {6, 3, 0.9, 3, true});
    MetaPlanConfig c;
    c.horizon = 8;
    c.outer_iterations = 25;
    c.seed = 4;
    const auto a = optimize(mdp, c);
    const auto b = optimize(mdp, c);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(a.loss_history.size(), 25u);
    EXPECT_EQ(a.costs[5], 0.0);
    const auto v = evaluate_meta_value(mdp, a.acted_policy(), a.costs, c.lambda, c.eval_tolerance);
    for (StateId s = 0; s < v.size(); ++s) EXPECT_NEAR(v[s], a.values[s], 1e-10);
    // Raw parameters start inside the documented interval.
    const auto init = initial_temperatures(6, c);
    for (double r : init.raw()) {
        EXPECT_GE(r, -2.0);
        EXPECT_LE(r, 0.0);
    }
}

TEST(Optimize, MakesProgressOnFourRooms) {
    const auto p = build_four_rooms();
    MetaPlanConfig c;
    c.horizon = 40;
    c.outer_iterations = 40;
    const auto r = optimize(p.mdp, c);
    const auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    const std::vector<double> first(r.loss_history.begin(), r.loss_history.begin() + 4);
    const std::vector<double> last(r.loss_history.end() - 4, r.loss_history.end());
    EXPECT_LE(median(last), median(first));
}

TEST(Optimize, HugeLambdaKeepsPlansNearDefault) {
    // Unit-scale rewards, so lambda = 100 dominates any value a plan could buy.
    const auto p = make_problem(metaplan::testing::open_grid(4, 4), {-0.1, 1.0, 0.9});
    MetaPlanConfig c;
    c.lambda = 100.0;
    c.horizon = 30;
    c.outer_iterations = 150;
    const auto r = optimize(p.mdp, c);
    const auto acted = r.acted_policy();
    for (StateId s = 0; s < p.mdp.n_states(); ++s) {
        if (p.mdp.is_terminal(s)) continue;
        EXPECT_LT(r.costs[s], 1e-4);
        double tv = 0.0;
        for (double x : acted.row(s)) tv += std::abs(x - 0.25);
        EXPECT_LT(0.5 * tv, 1e-3);
    }
}

TEST(ParetoSweep, NeedsTwoDistinctLambdas) {
    const auto mdp = random_mdp(1, {3, 2, 0.9, 2, true});
    EXPECT_THROW(pareto_sweep(mdp, {0.1}, 0), ModelError);
    EXPECT_THROW(pareto_sweep(mdp, {0.1, 0.1}, 0), ModelError);
}

TEST(ParetoSweep, SortedAndCostFallsWithLambda) {
    const auto p = make_problem(metaplan::testing::open_grid(4, 4));
    MetaPlanConfig c;
    c.horizon = 20;
    c.outer_iterations = 60;
    const auto pts = pareto_sweep(p.mdp, {1.0, 0.01, 0.1, 0.1}, p.start(), c);
    ASSERT_EQ(pts.size(), 4u);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        EXPECT_LE(pts[i].lambda, pts[i + 1].lambda);
        EXPECT_LE(pts[i + 1].planning_cost, pts[i].planning_cost + 1e-6);
    }
    // Duplicate lambdas reproduce the same point.
    EXPECT_EQ(pts[1].planning_cost, pts[2].planning_cost);
    EXPECT_EQ(pts[1].expected_value, pts[2].expected_value);
}

TEST(ParetoSweep, IndependentPointsMatchSingleRuns) {
    const auto p = make_problem(metaplan::testing::open_grid(3, 3));
    MetaPlanConfig c;
    c.horizon = 10;
    c.outer_iterations = 20;
    const auto pts = pareto_sweep(p.mdp, {0.5, 0.05}, p.start(), c, SweepStart::Independent);
    c.lambda = 0.05;
    const auto single = optimize(p.mdp, c);
    EXPECT_EQ(pts[0].planning_cost, single.costs[p.start()]);
    EXPECT_EQ(pts[0].expected_value, evaluate_policy(p.mdp, single.acted_policy())[p.start()]);
}

TEST(OptimizeFrom, ContinuesFromTheGivenField) {
    const auto p = make_problem(metaplan::testing::open_grid(3, 3));
    MetaPlanConfig c;
    c.horizon = 10;
    c.outer_iterations = 5;
    const auto a = optimize(p.mdp, c);
    const auto b = optimize_from(p.mdp, c, initial_temperatures(p.mdp.n_states(), c));
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_THROW(optimize_from(p.mdp, c, TemperatureField::constant(2, 1.0)), ModelError);
}
