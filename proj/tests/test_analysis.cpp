#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "metaplan/analysis.hpp"
#include "metaplan/maze.hpp"
#include "support.hpp"

using namespace metaplan;

namespace {

PartialPlan plans_differing_at_one_state() {
    PartialPlan plan;
    for (int g = 0; g < 2; ++g) {
        PartialPlanSlice slice;
        slice.ground = static_cast<StateId>(g);
        slice.policy = StateActionTable(3, 2, 0.5);
        plan.slices.push_back(slice);
    }
    plan.slices[1].policy(2, 0) = 0.9;
    plan.slices[1].policy(2, 1) = 0.1;
    return plan;
}

DistanceMatrix points_on_line(const std::vector<double>& xs) {
    DistanceMatrix d(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j) d(i, j) = std::abs(xs[i] - xs[j]);
    return d;
}

}  // namespace

TEST(PlanningDistance, IdentitySymmetryAndClosedForm) {
    const auto plan = plans_differing_at_one_state();
    EXPECT_EQ(symmetric_planning_distance(plan, 0, 0), 0.0);
    const double ab = symmetric_planning_distance(plan, 0, 1);
    EXPECT_EQ(ab, symmetric_planning_distance(plan, 1, 0));
    const double oracle = (0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5)) +
                          (0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1));
    EXPECT_NEAR(ab, oracle, 1e-14);
}

TEST(PlanningDistance, MatrixIsSymmetricWithZeroDiagonal) {
    const auto p = make_problem(metaplan::testing::open_grid(3, 3));
    MetaPlanConfig c;
    std::mt19937_64 rng(2);
    auto field = TemperatureField::from_raw(9, 0.0);
    for (double& r : field.raw()) r = std::uniform_real_distribution<double>(-2, 2)(rng);
    const auto plans = plan_all(p.mdp, field, 10, Policy::uniform(9, 4));
    const auto d = planning_distance_matrix(plans);
    for (std::size_t i = 0; i < 9; ++i) {
        EXPECT_EQ(d(i, i), 0.0);
        for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(d(i, j), d(j, i));
    }
}

TEST(Ward, TwoSeparatedTripletsMergeWithinGroupFirst) {
    const auto d = points_on_line({0.0, 0.1, 0.25, 10.0, 10.2, 10.3});
    const auto tree = ward_cluster(d);
    ASSERT_EQ(tree.merges.size(), 5u);
    const auto group = [](std::size_t leaf) { return leaf < 3 ? 0 : 1; };
    for (int i = 0; i < 2; ++i) {
        const auto& m = tree.merges[static_cast<std::size_t>(i)];
        ASSERT_LT(m.a, 6u);
        ASSERT_LT(m.b, 6u);
        EXPECT_EQ(group(m.a), group(m.b));
    }
    const auto labels = cut(tree, 2);
    EXPECT_EQ(labels, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
}

TEST(Ward, MatchesExhaustiveLinkageOnSmallInput) {
    // Independent naive implementation: recompute Ward dissimilarities from the
    // Lance-Williams recurrence by brute force over the current partition.
    const auto d = points_on_line({0.0, 1.0, 3.0, 7.0, 7.5});
    std::vector<std::vector<std::size_t>> clusters{{0}, {1}, {2}, {3}, {4}};
    std::vector<std::vector<double>> dist(5, std::vector<double>(5));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) dist[i][j] = d(i, j);
    std::vector<double> heights;
    while (clusters.size() > 1) {
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < clusters.size(); ++i)
            for (std::size_t j = i + 1; j < clusters.size(); ++j)
                if (dist[i][j] < dist[bi][bj]) bi = i, bj = j;
        heights.push_back(dist[bi][bj]);
        const double ni = static_cast<double>(clusters[bi].size());
        const double nj = static_cast<double>(clusters[bj].size());
        std::vector<double> row(clusters.size());
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            const double nk = static_cast<double>(clusters[k].size());
            row[k] = ((ni + nk) * dist[bi][k] + (nj + nk) * dist[bj][k] - nk * dist[bi][bj]) / (ni + nj + nk);
        }
        for (std::size_t k = 0; k < clusters.size(); ++k) dist[bi][k] = dist[k][bi] = row[k];
        dist[bi][bi] = 0.0;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
        dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
        for (auto& r : dist) r.erase(r.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    const auto tree = ward_cluster(d);
    ASSERT_EQ(tree.merges.size(), heights.size());
    for (std::size_t i = 0; i < heights.size(); ++i) EXPECT_NEAR(tree.merges[i].height, heights[i], 1e-12);
    EXPECT_EQ(tree.merges.back().size, 5u);
}

TEST(Ward, HeightsNondecreasing) {
    std::mt19937_64 rng(4);
    std::vector<double> xs(30);
    for (double& x : xs) x = std::uniform_real_distribution<double>(0, 50)(rng);
    const auto tree = ward_cluster(points_on_line(xs));
    for (std::size_t i = 1; i < tree.merges.size(); ++i) EXPECT_GE(tree.merges[i].height, tree.merges[i - 1].height);
}

TEST(Ward, RejectsInvalidMatrices) {
    DistanceMatrix d(2);
    d(0, 1) = 1.0;
    EXPECT_THROW(ward_cluster(d), ModelError);  // not symmetric
    d(1, 0) = 1.0;
    d(0, 0) = 0.5;
    EXPECT_THROW(ward_cluster(d), ModelError);  // diagonal
    d(0, 0) = 0.0;
    d(0, 1) = d(1, 0) = -1.0;
    EXPECT_THROW(ward_cluster(d), ModelError);  // negative
    EXPECT_THROW(ward_cluster(DistanceMatrix{}), ModelError);
}

TEST(Cut, SingletonsAtKEqualsNAndNestedPartitions) {
    std::mt19937_64 rng(9);
    std::vector<double> xs(12);
    for (double& x : xs) x = std::uniform_real_distribution<double>(0, 10)(rng);
    const auto tree = ward_cluster(points_on_line(xs));
    const auto singletons = cut(tree, 12);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(singletons[i], i);
    for (std::size_t k = 2; k <= 12; ++k) {
        const auto fine = cut(tree, k);
        const auto coarse = cut(tree, k - 1);
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t j = 0; j < 12; ++j)
                if (fine[i] == fine[j]) EXPECT_EQ(coarse[i], coarse[j]);
    }
    EXPECT_THROW(cut(tree, 0), ModelError);
    EXPECT_THROW(cut(tree, 13), ModelError);
}

TEST(Ols, PerfectLineAndConstantResponse) {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    const auto fit = ols_fit(x, y);
    EXPECT_NEAR(fit.slope, 2.0, 1e-14);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-14);
    const auto flat = ols_fit(x, std::vector<double>(5, 3.0));
    EXPECT_EQ(flat.slope, 0.0);
    EXPECT_EQ(flat.r_squared, 0.0);
}

TEST(Ols, AgreesWithNormalEquations) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> noise(0, 1);
    std::vector<double> x(100), y(100);
    for (std::size_t i = 0; i < 100; ++i) {
        x[i] = std::uniform_real_distribution<double>(-5, 5)(rng);
        y[i] = 0.7 * x[i] - 2 + noise(rng);
    }
    // Normal equations [n, sx; sx, sxx] [b; a] = [sy; sxy] solved by Cramer's rule.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double det = 100 * sxx - sx * sx;
    const double slope = (100 * sxy - sx * sy) / det;
    const double intercept = (sxx * sy - sx * sxy) / det;
    const double r = (100 * sxy - sx * sy) / std::sqrt(det * (100 * syy - sy * sy));
    const auto fit = ols_fit(x, y);
    EXPECT_NEAR(fit.slope, slope, 1e-10);
    EXPECT_NEAR(fit.intercept, intercept, 1e-10);
    EXPECT_NEAR(fit.r_squared, r * r, 1e-10);
}

TEST(Ols, RejectsDegenerateInput) {
    EXPECT_THROW(ols_fit(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), ModelError);
    EXPECT_THROW(ols_fit(std::vector<double>{1}, std::vector<double>{1}), ModelError);
    EXPECT_THROW(ols_fit(std::vector<double>{1, 2}, std::vector<double>{1}), ModelError);
}
