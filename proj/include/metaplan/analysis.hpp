#pragma once
// Planning-similarity analyses: symmetric planning distance, Ward clustering
// and a least-squares helper for external reaction-time tables.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "metaplan/meta_planner.hpp"
#include "metaplan/partial_plan.hpp"

namespace metaplan {

/// Dense symmetric matrix.
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t size) : n(size), values(size * size, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Sum over simulated states of the two-way KL between the plans from sa and sb.
inline double symmetric_planning_distance(const PartialPlan& plans, StateId sa, StateId sb) {
    const auto& a = plans[sa].policy;
    const auto& b = plans[sb].policy;
    double d = 0.0;
    for (StateId s = 0; s < a.n_states; ++s) d += kl_divergence(a.row(s), b.row(s)) + kl_divergence(b.row(s), a.row(s));
    return d;
}

inline double symmetric_planning_distance(const MetaPlanResult& result, StateId sa, StateId sb) {
    return symmetric_planning_distance(result.plans, sa, sb);
}

inline DistanceMatrix planning_distance_matrix(const PartialPlan& plans) {
    DistanceMatrix d(plans.size());
    for (std::size_t i = 0; i < d.n; ++i)
        for (std::size_t j = i + 1; j < d.n; ++j) d(i, j) = d(j, i) = symmetric_planning_distance(plans, i, j);
    return d;
}

/**
 * Agglomerative merge list. Leaves are 0..n-1; the cluster created by merge
 * i gets id n + i.
 */
struct Dendrogram {
    struct Merge {
        std::size_t a;
        std::size_t b;
        double height;
        std::size_t size;
    };
    std::size_t n_leaves = 0;
    std::vector<Merge> merges;
};

/**
 * Ward linkage through Lance-Williams updates applied directly to the given
 * dissimilarities. Ties go to the pair with the smallest cluster ids.
 */
inline Dendrogram ward_cluster(const DistanceMatrix& input) {
    const auto n = input.n;
    if (n == 0) throw ModelError("empty distance matrix");
    const double scale = input.values.empty() ? 0.0 : *std::max_element(input.values.begin(), input.values.end());
    for (std::size_t i = 0; i < n; ++i) {
        if (input(i, i) != 0.0) throw ModelError("distance matrix diagonal must be zero");
        for (std::size_t j = 0; j < n; ++j) {
            if (!(input(i, j) >= 0.0) || !std::isfinite(input(i, j)))
                throw ModelError("distance matrix entries must be finite and nonnegative");
            if (std::abs(input(i, j) - input(j, i)) > 1e-12 * std::max(1.0, scale))
                throw ModelError("distance matrix is not symmetric");
        }
    }

    DistanceMatrix d = input;
    std::vector<std::size_t> id(n), size(n, 1);
    std::iota(id.begin(), id.end(), 0);
    std::vector<bool> active(n, true);
    Dendrogram out;
    out.n_leaves = n;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = n, bj = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = d(i, j);
                const auto lo = std::min(id[i], id[j]);
                const auto hi = std::max(id[i], id[j]);
                if (v < best || (v == best && std::pair(lo, hi) < std::pair(std::min(id[bi], id[bj]), std::max(id[bi], id[bj])))) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        const double ni = static_cast<double>(size[bi]);
        const double nj = static_cast<double>(size[bj]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double nk = static_cast<double>(size[k]);
            const double total = ni + nj + nk;
            const double v = ((ni + nk) * d(bi, k) + (nj + nk) * d(bj, k) - nk * best) / total;
            d(bi, k) = d(k, bi) = v;
        }
        out.merges.push_back({std::min(id[bi], id[bj]), std::max(id[bi], id[bj]), best, size[bi] + size[bj]});
        size[bi] += size[bj];
        id[bi] = n + step;
        active[bj] = false;
    }
    return out;
}

/**
 * Partition after the first n - k merges. Labels are 0..k-1, numbered by
 * first appearance in leaf order.
 */
inline std::vector<std::size_t> cut(const Dendrogram& tree, std::size_t k) {
    const auto n = tree.n_leaves;
    if (k == 0 || k > n) throw ModelError("cluster count must lie in [1, n]");
    std::vector<std::size_t> parent(2 * n);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n - k; ++i) {
        const auto& m = tree.merges[i];
        parent[find(m.a)] = n + i;
        parent[find(m.b)] = n + i;
    }
    std::vector<std::size_t> labels(n);
    std::vector<std::size_t> root_label(2 * n, n);
    std::size_t next = 0;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        const auto r = find(leaf);
        if (root_label[r] == n) root_label[r] = next++;
        labels[leaf] = root_label[r];
    }
    return labels;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. R^2 is 0 when y is constant.
inline LinearFit ols_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ModelError("x and y must have equal length");
    if (x.size() < 2) throw ModelError("least squares needs at least two points");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw ModelError("x is constant; slope is undetermined");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (fit.slope * x[i] + fit.intercept);
            ss_res += r * r;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

}  // namespace metaplan
