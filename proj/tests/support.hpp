#pragma once
// Small builders shared by the test binaries.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "metaplan/maze.hpp"
#include "metaplan/mdp.hpp"

namespace metaplan::testing {

struct RandomMdpSpec {
    std::size_t n_states = 5;
    std::size_t n_actions = 3;
    double discount = 0.9;
    std::size_t max_successors = 3;
    bool with_terminal = true;  // last state terminal
};

/// Dense-ish random MDP with rewards in [-1, 1].
inline TabularMdp random_mdp(std::uint64_t seed, const RandomMdpSpec& spec) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<bool> terminal(spec.n_states, false);
    if (spec.with_terminal && spec.n_states > 1) terminal.back() = true;
    std::vector<std::vector<Transition>> rows(spec.n_states * spec.n_actions);
    for (auto& row : rows) {
        const auto k = std::uniform_int_distribution<std::size_t>(1, std::min(spec.max_successors, spec.n_states))(rng);
        std::vector<StateId> all(spec.n_states);
        for (StateId s = 0; s < spec.n_states; ++s) all[s] = s;
        std::shuffle(all.begin(), all.end(), rng);
        double total = 0.0;
        std::vector<double> w(k);
        for (auto& x : w) total += (x = 0.1 + unit(rng));
        double used = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double p = i + 1 == k ? 1.0 - used : w[i] / total;
            used += p;
            row.push_back({all[i], p, 2.0 * unit(rng) - 1.0});
        }
    }
    return TabularMdp(spec.n_states, spec.n_actions, spec.discount, terminal, std::move(rows));
}

/// Maze from row strings joined with newlines.
inline GridMaze maze_from_rows(const std::vector<std::string>& rows) {
    std::string text;
    for (const auto& r : rows) text += r + "\n";
    return parse_maze(text);
}

/// Open w x h grid, start bottom-right, goal top-left.
inline GridMaze open_grid(int w, int h) {
    std::vector<std::string> rows(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '.'));
    rows.front().front() = 'G';
    rows.back().back() = 'S';
    return maze_from_rows(rows);
}

}  // namespace metaplan::testing
