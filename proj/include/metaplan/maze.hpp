#pragma once
// Grid mazes: text format, dihedral symmetries and conversion to TabularMdp.

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metaplan/mdp.hpp"

namespace metaplan {

struct Cell {
    int row = 0;
    int col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

/// Four moves, in action-id order.
enum class Move : ActionId { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr std::size_t kMoveCount = 4;
inline constexpr std::array<std::array<int, 2>, kMoveCount> kMoveDelta{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

struct GridMaze {
    int width = 0;
    int height = 0;
    std::vector<bool> walls;  // row-major
    Cell start;
    Cell goal;
    std::string comment;  // optional first-line `//` comment, without the prefix

    bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
    bool is_wall(Cell c) const { return walls[static_cast<std::size_t>(c.row * width + c.col)]; }
    bool is_open(Cell c) const { return in_bounds(c) && !is_wall(c); }
    std::size_t wall_count() const {
        std::size_t n = 0;
        for (bool w : walls) n += w;
        return n;
    }

    friend bool operator==(const GridMaze&, const GridMaze&) = default;
};

enum class MazeErrorKind {
    Empty,
    MalformedCharacter,
    RaggedRows,
    MissingStart,
    DuplicateStart,
    MissingGoal,
    DuplicateGoal,
    UnreachableGoal,
    InvalidDimensions,
    NotSquare,
};

inline const char* to_string(MazeErrorKind k) {
    switch (k) {
        case MazeErrorKind::Empty: return "empty maze";
        case MazeErrorKind::MalformedCharacter: return "malformed character";
        case MazeErrorKind::RaggedRows: return "ragged rows";
        case MazeErrorKind::MissingStart: return "missing start";
        case MazeErrorKind::DuplicateStart: return "duplicate start";
        case MazeErrorKind::MissingGoal: return "missing goal";
        case MazeErrorKind::DuplicateGoal: return "duplicate goal";
        case MazeErrorKind::UnreachableGoal: return "unreachable goal";
        case MazeErrorKind::InvalidDimensions: return "invalid dimensions";
        case MazeErrorKind::NotSquare: return "maze is not square";
    }
    return "maze error";
}

class MazeError : public ModelError {
public:
    MazeError(MazeErrorKind kind, const std::string& detail)
        : ModelError(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)), kind_(kind) {}
    MazeErrorKind kind() const noexcept { return kind_; }

private:
    MazeErrorKind kind_;
};

/// 4-connected BFS distances over open cells (-1 when unreachable), row-major.
inline std::vector<int> bfs_distances(const GridMaze& maze, Cell from) {
    std::vector<int> dist(static_cast<std::size_t>(maze.width * maze.height), -1);
    if (!maze.is_open(from)) return dist;
    std::deque<Cell> frontier{from};
    dist[static_cast<std::size_t>(from.row * maze.width + from.col)] = 0;
    while (!frontier.empty()) {
        const Cell c = frontier.front();
        frontier.pop_front();
        const int d = dist[static_cast<std::size_t>(c.row * maze.width + c.col)];
        for (const auto& [dr, dc] : kMoveDelta) {
            const Cell n{c.row + dr, c.col + dc};
            if (!maze.is_open(n)) continue;
            auto& slot = dist[static_cast<std::size_t>(n.row * maze.width + n.col)];
            if (slot >= 0) continue;
            slot = d + 1;
            frontier.push_back(n);
        }
    }
    return dist;
}

inline bool goal_reachable(const GridMaze& maze) {
    const auto dist = bfs_distances(maze, maze.start);
    return dist[static_cast<std::size_t>(maze.goal.row * maze.width + maze.goal.col)] >= 0;
}

/// Throws MazeError unless start/goal are open and the goal is reachable.
inline void validate(const GridMaze& maze) {
    if (maze.width <= 0 || maze.height <= 0 ||
        maze.walls.size() != static_cast<std::size_t>(maze.width * maze.height))
        throw MazeError(MazeErrorKind::InvalidDimensions, "");
    if (!maze.is_open(maze.start)) throw MazeError(MazeErrorKind::MissingStart, "start is not an open cell");
    if (!maze.is_open(maze.goal)) throw MazeError(MazeErrorKind::MissingGoal, "goal is not an open cell");
    if (!goal_reachable(maze)) throw MazeError(MazeErrorKind::UnreachableGoal, "");
}

/**
 * Parses the text maze format: one row per line, `#` wall, `.` open,
 * `S` start, `G` goal, LF line endings, optional leading `//` comment line.
 */
inline GridMaze parse_maze(std::string_view text) {
    GridMaze maze;
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto end = text.find('\n', pos);
        const auto stop = end == std::string_view::npos ? text.size() : end;
        lines.push_back(text.substr(pos, stop - pos));
        pos = stop + 1;
    }
    if (!lines.empty() && lines.front().starts_with("//")) {
        maze.comment = std::string(lines.front().substr(2));
        lines.erase(lines.begin());
    }
    if (lines.empty() || lines.front().empty()) throw MazeError(MazeErrorKind::Empty, "");

    maze.height = static_cast<int>(lines.size());
    maze.width = static_cast<int>(lines.front().size());
    maze.walls.reserve(static_cast<std::size_t>(maze.width * maze.height));
    bool have_start = false;
    bool have_goal = false;
    for (int r = 0; r < maze.height; ++r) {
        const auto line = lines[static_cast<std::size_t>(r)];
        if (static_cast<int>(line.size()) != maze.width)
            throw MazeError(MazeErrorKind::RaggedRows, "row " + std::to_string(r) + " has length " +
                                                           std::to_string(line.size()) + ", expected " +
                                                           std::to_string(maze.width));
        for (int c = 0; c < maze.width; ++c) {
            const char ch = line[static_cast<std::size_t>(c)];
            switch (ch) {
                case '#': maze.walls.push_back(true); break;
                case '.': maze.walls.push_back(false); break;
                case 'S':
                    if (have_start) throw MazeError(MazeErrorKind::DuplicateStart, "row " + std::to_string(r));
                    have_start = true;
                    maze.start = {r, c};
                    maze.walls.push_back(false);
                    break;
                case 'G':
                    if (have_goal) throw MazeError(MazeErrorKind::DuplicateGoal, "row " + std::to_string(r));
                    have_goal = true;
                    maze.goal = {r, c};
                    maze.walls.push_back(false);
                    break;
                default: {
                    std::ostringstream msg;
                    msg << "byte 0x" << std::hex << static_cast<int>(static_cast<unsigned char>(ch)) << std::dec
                        << " at row " << r << ", column " << c;
                    throw MazeError(MazeErrorKind::MalformedCharacter, msg.str());
                }
            }
        }
    }
    if (!have_start) throw MazeError(MazeErrorKind::MissingStart, "");
    if (!have_goal) throw MazeError(MazeErrorKind::MissingGoal, "");
    if (!goal_reachable(maze)) throw MazeError(MazeErrorKind::UnreachableGoal, "");
    return maze;
}

inline std::string serialize_maze(const GridMaze& maze) {
    std::string out;
    out.reserve(static_cast<std::size_t>((maze.width + 1) * maze.height) + maze.comment.size() + 3);
    if (!maze.comment.empty()) {
        out += "//";
        out += maze.comment;
        out += '\n';
    }
    for (int r = 0; r < maze.height; ++r) {
        for (int c = 0; c < maze.width; ++c) {
            const Cell cell{r, c};
            if (cell == maze.start)
                out += 'S';
            else if (cell == maze.goal)
                out += 'G';
            else
                out += maze.is_wall(cell) ? '#' : '.';
        }
        out += '\n';
    }
    return out;
}

/// The eight symmetries of a square.
enum class Symmetry {
    Identity,
    Rotate90,  // clockwise
    Rotate180,
    Rotate270,
    FlipHorizontal,  // mirror left-right
    FlipVertical,    // mirror top-bottom
    Transpose,       // main diagonal
    AntiTranspose,   // anti-diagonal
};

inline constexpr std::array<Symmetry, 8> kAllSymmetries{
    Symmetry::Identity,       Symmetry::Rotate90,     Symmetry::Rotate180, Symmetry::Rotate270,
    Symmetry::FlipHorizontal, Symmetry::FlipVertical, Symmetry::Transpose, Symmetry::AntiTranspose};

inline const char* to_string(Symmetry s) {
    switch (s) {
        case Symmetry::Identity: return "identity";
        case Symmetry::Rotate90: return "rot90";
        case Symmetry::Rotate180: return "rot180";
        case Symmetry::Rotate270: return "rot270";
        case Symmetry::FlipHorizontal: return "flip_h";
        case Symmetry::FlipVertical: return "flip_v";
        case Symmetry::Transpose: return "transpose";
        case Symmetry::AntiTranspose: return "anti_transpose";
    }
    return "?";
}

/// Image of a cell of an n x n grid.
inline Cell map_cell(Cell c, Symmetry sym, int n) {
    const int m = n - 1;
    switch (sym) {
        case Symmetry::Identity: return c;
        case Symmetry::Rotate90: return {c.col, m - c.row};
        case Symmetry::Rotate180: return {m - c.row, m - c.col};
        case Symmetry::Rotate270: return {m - c.col, c.row};
        case Symmetry::FlipHorizontal: return {c.row, m - c.col};
        case Symmetry::FlipVertical: return {m - c.row, c.col};
        case Symmetry::Transpose: return {c.col, c.row};
        case Symmetry::AntiTranspose: return {m - c.col, m - c.row};
    }
    return c;
}

inline Symmetry inverse(Symmetry sym) {
    switch (sym) {
        case Symmetry::Rotate90: return Symmetry::Rotate270;
        case Symmetry::Rotate270: return Symmetry::Rotate90;
        default: return sym;  // the rest are involutions
    }
}

inline GridMaze apply_symmetry(const GridMaze& maze, Symmetry sym) {
    if (maze.width != maze.height)
        throw MazeError(MazeErrorKind::NotSquare,
                        std::to_string(maze.width) + "x" + std::to_string(maze.height));
    const int n = maze.width;
    GridMaze out = maze;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const Cell img = map_cell({r, c}, sym, n);
            out.walls[static_cast<std::size_t>(img.row * n + img.col)] = maze.is_wall({r, c});
        }
    out.start = map_cell(maze.start, sym, n);
    out.goal = map_cell(maze.goal, sym, n);
    return out;
}

/// Row-major numbering of open cells.
class MazeIndex {
public:
    MazeIndex() = default;
    explicit MazeIndex(const GridMaze& maze) : width_(maze.width), cell_to_state_(maze.walls.size(), kNone) {
        for (int r = 0; r < maze.height; ++r)
            for (int c = 0; c < maze.width; ++c)
                if (!maze.is_wall({r, c})) {
                    cell_to_state_[static_cast<std::size_t>(r * maze.width + c)] = state_to_cell_.size();
                    state_to_cell_.push_back({r, c});
                }
    }

    std::size_t size() const noexcept { return state_to_cell_.size(); }
    Cell cell(StateId s) const { return state_to_cell_.at(s); }
    std::optional<StateId> state(Cell c) const {
        if (c.row < 0 || c.col < 0 || c.col >= width_) return std::nullopt;
        const auto i = static_cast<std::size_t>(c.row * width_ + c.col);
        if (i >= cell_to_state_.size() || cell_to_state_[i] == kNone) return std::nullopt;
        return cell_to_state_[i];
    }
    StateId at(Cell c) const {
        const auto s = state(c);
        if (!s) throw ModelError("cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) + ") is not open");
        return *s;
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    int width_ = 0;
    std::vector<std::size_t> cell_to_state_;
    std::vector<Cell> state_to_cell_;
};

struct RewardSpec {
    double step_reward = -0.1;
    double goal_reward = 100.0;
    double discount = 0.99;
};

/**
 * Deterministic 4-action MDP over the open cells of `maze`. Every action
 * pays `step_reward`; moving into a wall or off the grid leaves the state
 * unchanged; entering the goal also pays `goal_reward`. The goal is terminal.
 */
inline TabularMdp maze_to_mdp(const GridMaze& maze, const RewardSpec& spec = {}) {
    if (!(spec.discount >= 0.0 && spec.discount < 1.0)) throw ModelError("discount must lie in [0, 1)");
    validate(maze);
    const MazeIndex index(maze);
    const auto n = index.size();
    std::vector<bool> terminal(n, false);
    terminal[index.at(maze.goal)] = true;
    std::vector<std::vector<Transition>> rows(n * kMoveCount);
    for (StateId s = 0; s < n; ++s) {
        const Cell c = index.cell(s);
        for (ActionId a = 0; a < kMoveCount; ++a) {
            const Cell target{c.row + kMoveDelta[a][0], c.col + kMoveDelta[a][1]};
            const StateId next = maze.is_open(target) ? index.at(target) : s;
            const double reward = spec.step_reward + (index.cell(next) == maze.goal && next != s ? spec.goal_reward : 0.0);
            rows[s * kMoveCount + a] = {{next, 1.0, reward}};
        }
    }
    return TabularMdp(n, kMoveCount, spec.discount, std::move(terminal), std::move(rows));
}

inline TabularMdp maze_to_mdp(const GridMaze& maze, double step_reward, double goal_reward, double discount) {
    return maze_to_mdp(maze, RewardSpec{step_reward, goal_reward, discount});
}

/// A maze together with its MDP and the state numbering.
struct MazeProblem {
    GridMaze maze;
    MazeIndex index;
    TabularMdp mdp;

    StateId start() const { return index.at(maze.start); }
    StateId goal() const { return index.at(maze.goal); }
};

inline MazeProblem make_problem(GridMaze maze, const RewardSpec& spec = {}) {
    auto mdp = maze_to_mdp(maze, spec);
    MazeIndex index(maze);
    return {std::move(maze), std::move(index), std::move(mdp)};
}

/// The 11x11 Four Rooms layout; start lower-left, goal upper-right.
inline GridMaze four_rooms_maze() {
    static constexpr std::string_view kLayout =
        "// four rooms\n"
        ".....#....G\n"
        ".....#.....\n"
        "...........\n"
        ".....#.....\n"
        ".....#.....\n"
        "#.####.....\n"
        ".....###.##\n"
        ".....#.....\n"
        ".....#.....\n"
        "...........\n"
        "S....#.....\n";
    return parse_maze(kLayout);
}

inline MazeProblem build_four_rooms(const RewardSpec& spec = {}) { return make_problem(four_rooms_maze(), spec); }

/// Number of moves on a greedy optimal path from start to goal.
inline std::size_t optimal_plan_length(const GridMaze& maze, double tolerance = 1e-9) {
    const auto problem = make_problem(maze);
    const auto vi = value_iteration(problem.mdp, tolerance);
    return greedy_path(problem.mdp, vi.q, problem.start(), 0).length();
}

}  // namespace metaplan
