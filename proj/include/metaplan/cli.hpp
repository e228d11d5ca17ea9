#pragma once
// Command-line front end. Exit codes: 0 success, 1 usage error, 2 bad input data.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metaplan/analysis.hpp"
#include "metaplan/baselines.hpp"
#include "metaplan/io.hpp"
#include "metaplan/maze.hpp"
#include "metaplan/meta_planner.hpp"
#include "metaplan/probes.hpp"
#include "metaplan/stimuli.hpp"

namespace metaplan::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kInput = 2 };

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct MetaFlags {
    double lambda = 0.01;
    std::size_t horizon = 100;
    std::size_t iters = 200;
    std::uint64_t seed = 0;
    double step_size = AdamConfig{}.step_size;

    MetaPlanConfig config() const {
        MetaPlanConfig c;
        c.lambda = lambda;
        c.horizon = horizon;
        c.outer_iterations = iters;
        c.seed = seed;
        c.adam.step_size = step_size;
        return c;
    }
};

inline void add_meta_flags(CLI::App* app, MetaFlags& f, bool with_lambda = true) {
    if (with_lambda) app->add_option("--lambda", f.lambda, "planning-cost weight")->check(CLI::NonNegativeNumber);
    app->add_option("--horizon", f.horizon, "soft-Bellman backups per plan")->check(CLI::PositiveNumber);
    app->add_option("--iters", f.iters, "outer optimization steps")->check(CLI::PositiveNumber);
    app->add_option("--seed", f.seed, "random seed");
    app->add_option("--step-size", f.step_size, "Adam step size")->check(CLI::PositiveNumber);
}

struct MazeSource {
    std::string file;
    bool four_rooms = false;
};

inline void add_maze_source(CLI::App* app, MazeSource& src) {
    auto* file = app->add_option("--maze", src.file, "maze file");
    auto* fr = app->add_flag("--four-rooms", src.four_rooms, "use the built-in Four Rooms maze");
    file->excludes(fr);
    fr->excludes(file);
}

inline GridMaze load_maze(const fs::path& path) {
    if (!fs::exists(path)) throw InputError("maze file not found: " + path.string());
    try {
        return parse_maze(io::read_file(path));
    } catch (const MazeError& e) {
        throw InputError(path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw InputError(e.what());
    }
}

inline std::pair<GridMaze, std::string> resolve_maze(const MazeSource& src) {
    if (src.four_rooms) return {four_rooms_maze(), "four-rooms"};
    if (src.file.empty()) throw UsageError("one of --maze FILE or --four-rooms is required");
    return {load_maze(src.file), src.file};
}

struct NamedMaze {
    std::string id;
    GridMaze maze;
};

/// Every `*.maze` file in `dir`, ordered by file name; ids are file stems.
inline std::vector<NamedMaze> load_maze_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("maze directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".maze") files.push_back(entry.path());
    if (files.empty()) throw InputError("no .maze files in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<NamedMaze> out;
    for (const auto& f : files) out.push_back({f.stem().string(), load_maze(f)});
    return out;
}

/// "start", "goal", "lower-left" (bottom-left open corner) or "ROW,COL".
inline Cell parse_cell(const std::string& spec, const GridMaze& maze) {
    if (spec == "start") return maze.start;
    if (spec == "goal") return maze.goal;
    if (spec == "lower-left") return {maze.height - 1, 0};
    const auto comma = spec.find(',');
    if (comma == std::string::npos) throw UsageError("cannot parse cell '" + spec + "'");
    try {
        std::size_t used = 0;
        const int r = std::stoi(spec.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument(spec);
        const auto tail = spec.substr(comma + 1);
        const int c = std::stoi(tail, &used);
        if (used != tail.size()) throw std::invalid_argument(spec);
        return {r, c};
    } catch (const std::logic_error&) {
        throw UsageError("cannot parse cell '" + spec + "'");
    }
}

inline StateId open_state(const MazeProblem& problem, const std::string& spec) {
    const Cell c = parse_cell(spec, problem.maze);
    const auto s = problem.index.state(c);
    if (!s || c.row >= problem.maze.height) throw UsageError("cell '" + spec + "' is not an open maze cell");
    return *s;
}

inline std::string metadata(const std::string& command, std::uint64_t seed, const std::string& hash,
                            const std::string& extra = "") {
    std::string m = "metaplan " + command + " seed=" + std::to_string(seed) + " config_hash=" + hash;
    if (!extra.empty()) m += " " + extra;
    return m;
}

inline void write(const fs::path& path, const std::string& contents, std::ostream& out) {
    io::write_atomic(path, contents);
    out << "wrote " << path.string() << '\n';
}

// ---- subcommands ----

struct SolveArgs {
    MazeSource source;
    MetaFlags meta;
    std::string out_dir;
    std::string ground = "start";
    double display_threshold = 0.005;
};

inline void run_solve(const SolveArgs& a, std::ostream& out) {
    auto [maze, source] = resolve_maze(a.source);
    const auto problem = make_problem(std::move(maze));
    const auto ground = open_state(problem, a.ground);
    const auto config = a.meta.config();
    const auto result = optimize(problem.mdp, config);
    const auto hash = io::config_hash(config);
    const fs::path dir = a.out_dir;

    auto summary = io::run_summary(result, source);
    summary["ground_state"] = ground;
    summary["ground_cost_nats"] = result.costs[ground];
    summary["ground_value"] = result.values[ground];
    write(dir / "run.json", summary.dump(2) + "\n", out);

    io::CsvTable kl(metadata("solve", config.seed, hash),
                    {"ground_state", "ground_row", "ground_col", "simulated_state", "row", "col", "kl_nats"});
    for (StateId g = 0; g < result.plans.size(); ++g) {
        const Cell gc = problem.index.cell(g);
        const auto& slice = result.plans[g];
        for (StateId s = 0; s < slice.kl_per_state.size(); ++s) {
            const Cell sc = problem.index.cell(s);
            kl.row() << g << gc.row << gc.col << s << sc.row << sc.col << slice.kl_per_state[s];
        }
    }
    write(dir / "kl.csv", kl.str(), out);

    io::CsvTable costs(metadata("solve", config.seed, hash), {"state", "row", "col", "cost_nats", "value"});
    for (StateId s = 0; s < result.costs.size(); ++s) {
        const Cell c = problem.index.cell(s);
        costs.row() << s << c.row << c.col << result.costs[s] << result.values[s];
    }
    write(dir / "costs.csv", costs.str(), out);

    io::HeatmapStyle style;
    style.threshold = a.display_threshold;
    write(dir / "heatmap.svg", io::kl_heatmap_svg(problem, result.plans[ground], style), out);
}

struct ParetoArgs {
    MazeSource source;
    MetaFlags meta;
    std::vector<double> lambdas;
    std::string probe = "lower-left";
    std::string out_dir;
    bool independent = false;
};

inline void run_pareto(const ParetoArgs& a, std::ostream& out) {
    if (std::set<double>(a.lambdas.begin(), a.lambdas.end()).size() < 2)
        throw UsageError("--lambdas needs at least two distinct values");
    for (double l : a.lambdas)
        if (!(l >= 0.0) || !std::isfinite(l)) throw UsageError("lambda values must be finite and nonnegative");
    auto [maze, source] = resolve_maze(a.source);
    const auto problem = make_problem(std::move(maze));
    const auto probe = open_state(problem, a.probe);
    const auto config = a.meta.config();
    const auto start = a.independent ? SweepStart::Independent : SweepStart::Continuation;
    const auto frontier = pareto_sweep(problem.mdp, a.lambdas, probe, config, start);
    io::CsvTable csv(metadata("pareto", config.seed, io::config_hash(config),
                              "probe_state=" + std::to_string(probe) +
                                  (a.independent ? " start=independent" : " start=continuation")),
                     {"lambda", "planning_cost_nats", "expected_value"});
    for (const auto& p : frontier) csv.row() << p.lambda << p.planning_cost << p.expected_value;
    write(fs::path(a.out_dir) / "frontier.csv", csv.str(), out);
}

struct Exp1Args {
    std::string mazes;
    std::string out;
    MetaFlags meta;
};

inline void run_exp1(const Exp1Args& a, std::ostream& out) {
    const auto mazes = load_maze_dir(a.mazes);
    PredictorOptions opt;
    opt.meta = a.meta.config();
    opt.seed = a.meta.seed;
    io::CsvTable csv(metadata("predictors exp1", opt.seed, io::config_hash(opt.meta)),
                     {"maze_id", "partial_plan_cost", "astar_expanded", "astar_inserted", "optimal_plan_length",
                      "itbr_cost", "softmax_entropy", "soft_bellman_entropy", "vi_iterations", "trajectory_turns"});
    for (const auto& m : mazes) {
        const auto r = exp1_predictors(m.id, m.maze, opt);
        csv.row() << r.maze_id << r.partial_plan_cost << r.astar_expanded << r.astar_inserted << r.optimal_plan_length
                  << r.itbr_cost << r.softmax_entropy << r.soft_bellman_entropy << r.vi_iterations
                  << r.trajectory_turns;
    }
    write(a.out, csv.str(), out);
}

struct Exp2Args {
    std::string base_mazes;
    std::size_t events_per_maze = 10;
    std::string out;
    std::string rounds_out;
    double epsilon = 1e-6;
    MetaFlags meta;
};

inline void run_exp2(const Exp2Args& a, std::ostream& out) {
    auto named = load_maze_dir(a.base_mazes);
    std::vector<GridMaze> bases;
    for (auto& m : named) {
        if (m.maze.width != m.maze.height) throw InputError("base maze " + m.id + " is not square");
        m.maze.comment = m.id;
        bases.push_back(std::move(m.maze));
    }
    const auto expanded = expand_symmetries(bases);
    const auto config = a.meta.config();
    const auto records = exp2_predictors(expanded, a.events_per_maze, a.meta.seed, config, a.epsilon);
    char eps[32];
    std::snprintf(eps, sizeof eps, "epsilon=%.17g", a.epsilon);
    io::CsvTable csv(metadata("predictors exp2", a.meta.seed, io::config_hash(config), eps),
                     {"maze_id", "pre_row", "pre_col", "post_row", "post_col", "step_index", "path_seed",
                      "partial_plan_divergence", "astar_destination_nodes", "astar_node_difference",
                      "optimal_path_length_post", "teleport_distance"});
    for (const auto& r : records) {
        const auto& e = r.event;
        csv.row() << e.maze_id << e.pre_state.row << e.pre_state.col << e.post_state.row << e.post_state.col
                  << e.step_index << e.seed << r.partial_plan_divergence << r.astar_destination_nodes
                  << r.astar_node_difference << r.optimal_path_length_post << r.teleport_distance;
    }
    write(a.out, csv.str(), out);

    if (!a.rounds_out.empty()) {
        io::CsvTable rounds(metadata("predictors exp2", a.meta.seed, io::config_hash(config)),
                            {"round", "maze_id", "condition"});
        const auto schedule = schedule_rounds(expanded, a.meta.seed);
        for (std::size_t i = 0; i < schedule.size(); ++i)
            rounds.row() << i << schedule[i].maze_id << to_string(schedule[i].condition);
        write(a.rounds_out, rounds.str(), out);
    }
}

struct GenArgs {
    int width = 9;
    int height = 9;
    std::size_t count = 2000;
    std::uint64_t seed = 0;
    double density_min = 0.1;
    double density_max = 0.4;
    std::string out_dir;
};

inline void run_gen(const GenArgs& a, std::ostream& out) {
    const auto mazes = generate_mazes(a.width, a.height, a.count, a.seed, {a.density_min, a.density_max});
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    char extra[96];
    std::snprintf(extra, sizeof extra, "width=%d height=%d density=[%.17g,%.17g]", a.width, a.height, a.density_min,
                  a.density_max);
    io::CsvTable index(metadata("gen-mazes", a.seed, io::hex64(io::fnv1a(extra)), extra),
                       {"maze_id", "file", "open_cells", "shortest_path_steps"});
    for (const auto& m : mazes) {
        const std::string file = m.comment + ".maze";
        io::write_atomic(dir / file, serialize_maze(m));
        const auto dist = bfs_distances(m, m.start);
        index.row() << m.comment << file << MazeIndex(m).size()
                    << dist[static_cast<std::size_t>(m.goal.row * m.width + m.goal.col)];
    }
    write(dir / "index.csv", index.str(), out);
}

struct SelectArgs {
    std::string mazes;
    std::size_t k = 50;
    std::string out_dir;
    MetaFlags meta;
};

inline void run_select(const SelectArgs& a, std::ostream& out) {
    const auto named = load_maze_dir(a.mazes);
    if (a.k > named.size())
        throw UsageError("--k " + std::to_string(a.k) + " exceeds the " + std::to_string(named.size()) +
                         " mazes available");
    std::vector<GridMaze> mazes;
    for (const auto& m : named) mazes.push_back(m.maze);
    const auto config = a.meta.config();
    const auto sel = select_spanning_costs(mazes, config, a.k, a.meta.seed);
    const fs::path dir = a.out_dir;
    const auto meta = metadata("select-stimuli", a.meta.seed, io::config_hash(config),
                               std::string("with_replacement=") + (sel.selection.with_replacement ? "1" : "0"));

    io::CsvTable batch(meta, {"maze_id", "initial_cost_nats"});
    for (std::size_t i = 0; i < named.size(); ++i) batch.row() << named[i].id << sel.batch_costs[i];
    write(dir / "batch_costs.csv", batch.str(), out);

    io::CsvTable chosen(meta, {"bin", "maze_id", "initial_cost_nats", "with_replacement", "file"});
    for (std::size_t b = 0; b < sel.selection.indices.size(); ++b) {
        const auto i = sel.selection.indices[b];
        char file[32];
        std::snprintf(file, sizeof file, "stimulus-%03zu.maze", b);
        GridMaze m = named[i].maze;
        m.comment = named[i].id;
        io::write_atomic(dir / file, serialize_maze(m));
        chosen.row() << b << named[i].id << sel.batch_costs[i] << (sel.selection.with_replacement ? 1 : 0) << file;
    }
    write(dir / "selection.csv", chosen.str(), out);
}

struct ClusterArgs {
    MazeSource source;
    MetaFlags meta;
    std::size_t k = 3;
    std::string out_dir;
};

inline void run_cluster(const ClusterArgs& a, std::ostream& out) {
    auto [maze, source] = resolve_maze(a.source);
    const auto problem = make_problem(std::move(maze));
    if (a.k > problem.index.size()) throw UsageError("--k exceeds the number of states");
    const auto config = a.meta.config();
    const auto result = optimize(problem.mdp, config);
    const auto tree = ward_cluster(planning_distance_matrix(result.plans));
    const auto labels = cut(tree, a.k);
    const auto meta = metadata("cluster", config.seed, io::config_hash(config), "k=" + std::to_string(a.k));
    const fs::path dir = a.out_dir;

    io::CsvTable merges(meta, {"step", "a", "b", "height", "size"});
    for (std::size_t i = 0; i < tree.merges.size(); ++i) {
        const auto& m = tree.merges[i];
        merges.row() << i << m.a << m.b << m.height << m.size;
    }
    write(dir / "dendrogram.csv", merges.str(), out);

    io::CsvTable clusters(meta, {"state", "row", "col", "cluster"});
    for (StateId s = 0; s < labels.size(); ++s) {
        const Cell c = problem.index.cell(s);
        clusters.row() << s << c.row << c.col << labels[s];
    }
    write(dir / "clusters.csv", clusters.str(), out);
}

struct RegressArgs {
    std::string csv;
    std::string x;
    std::string y;
    std::string out;
};

inline double parse_number(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && std::isfinite(v)) return v;
    } catch (const std::logic_error&) {
    }
    throw InputError("non-numeric value '" + text + "' in " + where);
}

inline void run_regress(const RegressArgs& a, std::ostream& out) {
    if (!fs::exists(a.csv)) throw InputError("CSV file not found: " + a.csv);
    const auto rows = io::parse_csv(io::read_file(a.csv));
    if (rows.empty()) throw InputError(a.csv + " has no header row");
    const auto& header = rows.front();
    const auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InputError("column '" + name + "' not found in " + a.csv);
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto xi = column(a.x);
    const auto yi = column(a.y);
    std::vector<double> xs, ys;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw InputError(a.csv + ": row " + std::to_string(r) + " has the wrong number of fields");
        const auto where = a.csv + " row " + std::to_string(r);
        xs.push_back(parse_number(rows[r][xi], where));
        ys.push_back(parse_number(rows[r][yi], where));
    }
    LinearFit fit;
    try {
        fit = ols_fit(xs, ys);
    } catch (const ModelError& e) {
        throw InputError(a.csv + ": " + e.what());
    }
    io::CsvTable csv(metadata("regress", 0, io::hex64(io::fnv1a(a.x + "\n" + a.y)), "x=" + a.x + " y=" + a.y),
                     {"n", "slope", "intercept", "r_squared"});
    csv.row() << xs.size() << fit.slope << fit.intercept << fit.r_squared;
    if (a.out.empty())
        out << csv.str();
    else
        write(a.out, csv.str(), out);
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace detail;
    CLI::App app{"Meta-planning with partial plans on grid mazes", "metaplan"};
    app.require_subcommand(1);

    SolveArgs solve;
    auto* solve_cmd = app.add_subcommand("solve", "optimize partial plans for one maze");
    add_maze_source(solve_cmd, solve.source);
    add_meta_flags(solve_cmd, solve.meta);
    solve_cmd->add_option("--out", solve.out_dir, "output directory")->required();
    solve_cmd->add_option("--ground-state", solve.ground, "heatmap ground state: start, goal, lower-left or ROW,COL");
    solve_cmd->add_option("--display-threshold", solve.display_threshold, "KL below this is left blank")
        ->check(CLI::NonNegativeNumber);

    ParetoArgs pareto;
    auto* pareto_cmd = app.add_subcommand("pareto", "cost/value frontier over a lambda sweep");
    add_maze_source(pareto_cmd, pareto.source);
    add_meta_flags(pareto_cmd, pareto.meta, false);
    pareto_cmd->add_option("--lambdas", pareto.lambdas, "comma-separated lambda values")->delimiter(',')->required();
    pareto_cmd->add_option("--probe-state", pareto.probe, "start, goal, lower-left or ROW,COL");
    pareto_cmd->add_option("--out", pareto.out_dir, "output directory")->required();
    pareto_cmd->add_flag("--independent", pareto.independent, "start every lambda from the seeded initialization");

    auto* pred_cmd = app.add_subcommand("predictors", "model predictor tables");
    pred_cmd->require_subcommand(1);
    Exp1Args exp1;
    auto* exp1_cmd = pred_cmd->add_subcommand("exp1", "per-maze predictors");
    exp1_cmd->add_option("--mazes", exp1.mazes, "directory of .maze files")->required();
    exp1_cmd->add_option("--out", exp1.out, "output CSV")->required();
    add_meta_flags(exp1_cmd, exp1.meta);
    Exp2Args exp2;
    auto* exp2_cmd = pred_cmd->add_subcommand("exp2", "teleportation predictors over symmetry-expanded mazes");
    exp2_cmd->add_option("--base-mazes", exp2.base_mazes, "directory of square .maze files")->required();
    exp2_cmd->add_option("--events-per-maze", exp2.events_per_maze, "teleport events per expanded maze")
        ->check(CLI::PositiveNumber);
    exp2_cmd->add_option("--out", exp2.out, "output CSV")->required();
    exp2_cmd->add_option("--rounds-out", exp2.rounds_out, "optional round schedule CSV");
    exp2_cmd->add_option("--epsilon", exp2.epsilon, "occupancy smoothing weight")->check(CLI::Range(1e-300, 0.5));
    add_meta_flags(exp2_cmd, exp2.meta);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-mazes", "random solvable mazes");
    gen_cmd->add_option("--width", gen.width)->check(CLI::Range(3, 1000));
    gen_cmd->add_option("--height", gen.height)->check(CLI::Range(3, 1000));
    gen_cmd->add_option("--count", gen.count)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--density-min", gen.density_min)->check(CLI::Range(0.0, 0.6));
    gen_cmd->add_option("--density-max", gen.density_max)->check(CLI::Range(0.0, 0.6));
    gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();

    SelectArgs select;
    auto* select_cmd = app.add_subcommand("select-stimuli", "pick mazes spanning the initial planning cost");
    select_cmd->add_option("--mazes", select.mazes, "directory of .maze files")->required();
    select_cmd->add_option("--k", select.k, "number of stimuli")->check(CLI::PositiveNumber);
    select_cmd->add_option("--out", select.out_dir, "output directory")->required();
    add_meta_flags(select_cmd, select.meta);

    ClusterArgs cluster;
    auto* cluster_cmd = app.add_subcommand("cluster", "Ward clustering of states by planning distance");
    add_maze_source(cluster_cmd, cluster.source);
    add_meta_flags(cluster_cmd, cluster.meta);
    cluster_cmd->add_option("--k", cluster.k, "number of clusters")->check(CLI::PositiveNumber);
    cluster_cmd->add_option("--out", cluster.out_dir, "output directory")->required();

    RegressArgs regress;
    auto* regress_cmd = app.add_subcommand("regress", "least-squares fit of one CSV column on another");
    regress_cmd->add_option("--csv", regress.csv, "input CSV")->required();
    regress_cmd->add_option("--x", regress.x, "predictor column")->required();
    regress_cmd->add_option("--y", regress.y, "response column")->required();
    regress_cmd->add_option("--out", regress.out, "output CSV (default: standard output)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        app.exit(e, err, err);
        return kUsage;
    }

    try {
        if (*solve_cmd) run_solve(solve, out);
        else if (*pareto_cmd) run_pareto(pareto, out);
        else if (*exp1_cmd) run_exp1(exp1, out);
        else if (*exp2_cmd) run_exp2(exp2, out);
        else if (*gen_cmd) run_gen(gen, out);
        else if (*select_cmd) run_select(select, out);
        else if (*cluster_cmd) run_cluster(cluster, out);
        else if (*regress_cmd) run_regress(regress, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    } catch (const MazeError& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    }
    return kOk;
}

}  // namespace metaplan::cli
