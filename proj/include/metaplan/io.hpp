#pragma once
// Output formats: self-describing CSV, run summaries and SVG heatmaps.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "metaplan/maze.hpp"
#include "metaplan/meta_planner.hpp"

namespace metaplan::io {

/// Shortest round-trip-safe decimal: 17 significant digits.
inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline nlohmann::ordered_json to_json(const MetaPlanConfig& c) {
    nlohmann::ordered_json j;
    j["lambda"] = c.lambda;
    j["outer_iterations"] = c.outer_iterations;
    j["horizon"] = c.horizon;
    j["adam"] = {{"step_size", c.adam.step_size},
                 {"beta1", c.adam.beta1},
                 {"beta2", c.adam.beta2},
                 {"epsilon", c.adam.epsilon}};
    j["seed"] = c.seed;
    j["eval_tolerance"] = c.eval_tolerance;
    j["loss_weighting"] = c.weighting == LossWeighting::AllStates ? "all_states" : "start_state";
    j["gradient_mode"] = c.gradient_mode == EvaluationGradient::Adjoint ? "adjoint" : "unrolled";
    j["init_range"] = {c.init_low, c.init_high};
    return j;
}

inline std::string config_hash(const MetaPlanConfig& c) { return hex64(fnv1a(to_json(c).dump())); }

/**
 * CSV document: a `#` metadata comment line, a header row, then data rows.
 * Only the metadata line may vary between identical runs.
 */
class CsvTable {
public:
    CsvTable(std::string metadata, std::vector<std::string> header)
        : metadata_(std::move(metadata)), header_(std::move(header)) {}

    class Row {
    public:
        Row& operator<<(const std::string& s) { return cell(s); }
        Row& operator<<(const char* s) { return cell(s); }
        Row& operator<<(double x) { return cell(format_real(x)); }
        template <std::integral T>
        Row& operator<<(T x) {
            return cell(std::to_string(x));
        }

    private:
        friend class CsvTable;
        explicit Row(std::vector<std::string>& cells) : cells_(cells) {}
        Row& cell(std::string s) {
            cells_.push_back(std::move(s));
            return *this;
        }
        std::vector<std::string>& cells_;
    };

    Row row() {
        rows_.emplace_back();
        return Row(rows_.back());
    }

    std::string body() const {
        std::string out;
        append_line(out, header_);
        for (const auto& r : rows_) {
            if (r.size() != header_.size()) throw std::logic_error("CSV row width does not match header");
            append_line(out, r);
        }
        return out;
    }

    std::string str() const { return "# " + metadata_ + "\n" + body(); }

private:
    static void append_line(std::string& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
            if (!quote) {
                out += cells[i];
                continue;
            }
            out += '"';
            for (char ch : cells[i]) {
                if (ch == '"') out += '"';
                out += ch;
            }
            out += '"';
        }
        out += '\n';
    }

    std::string metadata_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Strips a leading `#` comment line, returning what a consumer would parse.
inline std::string csv_body(const std::string& text) {
    if (!text.starts_with("#")) return text;
    const auto nl = text.find('\n');
    return nl == std::string::npos ? std::string{} : text.substr(nl + 1);
}

/// Writes via a sibling temporary file and rename.
inline void write_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!f) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Minimal CSV reader: skips `#` comment lines, handles quoted fields.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cells(1);
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (quoted) {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cells.back() += '"';
                    ++i;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cells.back() += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                cells.emplace_back();
            } else {
                cells.back() += ch;
            }
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline nlohmann::ordered_json run_summary(const MetaPlanResult& result, std::string_view source) {
    nlohmann::ordered_json j;
    j["source"] = source;
    j["config"] = to_json(result.config);
    j["config_hash"] = config_hash(result.config);
    j["cost_units"] = "nats";
    j["final_loss"] = result.loss_history.empty() ? 0.0 : result.loss_history.back();
    j["loss_history"] = result.loss_history;
    j["wall_time_seconds"] = result.wall_time_seconds;
    return j;
}

struct HeatmapStyle {
    double threshold = 0.005;
    int cell_px = 40;
};

/**
 * SVG of per-simulated-state KL from one ground state. Cells below the
 * threshold stay blank; the rest shade linearly from the threshold to the
 * maximum. The ground state is circled in red and the goal marked G.
 */
inline std::string kl_heatmap_svg(const MazeProblem& problem, const PartialPlanSlice& slice,
                                  const HeatmapStyle& style = {}) {
    const auto& maze = problem.maze;
    const int px = style.cell_px;
    double top = style.threshold;
    for (double k : slice.kl_per_state) top = std::max(top, k);
    std::ostringstream svg;
    svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << maze.width * px << R"(" height=")"
        << maze.height * px << R"(" font-family="sans-serif" font-size=")" << px / 3 << R"(">)" << '\n';
    for (int r = 0; r < maze.height; ++r) {
        for (int c = 0; c < maze.width; ++c) {
            const Cell cell{r, c};
            const int x = c * px;
            const int y = r * px;
            std::string fill = "#ffffff";
            std::string label;
            if (maze.is_wall(cell)) {
                fill = "#222222";
            } else {
                const double kl = slice.kl_per_state[problem.index.at(cell)];
                if (kl >= style.threshold) {
                    const double t = top > style.threshold ? (kl - style.threshold) / (top - style.threshold) : 1.0;
                    const int g = static_cast<int>(235.0 - 175.0 * t);
                    const int rb = static_cast<int>(220.0 - 200.0 * t);
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rb, g, rb);
                    fill = buf;
                    char num[16];
                    std::snprintf(num, sizeof num, "%.3f", kl);
                    label = num;
                }
            }
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << px << "\" height=\"" << px
                << "\" fill=\"" << fill << "\" stroke=\"#999999\"/>\n";
            if (cell == maze.goal) {
                svg << "<text x=\"" << x + px / 2 << "\" y=\"" << y + px * 2 / 3
                    << "\" text-anchor=\"middle\" font-weight=\"bold\">G</text>\n";
            } else if (!label.empty()) {
                svg << "<text x=\"" << x + px / 2 << "\" y=\"" << y + px * 3 / 5 << "\" text-anchor=\"middle\">"
                    << label << "</text>\n";
            }
        }
    }
    const Cell g = problem.index.cell(slice.ground);
    svg << "<circle cx=\"" << g.col * px + px / 2 << "\" cy=\"" << g.row * px + px / 2 << "\" r=\"" << px * 2 / 5
        << "\" fill=\"none\" stroke=\"#d00000\" stroke-width=\"3\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace metaplan::io
