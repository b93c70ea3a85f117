#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rodflow/linalg.hpp"

namespace rodflow {

struct PlotError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// metrics.csv as columns of doubles; blank cells become NaN
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<Vec> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw PlotError("column not found: " + name);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PlotError("cannot open metrics file: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(f, line)) throw PlotError("empty metrics file: " + path);
    {
        std::istringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) t.columns.push_back(cell);
    }
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        Vec row;
        row.reserve(t.columns.size());
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            } else {
                // strtod to keep subnormal cells parseable
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                if (end == cell.c_str()) throw PlotError("unparseable csv cell: " + cell);
                row.push_back(v);
            }
        }
        while (row.size() < t.columns.size())
            row.push_back(std::numeric_limits<double>::quiet_NaN());
        t.rows.push_back(std::move(row));
    }
    return t;
}

struct PlotSpec {
    std::vector<std::vector<std::string>> panels;  // columns per panel
    bool log_y = false;
    std::optional<double> threshold;  // horizontal rule on sharpness panels
};

// "a,b;c,d" -> two panels
inline std::vector<std::vector<std::string>> parse_column_groups(const std::string& arg) {
    std::vector<std::vector<std::string>> panels;
    std::istringstream ps(arg);
    std::string panel;
    while (std::getline(ps, panel, ';')) {
        std::vector<std::string> cols;
        std::istringstream cs(panel);
        std::string col;
        while (std::getline(cs, col, ',')) {
            const auto b = col.find_first_not_of(" \t");
            const auto e = col.find_last_not_of(" \t");
            if (b != std::string::npos) cols.push_back(col.substr(b, e - b + 1));
        }
        if (!cols.empty()) panels.push_back(std::move(cols));
    }
    return panels;
}

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % 8];
}

}  // namespace detail

// Multi-panel line chart. Panels stack vertically and share the t axis.
inline void render_svg(const CsvTable& table, const PlotSpec& spec, std::ostream& os) {
    if (table.rows.empty()) throw PlotError("metrics file has no data rows");
    if (spec.panels.empty()) throw PlotError("no columns requested");

    const double width = 760, panel_h = 230, margin_l = 70, margin_r = 20, margin_t = 28,
                 margin_b = 34;
    const double plot_w = width - margin_l - margin_r;
    const double plot_h = panel_h - margin_t - margin_b;
    const double height = panel_h * spec.panels.size();

    const std::size_t t_col = table.column_index("t");
    double t_min = table.rows.front()[t_col], t_max = table.rows.back()[t_col];
    if (t_max <= t_min) t_max = t_min + 1.0;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" font-family=\"monospace\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t p = 0; p < spec.panels.size(); ++p) {
        const double oy = p * panel_h;
        std::vector<std::size_t> idx;
        for (const auto& name : spec.panels[p]) idx.push_back(table.column_index(name));

        const bool sharp_panel = [&] {
            for (const auto& name : spec.panels[p])
                if (name.find("sharpness") != std::string::npos) return true;
            return false;
        }();

        auto transform = [&](double v) {
            return spec.log_y ? std::log10(std::max(v, 1e-300)) : v;
        };

        double y_min = std::numeric_limits<double>::infinity();
        double y_max = -std::numeric_limits<double>::infinity();
        for (const auto& row : table.rows)
            for (std::size_t c : idx) {
                const double v = row[c];
                if (std::isnan(v) || (spec.log_y && v <= 0.0)) continue;
                y_min = std::min(y_min, transform(v));
                y_max = std::max(y_max, transform(v));
            }
        if (spec.threshold && sharp_panel) {
            y_min = std::min(y_min, transform(*spec.threshold));
            y_max = std::max(y_max, transform(*spec.threshold));
        }
        if (!std::isfinite(y_min)) {
            y_min = 0.0;
            y_max = 1.0;
        }
        if (y_max <= y_min) y_max = y_min + 1.0;
        const double pad = 0.05 * (y_max - y_min);
        y_min -= pad;
        y_max += pad;

        auto sx = [&](double t) { return margin_l + (t - t_min) / (t_max - t_min) * plot_w; };
        auto sy = [&](double v) {
            return oy + margin_t + (y_max - transform(v)) / (y_max - y_min) * plot_h;
        };

        os << "<rect x=\"" << margin_l << "\" y=\"" << oy + margin_t << "\" width=\"" << plot_w
           << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
        // axis labels: y extremes and x extremes
        const double y_lo_val = spec.log_y ? std::pow(10.0, y_min) : y_min;
        const double y_hi_val = spec.log_y ? std::pow(10.0, y_max) : y_max;
        os << "<text x=\"4\" y=\"" << oy + margin_t + 10 << "\">" << detail::fmt(y_hi_val)
           << "</text>\n";
        os << "<text x=\"4\" y=\"" << oy + margin_t + plot_h << "\">" << detail::fmt(y_lo_val)
           << "</text>\n";
        os << "<text x=\"" << margin_l << "\" y=\"" << oy + panel_h - 12 << "\">t="
           << detail::fmt(t_min) << "</text>\n";
        os << "<text x=\"" << width - margin_r - 90 << "\" y=\"" << oy + panel_h - 12 << "\">t="
           << detail::fmt(t_max) << "</text>\n";

        if (spec.threshold && sharp_panel) {
            const double yv = sy(*spec.threshold);
            os << "<line x1=\"" << margin_l << "\" y1=\"" << yv << "\" x2=\""
               << margin_l + plot_w << "\" y2=\"" << yv
               << "\" stroke=\"#000000\" stroke-dasharray=\"6,4\"/>\n";
            os << "<text x=\"" << margin_l + plot_w - 160 << "\" y=\"" << yv - 4
               << "\">threshold=" << detail::fmt(*spec.threshold) << "</text>\n";
        }

        for (std::size_t s = 0; s < idx.size(); ++s) {
            // gaps (blank cadence cells) are bridged visually, not in data
            os << "<polyline fill=\"none\" stroke=\"" << detail::series_color(s)
               << "\" stroke-width=\"1.2\" points=\"";
            bool first = true;
            for (const auto& row : table.rows) {
                const double v = row[idx[s]];
                if (std::isnan(v) || (spec.log_y && v <= 0.0)) continue;
                if (!first) os << ' ';
                os << detail::fmt(sx(row[t_col])) << ',' << detail::fmt(sy(v));
                first = false;
            }
            os << "\"/>\n";
            os << "<text x=\"" << margin_l + 8 << "\" y=\"" << oy + margin_t + 14 + 13 * s
               << "\" fill=\"" << detail::series_color(s) << "\">" << spec.panels[p][s]
               << "</text>\n";
        }
    }
    os << "</svg>\n";
}

inline void render_svg_file(const CsvTable& table, const PlotSpec& spec,
                            const std::string& out_path) {
    // validate fully before creating the file so errors leave nothing behind
    if (table.rows.empty()) throw PlotError("metrics file has no data rows");
    for (const auto& panel : spec.panels)
        for (const auto& name : panel) table.column_index(name);
    std::ostringstream buf;
    render_svg(table, spec, buf);
    std::ofstream f(out_path);
    if (!f) throw PlotError("cannot write svg: " + out_path);
    f << buf.str();
}

}  // namespace rodflow
