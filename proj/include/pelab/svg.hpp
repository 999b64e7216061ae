#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pelab/csv.hpp"
#include "pelab/errors.hpp"
#include "pelab/kvfile.hpp"

namespace pelab {

/**
 * Declarative line-chart request: which CSV, which columns, scales and
 * title. Rendering is a pure function of the spec and the file contents, so
 * identical inputs produce byte-identical SVG.
 */
struct PlotSpec {
    std::string input_csv;
    std::string x_column = "step";
    std::vector<std::string> y_columns;
    bool log_x = false;
    bool log_y = false;
    std::string title;
};

inline PlotSpec parse_plot_spec(const KeyValueFile& kv) {
    PlotSpec spec;
    for (const auto& key : kv.keys()) {
        if (key != "input" && key != "x" && key != "y" && key != "logx" && key != "logy" &&
            key != "title")
            throw ConfigError(key + ": unknown plot key", key, kv.line_of(key));
    }
    spec.input_csv = kv.get("input");
    spec.x_column = kv.get_or("x", "step");
    std::istringstream ys(kv.get("y"));
    std::string column;
    while (std::getline(ys, column, ',')) {
        const auto begin = column.find_first_not_of(" \t");
        const auto end = column.find_last_not_of(" \t");
        if (begin != std::string::npos) spec.y_columns.push_back(column.substr(begin, end - begin + 1));
    }
    if (spec.y_columns.empty()) throw ConfigError("y: expected at least one column name", "y");
    spec.log_x = kv.get_bool_or("logx", false);
    spec.log_y = kv.get_bool_or("logy", false);
    spec.title = kv.get_or("title", "");
    return spec;
}

namespace svg_detail {

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c; break;
        }
    }
    return out;
}

/// Tick positions at 1/2/5 times a power of ten, covering [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    std::vector<double> ticks;
    const double span = hi - lo;
    if (span <= 0.0) return {lo};
    const double raw = span / target;
    const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
    double step = magnitude;
    for (double factor : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= factor * magnitude) {
            step = factor * magnitude;
            break;
        }
    }
    double tick = std::ceil(lo / step) * step;
    while (tick <= hi + 0.5 * step) {
        // Snap values that should be zero.
        if (std::abs(tick) < 1e-12 * step) tick = 0.0;
        ticks.push_back(tick);
        tick += step;
    }
    return ticks;
}

// Reads the CSV block out of either a bare CSV file or a run-artifact
// envelope (config block, `---`, CSV block).
inline CsvTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open input file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    const auto separator = text.find("\n---\n");
    if (separator != std::string::npos) text = text.substr(separator + 5);
    return CsvTable::parse(text);
}

}  // namespace svg_detail

/**
 * Renders the spec to a standalone SVG: one polyline per y column, axes
 * with tick labels, a legend from the column names. Rows whose cells are
 * empty or non-finite are skipped; single-point series are drawn as
 * markers. On a log scale, non-positive values are skipped as well.
 */
inline std::string render_svg(const PlotSpec& spec) {
    const CsvTable table = svg_detail::load_table(spec.input_csv);
    const int x_index = table.column_index(spec.x_column);
    if (x_index < 0)
        throw ConfigError("x: no column named `" + spec.x_column + "` in " + spec.input_csv,
                          "x");
    std::vector<int> y_indices;
    for (const auto& column : spec.y_columns) {
        const int idx = table.column_index(column);
        if (idx < 0)
            throw ConfigError("y: no column named `" + column + "` in " + spec.input_csv, "y");
        y_indices.push_back(idx);
    }

    struct Point {
        double x, y;
    };
    std::vector<std::vector<Point>> series(y_indices.size());
    const auto parse_cell = [](const std::string& cell, double& out) {
        if (cell.empty()) return false;
        try {
            std::size_t used = 0;
            out = std::stod(cell, &used);
            return used == cell.size() && std::isfinite(out);
        } catch (const std::exception&) {
            return false;
        }
    };
    for (const auto& row : table.rows) {
        double x = 0.0;
        if (static_cast<std::size_t>(x_index) >= row.size() || !parse_cell(row[x_index], x))
            continue;
        if (spec.log_x) {
            if (x <= 0.0) continue;
            x = std::log10(x);
        }
        for (std::size_t s = 0; s < y_indices.size(); ++s) {
            double y = 0.0;
            if (static_cast<std::size_t>(y_indices[s]) >= row.size() ||
                !parse_cell(row[y_indices[s]], y))
                continue;
            if (spec.log_y) {
                if (y <= 0.0) continue;
                y = std::log10(y);
            }
            series[s].push_back({x, y});
        }
    }

    bool any_points = false;
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    for (const auto& s : series) {
        for (const auto& p : s) {
            if (!any_points) {
                x_lo = x_hi = p.x;
                y_lo = y_hi = p.y;
                any_points = true;
            } else {
                x_lo = std::min(x_lo, p.x);
                x_hi = std::max(x_hi, p.x);
                y_lo = std::min(y_lo, p.y);
                y_hi = std::max(y_hi, p.y);
            }
        }
    }
    if (!any_points)
        throw ConfigError("plot: no drawable points in `" + spec.input_csv + "`");
    if (x_hi == x_lo) {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    if (y_hi == y_lo) {
        const double pad = y_lo == 0.0 ? 1.0 : std::abs(y_lo) * 0.1;
        y_lo -= pad;
        y_hi += pad;
    }
    const double x_pad = 0.03 * (x_hi - x_lo);
    const double y_pad = 0.05 * (y_hi - y_lo);
    x_lo -= x_pad;
    x_hi += x_pad;
    y_lo -= y_pad;
    y_hi += y_pad;

    const double width = 960, height = 600;
    const double left = 75, right = width - 175, top = 50, bottom = height - 60;
    const auto map_x = [&](double x) {
        return left + (x - x_lo) / (x_hi - x_lo) * (right - left);
    };
    const auto map_y = [&](double y) {
        return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top);
    };
    const auto tick_label = [&](double v, bool log_scale) {
        return svg_detail::fmt(log_scale ? std::pow(10.0, v) : v);
    };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    constexpr int palette_size = 8;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    // Grid and tick labels.
    svg << "  <g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (double tx : svg_detail::nice_ticks(x_lo + x_pad, x_hi - x_pad)) {
        const double px = map_x(tx);
        svg << "    <line x1=\"" << svg_detail::fmt(px) << "\" y1=\"" << svg_detail::fmt(top)
            << "\" x2=\"" << svg_detail::fmt(px) << "\" y2=\"" << svg_detail::fmt(bottom)
            << "\"/>\n";
    }
    for (double ty : svg_detail::nice_ticks(y_lo + y_pad, y_hi - y_pad)) {
        const double py = map_y(ty);
        svg << "    <line x1=\"" << svg_detail::fmt(left) << "\" y1=\"" << svg_detail::fmt(py)
            << "\" x2=\"" << svg_detail::fmt(right) << "\" y2=\"" << svg_detail::fmt(py)
            << "\"/>\n";
    }
    svg << "  </g>\n";
    svg << "  <g font-family=\"monospace\" font-size=\"12\" fill=\"#333333\">\n";
    for (double tx : svg_detail::nice_ticks(x_lo + x_pad, x_hi - x_pad)) {
        svg << "    <text x=\"" << svg_detail::fmt(map_x(tx)) << "\" y=\""
            << svg_detail::fmt(bottom + 18) << "\" text-anchor=\"middle\">"
            << tick_label(tx, spec.log_x) << "</text>\n";
    }
    for (double ty : svg_detail::nice_ticks(y_lo + y_pad, y_hi - y_pad)) {
        svg << "    <text x=\"" << svg_detail::fmt(left - 8) << "\" y=\""
            << svg_detail::fmt(map_y(ty) + 4) << "\" text-anchor=\"end\">"
            << tick_label(ty, spec.log_y) << "</text>\n";
    }
    svg << "  </g>\n";

    // Axes box.
    svg << "  <rect x=\"" << svg_detail::fmt(left) << "\" y=\"" << svg_detail::fmt(top)
        << "\" width=\"" << svg_detail::fmt(right - left) << "\" height=\""
        << svg_detail::fmt(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Series.
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % palette_size];
        if (series[s].size() >= 2) {
            svg << "  <polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& p : series[s])
                svg << svg_detail::fmt(map_x(p.x)) << ',' << svg_detail::fmt(map_y(p.y)) << ' ';
            svg << "\"/>\n";
        }
        if (series[s].size() == 1) {
            svg << "  <circle cx=\"" << svg_detail::fmt(map_x(series[s][0].x)) << "\" cy=\""
                << svg_detail::fmt(map_y(series[s][0].y)) << "\" r=\"3.5\" fill=\"" << color
                << "\"/>\n";
        }
    }

    // Legend.
    svg << "  <g font-family=\"monospace\" font-size=\"13\">\n";
    for (std::size_t s = 0; s < spec.y_columns.size(); ++s) {
        const double ly = top + 12 + 20.0 * static_cast<double>(s);
        svg << "    <line x1=\"" << svg_detail::fmt(right + 12) << "\" y1=\""
            << svg_detail::fmt(ly - 4) << "\" x2=\"" << svg_detail::fmt(right + 34) << "\" y2=\""
            << svg_detail::fmt(ly - 4) << "\" stroke=\"" << palette[s % palette_size]
            << "\" stroke-width=\"2\"/>\n";
        svg << "    <text x=\"" << svg_detail::fmt(right + 40) << "\" y=\""
            << svg_detail::fmt(ly) << "\">" << svg_detail::xml_escape(spec.y_columns[s])
            << "</text>\n";
    }
    svg << "  </g>\n";

    // Title and x-axis label.
    if (!spec.title.empty()) {
        svg << "  <text x=\"" << svg_detail::fmt((left + right) / 2) << "\" y=\"28\" "
            << "text-anchor=\"middle\" font-family=\"monospace\" font-size=\"17\">"
            << svg_detail::xml_escape(spec.title) << "</text>\n";
    }
    svg << "  <text x=\"" << svg_detail::fmt((left + right) / 2) << "\" y=\""
        << svg_detail::fmt(height - 14)
        << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"13\">"
        << svg_detail::xml_escape(spec.x_column) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace pelab
