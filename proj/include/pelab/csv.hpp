#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pelab/errors.hpp"

namespace pelab {

/// Decimal rendering used in every emitted table: 17 significant digits,
/// enough to round-trip doubles exactly, locale-independent.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Minimal CSV table: a header row plus string cells, LF line endings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        return -1;
    }

    std::string serialize() const {
        std::ostringstream out;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c) out << ',';
            out << header[c];
        }
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) out << ',';
                out << row[c];
            }
            out << '\n';
        }
        return out.str();
    }

    static CsvTable parse(const std::string& text) {
        CsvTable table;
        std::istringstream in(text);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() && in.eof()) break;
            std::vector<std::string> cells;
            std::string cell;
            std::istringstream row(line);
            while (std::getline(row, cell, ',')) cells.push_back(cell);
            if (!line.empty() && line.back() == ',') cells.push_back("");
            if (first) {
                table.header = cells;
                first = false;
            } else {
                table.rows.push_back(cells);
            }
        }
        return table;
    }

    static CsvTable read_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open CSV file: " + path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return parse(buffer.str());
    }
};

}  // namespace pelab
