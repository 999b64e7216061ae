#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pelab/errors.hpp"

namespace pelab {

/**
 * Flat `key = value` text file: UTF-8, one entry per line, `#` starts a
 * comment, blank lines ignored. Later entries win over earlier ones (the
 * same rule --set overrides use). Line numbers are kept for error messages.
 */
class KeyValueFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    KeyValueFile() = default;

    static KeyValueFile parse_text(const std::string& text, const std::string& origin = "<text>") {
        KeyValueFile kv;
        kv.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                const int column = static_cast<int>(line.find_first_not_of(" \t")) + 1;
                throw ConfigError(origin + ":" + std::to_string(line_no) + ":" +
                                      std::to_string(column) + ": expected `key = value`",
                                  "", line_no, column);
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ":1: empty key", "",
                                  line_no, 1);
            }
            kv.set(key, value, line_no);
        }
        return kv;
    }

    static KeyValueFile parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return parse_text(buffer.str(), path);
    }

    void set(const std::string& key, const std::string& value, int line = 0) {
        entries_[key] = Entry{value, line};
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    const std::string& get(const std::string& key) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError("missing required key: " + key, key);
        return it->second.value;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second.value;
    }

    double get_double(const std::string& key) const { return to_double(key, get(key)); }

    double get_double_or(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    std::uint64_t get_u64(const std::string& key) const {
        const std::string& raw = get(key);
        try {
            std::size_t used = 0;
            const auto v = std::stoull(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key + ": not a nonnegative integer: `" + raw + "`", key,
                              line_of(key));
        }
    }

    std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? get_u64(key) : fallback;
    }

    bool get_bool_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& raw = get(key);
        if (raw == "true" || raw == "1" || raw == "yes") return true;
        if (raw == "false" || raw == "0" || raw == "no") return false;
        throw ConfigError(key + ": not a boolean: `" + raw + "`", key, line_of(key));
    }

    std::vector<double> get_doubles(const std::string& key) const {
        std::istringstream in(get(key));
        std::vector<double> values;
        std::string token;
        while (in >> token) values.push_back(to_double(key, token));
        if (values.empty()) throw ConfigError(key + ": expected at least one number", key,
                                              line_of(key));
        return values;
    }

    int line_of(const std::string& key) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    /// Keys in sorted order, for deterministic serialization.
    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [key, entry] : entries_) out.push_back(key);
        return out;
    }

    const std::string& origin() const { return origin_; }

    double to_double(const std::string& key, const std::string& raw) const {
        try {
            std::size_t used = 0;
            const double v = std::stod(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key + ": not a number: `" + raw + "`", key, line_of(key));
        }
    }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
    }

    std::map<std::string, Entry> entries_;
    std::string origin_ = "<empty>";
};

}  // namespace pelab
