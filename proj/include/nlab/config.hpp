#pragma once

// Flat key=value configuration files: one `key = value` pair per line,
// '#' starts a comment, later assignments win (so command-line overrides
// can be applied by re-assigning).

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nlab/common.hpp"

namespace nlab::config {

class KeyValues {
public:
    KeyValues() = default;

    static KeyValues from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config file: " + path);
        KeyValues kv;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw validation_error(path + ":" + std::to_string(line_no) + ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            require(!key.empty(), path + ":" + std::to_string(line_no) + ": empty key");
            kv.values_[key] = trim(trimmed.substr(eq + 1));
        }
        return kv;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw validation_error("missing config key '" + key + "'");
        return it->second;
    }

    std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const { return to_int(key, get(key)); }
    long get_int(const std::string& key, long fallback) const { return has(key) ? get_int(key) : fallback; }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = get(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw validation_error("config key '" + key + "': expected boolean, got '" + v + "'");
    }

    // comma-separated list of doubles
    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(to_double(key, trim(tok)));
        require(!out.empty(), "config key '" + key + "': empty list");
        return out;
    }

    std::vector<long> get_ints(const std::string& key) const {
        std::vector<long> out;
        std::stringstream ss(get(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(to_int(key, trim(tok)));
        require(!out.empty(), "config key '" + key + "': empty list");
        return out;
    }

    const std::map<std::string, std::string>& all() const { return values_; }

    static std::string trim(const std::string& s) {
        const auto first = s.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) return "";
        const auto last = s.find_last_not_of(" \t\r\n");
        return s.substr(first, last - first + 1);
    }

private:
    static double to_double(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw validation_error("config key '" + key + "': expected number, got '" + v + "'");
        }
    }
    static long to_int(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const long x = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw validation_error("config key '" + key + "': expected integer, got '" + v + "'");
        }
    }

    std::map<std::string, std::string> values_;
};

}  // namespace nlab::config
