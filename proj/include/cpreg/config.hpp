#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpreg {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/* Flat key=value configuration with '#' comments. Accessors validate and
   remember which keys were read, so a scenario can reject typos wholesale. */
class Config {
public:
    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            if (!cfg.kv_.emplace(key, value).second)
                throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get_string(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("missing config key: " + key);
        accessed_.insert(key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        accessed_.insert(key);
        const auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double fallback) const {
        accessed_.insert(key);
        return has(key) ? get_double(key) : fallback;
    }

    std::uint64_t get_u64(const std::string& key) const {
        return to_u64(key, get_string(key));
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        accessed_.insert(key);
        return has(key) ? get_u64(key) : fallback;
    }

    std::uint32_t get_u32(const std::string& key) const {
        const std::uint64_t v = get_u64(key);
        if (v > 0xffffffffULL) throw ConfigError("config key out of range: " + key);
        return static_cast<std::uint32_t>(v);
    }
    std::uint32_t get_u32(const std::string& key, std::uint32_t fallback) const {
        accessed_.insert(key);
        return has(key) ? get_u32(key) : fallback;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const std::string& item : split_list(get_string(key))) {
            if (item.empty()) throw ConfigError("config key has an empty list item: " + key);
            out.push_back(to_double(key, item));
        }
        if (out.empty()) throw ConfigError("config key has empty list: " + key);
        return out;
    }

    std::vector<std::uint32_t> get_u32_list(const std::string& key) const {
        std::vector<std::uint32_t> out;
        for (const std::string& item : split_list(get_string(key))) {
            if (item.empty()) throw ConfigError("config key has an empty list item: " + key);
            out.push_back(static_cast<std::uint32_t>(to_u64(key, item)));
        }
        if (out.empty()) throw ConfigError("config key has empty list: " + key);
        return out;
    }

    /* Sorted key/value pairs, for manifests and determinism checks. */
    std::vector<std::pair<std::string, std::string>> items() const {
        return {kv_.begin(), kv_.end()};
    }

    /* Keys present in the file but never read by the scenario. */
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : kv_)
            if (!accessed_.count(k)) out.push_back(k);
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream in(s);
        while (std::getline(in, cur, ',')) out.push_back(trim(cur));
        return out;
    }

    static double to_double(const std::string& key, const std::string& value) {
        double v = 0.0;
        const char* first = value.data();
        const char* last = value.data() + value.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc() || res.ptr != last)
            throw ConfigError("config key '" + key + "': bad number '" + value + "'");
        if (!std::isfinite(v))
            throw ConfigError("config key '" + key + "': non-finite value");
        return v;
    }

    /* Integer values may be written in scientific notation (3e5); they must
       still be exact non-negative integers. */
    static std::uint64_t to_u64(const std::string& key, const std::string& value) {
        const double v = to_double(key, value);
        if (v < 0.0 || v > 9.007199254740992e15 || v != std::floor(v))
            throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                              value + "'");
        return static_cast<std::uint64_t>(v);
    }

    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> accessed_;
};

}  // namespace cpreg
