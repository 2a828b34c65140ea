#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace planguard {

// INI-style configuration with strict key checking. Every key read by the
// program is marked consumed; after assembly, `reject_unknown_keys` turns
// any leftover into an error naming the file line, which is what catches
// typos in config files and --override flags alike.
class Config {
  public:
    struct Entry {
        std::string value;
        std::string origin;  // file name or "override"
        int line = 0;
        mutable bool consumed = false;
    };

    static Config parse_text(const std::string& text, const std::string& origin) {
        Config cfg;
        cfg.merge_text(text, origin);
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        Config cfg = parse_text(buf.str(), path);
        cfg.text_ = buf.str();
        return cfg;
    }

    // Later sources win key-by-key.
    void merge(const Config& other) {
        for (const auto& [key, entry] : other.entries_) entries_[key] = entry;
        if (!other.text_.empty()) {
            if (!text_.empty() && text_.back() != '\n') text_ += '\n';
            text_ += other.text_;
        }
    }

    void merge_text(const std::string& text, const std::string& origin) {
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = strip(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[') {
                if (t.back() != ']' || t.size() < 3)
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": malformed section header: " + t);
                section = strip(t.substr(1, t.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": empty section name");
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got: " + t);
            const std::string key = strip(t.substr(0, eq));
            const std::string value = strip(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                                  "' outside any [section]");
            Entry e;
            e.value = value;
            e.origin = origin;
            e.line = lineno;
            entries_[section + "." + key] = std::move(e);
        }
        if (text_.empty()) text_ = text;
    }

    // spec has the form section.key=value.
    void apply_override(const std::string& spec) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + spec + "': expected section.key=value");
        const std::string key = strip(spec.substr(0, eq));
        const std::string value = strip(spec.substr(eq + 1));
        if (key.find('.') == std::string::npos)
            throw ConfigError("override '" + spec + "': key must be section.key");
        Entry e;
        e.value = value;
        e.origin = "override";
        e.line = 0;
        entries_[key] = std::move(e);
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        return it->second.value;
    }

    std::string require_string(const std::string& key) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
        it->second.consumed = true;
        return it->second.value;
    }

    long long get_int(const std::string& key, long long fallback) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        return parse_int(it->second, key);
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        return parse_double(it->second, key);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        const std::string& v = it->second.value;
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        throw ConfigError(located(it->second, key) + ": expected a boolean, got '" + v + "'");
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(located(it->second, key) + ": expected an unsigned integer, got '" +
                              it->second.value + "'");
        }
    }

    // Anything never consumed is unknown to the program.
    void reject_unknown_keys() const {
        for (const auto& [key, entry] : entries_) {
            if (entry.consumed) continue;
            throw ConfigError(located(entry, key) + ": unknown key '" + key + "'");
        }
    }

    const std::string& text() const { return text_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    // Canonical dump of the resolved configuration, stable across runs.
    std::string resolved_text() const {
        std::string out;
        std::string section;
        for (const auto& [key, entry] : entries_) {
            const auto dot = key.find('.');
            const std::string sec = key.substr(0, dot);
            if (sec != section) {
                if (!out.empty()) out += '\n';
                out += '[' + sec + "]\n";
                section = sec;
            }
            out += key.substr(dot + 1) + " = " + entry.value + '\n';
        }
        return out;
    }

  private:
    static std::string strip(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static std::string located(const Entry& entry, const std::string& key) {
        if (entry.line > 0) return entry.origin + ":" + std::to_string(entry.line);
        return entry.origin + " '" + key + "'";
    }

    static long long parse_int(const Entry& entry, const std::string& key) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(entry.value, &pos);
            if (pos != entry.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(located(entry, key) + ": expected an integer, got '" +
                              entry.value + "'");
        }
    }

    static double parse_double(const Entry& entry, const std::string& key) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(entry.value, &pos);
            if (pos != entry.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(located(entry, key) + ": expected a number, got '" +
                              entry.value + "'");
        }
    }

    std::map<std::string, Entry> entries_;
    std::string text_;
};

}  // namespace planguard
