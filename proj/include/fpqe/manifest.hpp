#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fpqe/common.hpp"

namespace fpqe {

// Flat key=value text files with '#' comments; used for checkpoint manifests
// and experiment configs. Keys use dotted section prefixes (e.g. qnn.layers).
using KvMap = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline KvMap parse_kv_text(const std::string& text, const std::string& origin) {
    KvMap kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

inline KvMap read_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_kv_text(buf.str(), path);
}

inline void write_kv_file(const std::string& path, const KvMap& kv) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
    if (!os) throw IoError("short write to " + path);
}

inline const std::string& kv_get(const KvMap& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("missing key '" + key + "'");
    return it->second;
}

inline std::string kv_get_or(const KvMap& kv, const std::string& key, const std::string& dflt) {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
}

inline long long kv_get_int(const KvMap& kv, const std::string& key) {
    return std::stoll(kv_get(kv, key));
}

inline double kv_get_double(const KvMap& kv, const std::string& key) {
    return std::stod(kv_get(kv, key));
}

}  // namespace fpqe
