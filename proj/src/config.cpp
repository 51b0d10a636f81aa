#include "longal/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "longal/error.hpp"

namespace longal {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + " has no '='");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            fail(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + " has empty key");
        if (cfg.values_.count(key))
            fail(ErrorCode::InvalidConfig, "duplicate config key: " + key);
        cfg.values_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::InvalidConfig, "cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str());
}

std::string KvConfig::get_string(const std::string& key, const std::string& def) {
    consumed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

double KvConfig::get_double(const std::string& key, double def) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
        fail(ErrorCode::InvalidConfig, "key " + key + " is not a number: " + it->second);
    return v;
}

int KvConfig::get_int(const std::string& key, int def) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    char* end = nullptr;
    long v = std::strtol(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        fail(ErrorCode::InvalidConfig, "key " + key + " is not an integer: " + it->second);
    return static_cast<int>(v);
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t def) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    char* end = nullptr;
    unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        fail(ErrorCode::InvalidConfig, "key " + key + " is not an integer: " + it->second);
    return static_cast<std::uint64_t>(v);
}

bool KvConfig::get_bool(const std::string& key, bool def) {
    consumed_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorCode::InvalidConfig, "key " + key + " is not a boolean: " + v);
}

void KvConfig::reject_unknown() const {
    for (const auto& [k, v] : values_) {
        if (!consumed_.count(k)) fail(ErrorCode::InvalidConfig, "unknown config key: " + k);
    }
}

}  // namespace longal
