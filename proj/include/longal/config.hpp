#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace longal {

// Flat key = value configuration text: one pair per line, '#' comments,
// blank lines ignored. Unknown keys are rejected after parsing.
class KvConfig {
public:
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& def);
    double get_double(const std::string& key, double def);
    int get_int(const std::string& key, int def);
    std::uint64_t get_u64(const std::string& key, std::uint64_t def);
    bool get_bool(const std::string& key, bool def);

    // throws InvalidConfig when a key was never consumed by a getter
    void reject_unknown() const;

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

}  // namespace longal
