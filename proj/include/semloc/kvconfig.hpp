#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace semloc {

/// Flat `key = value` text file. `#` starts a comment. Lookups are typed and throw
/// Error(config) on malformed values.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig load(const std::filesystem::path& path);
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated integers.
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

    /// Throws Error(config) naming the first key outside `known`.
    void check_known(const std::set<std::string>& known) const;

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
};

}  // namespace semloc
