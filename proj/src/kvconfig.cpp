#include "semloc/kvconfig.hpp"

#include <fstream>
#include <sstream>

#include "semloc/error.hpp"
#include "semloc/text.hpp"

namespace semloc {

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

KeyValueConfig KeyValueConfig::parse(const std::string& body, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(body);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = text::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::config, origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = text::trim(t.substr(0, eq));
        if (key.empty()) throw Error(ErrorKind::config, origin + ":" + std::to_string(line_no) + ": empty key");
        cfg.values_[key] = text::trim(t.substr(eq + 1));
    }
    return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return text::parse_double(it->second, key);
    } catch (const Error& e) {
        throw Error(ErrorKind::config, origin_ + ": " + e.what());
    }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return text::parse_int(it->second, key);
    } catch (const Error& e) {
        throw Error(ErrorKind::config, origin_ + ": " + e.what());
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw Error(ErrorKind::config, origin_ + ": expected a boolean for " + key + ", got '" + v + "'");
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    try {
        for (const auto& tok : text::split(it->second, ',')) out.push_back(static_cast<int>(text::parse_int(tok, key)));
    } catch (const Error& e) {
        throw Error(ErrorKind::config, origin_ + ": " + e.what());
    }
    return out;
}

void KeyValueConfig::check_known(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_) {
        if (!known.count(k)) throw Error(ErrorKind::config, origin_ + ": unknown key '" + k + "'");
    }
}

}  // namespace semloc
