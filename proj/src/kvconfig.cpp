#include "dimsim/kvconfig.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "dimsim/error.hpp"

namespace dimsim {

namespace {
std::string trim(std::string s) {
    auto is_space = [](unsigned char c) { return std::isspace(c); };
    while (!s.empty() && is_space(s.front())) s.erase(s.begin());
    while (!s.empty() && is_space(s.back())) s.pop_back();
    return s;
}
}  // namespace

KvConfig KvConfig::parse(std::string_view text) {
    KvConfig config;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::config_invalid,
                        "line " + std::to_string(lineno) + " is not 'key = value'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw Error(Errc::config_invalid, "line " + std::to_string(lineno) + " has no key");
        }
        config.items_.emplace_back(std::move(key), std::move(value));
    }
    return config;
}

KvConfig KvConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::config_invalid, "cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::optional<std::string> KvConfig::get(std::string_view key) const {
    for (auto it = items_.rbegin(); it != items_.rend(); ++it) {
        if (it->first == key) return it->second;
    }
    return std::nullopt;
}

std::string KvConfig::get_or(std::string_view key, std::string_view fallback) const {
    auto v = get(key);
    return v ? *v : std::string(fallback);
}

std::vector<std::string> KvConfig::get_all(std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : items_) {
        if (k == key) out.push_back(v);
    }
    return out;
}

std::int64_t KvConfig::get_int(std::string_view key, std::int64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        std::int64_t parsed = std::stoll(*v, &used);
        if (used != v->size()) throw std::invalid_argument(*v);
        return parsed;
    } catch (const std::exception&) {
        throw Error(Errc::config_invalid, std::string(key) + " must be an integer, got '" + *v + "'");
    }
}

bool KvConfig::get_bool(std::string_view key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::string lower = *v;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lower == "true" || lower == "1" || lower == "yes" || lower == "on") return true;
    if (lower == "false" || lower == "0" || lower == "no" || lower == "off") return false;
    throw Error(Errc::config_invalid, std::string(key) + " must be a boolean, got '" + *v + "'");
}

}  // namespace dimsim
