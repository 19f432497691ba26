#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dimsim {

// key = value config text. '#' starts a comment, blank lines are skipped,
// duplicate keys are preserved in order (used for repeatable keys).
class KvConfig {
public:
    static KvConfig parse(std::string_view text);
    static KvConfig load(const std::string& path);

    std::optional<std::string> get(std::string_view key) const;
    std::string get_or(std::string_view key, std::string_view fallback) const;
    std::vector<std::string> get_all(std::string_view key) const;

    std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace dimsim
