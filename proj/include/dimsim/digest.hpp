#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace dimsim {

// 32-byte hash value; the unit of every integrity comparison in the system.
struct Digest {
    static constexpr std::size_t kSize = 32;

    std::array<std::uint8_t, kSize> bytes{};

    auto operator<=>(const Digest&) const = default;

    std::string hex() const;
    // First 8 hex chars, for report/log lines.
    std::string short_hex() const;

    static Digest from_hex(std::string_view hex);
    static Digest from_span(std::span<const std::uint8_t> data);

    // All-zero digest; genesis constant for both chained files.
    static Digest zero() { return Digest{}; }
};

}  // namespace dimsim
