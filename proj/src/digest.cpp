#include "dimsim/digest.hpp"

#include "dimsim/bytes.hpp"
#include "dimsim/error.hpp"

namespace dimsim {

std::string Digest::hex() const {
    return to_hex(bytes);
}

std::string Digest::short_hex() const {
    return hex().substr(0, 8);
}

Digest Digest::from_hex(std::string_view hex) {
    Bytes raw = dimsim::from_hex(hex);
    return from_span(raw);
}

Digest Digest::from_span(std::span<const std::uint8_t> data) {
    if (data.size() != kSize) throw Error(Errc::invalid_field, "digest must be 32 bytes");
    Digest d;
    std::copy(data.begin(), data.end(), d.bytes.begin());
    return d;
}

}  // namespace dimsim
