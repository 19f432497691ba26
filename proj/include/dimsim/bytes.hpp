#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dimsim/error.hpp"

namespace dimsim {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

// Big-endian integer helpers shared by every codec in the project.
void put_u16be(Bytes& out, std::uint16_t v);
void put_u32be(Bytes& out, std::uint32_t v);
void put_u64be(Bytes& out, std::uint64_t v);

// Sequential writer over a growing buffer.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16be(std::uint16_t v) { put_u16be(buf_, v); }
    void u32be(std::uint32_t v) { put_u32be(buf_, v); }
    void u64be(std::uint64_t v) { put_u64be(buf_, v); }
    void raw(std::span<const std::uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
    void raw(const Bytes& data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

    Bytes take() { return std::move(buf_); }
    const Bytes& bytes() const { return buf_; }

private:
    Bytes buf_;
};

// Sequential reader; every read throws Errc::truncated past the end, so
// decoders stay total over arbitrary input.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16be();
    std::uint32_t u32be();
    std::uint64_t u64be();
    std::span<const std::uint8_t> raw(std::size_t n);

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }
    bool done() const { return pos_ == data_.size(); }

    // Call once a decode is complete; enforces the no-trailing-garbage contract.
    void expect_done() const {
        if (!done()) throw Error(Errc::trailing_bytes, "trailing bytes after message");
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace dimsim
