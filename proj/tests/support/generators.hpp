#pragma once

// Randomized-but-valid value generators shared by the property tests and the
// acceptance suite.

#include <random>

#include "dimsim/wire.hpp"

namespace testsupport {

using dimsim::Bytes;
using dimsim::Digest;

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

inline Digest random_digest(std::mt19937_64& rng) {
    Digest d;
    for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng());
    return d;
}

inline dimsim::wire::DisputePacket random_dispute(std::mt19937_64& rng) {
    dimsim::wire::DisputePacket p;
    p.device_id = random_bytes(rng, 5 + rng() % 3);
    p.applet_id = random_bytes(rng, 5 + rng() % 3);
    // Mix small and large values so both 7- and 8-byte encodings appear.
    p.timestamp_us = (rng() % 4 == 0) ? rng() % 1'000'000 : rng();
    p.current_hash = random_digest(rng);
    p.previous_hash = random_digest(rng);
    p.action_taken = dimsim::wire::to_action_code(static_cast<std::uint8_t>(rng() % 8));
    return p;
}

inline dimsim::wire::ApduCommand random_apdu(std::mt19937_64& rng) {
    dimsim::wire::ApduCommand cmd;
    cmd.cla = static_cast<std::uint8_t>(rng());
    cmd.ins = static_cast<std::uint8_t>(rng());
    cmd.p1 = static_cast<std::uint8_t>(rng());
    cmd.p2 = static_cast<std::uint8_t>(rng());
    switch (rng() % 4) {  // ISO case 1..4
        case 0: break;
        case 1: cmd.le = static_cast<std::uint8_t>(rng()); break;
        case 2: cmd.data = random_bytes(rng, 1 + rng() % 255); break;
        case 3:
            cmd.data = random_bytes(rng, 1 + rng() % 255);
            cmd.le = static_cast<std::uint8_t>(rng());
            break;
    }
    return cmd;
}

inline dimsim::wire::Frame random_frame(std::mt19937_64& rng) {
    dimsim::wire::Frame f;
    f.msg_type = static_cast<dimsim::wire::MsgType>(1 + rng() % 7);
    f.payload = random_bytes(rng, rng() % 256);
    return f;
}

inline dimsim::wire::LogEntry random_log_entry(std::mt19937_64& rng) {
    dimsim::wire::LogEntry e;
    e.t_s = (rng() % 4 == 0) ? rng() % 1'000'000 : rng();
    e.current_hash = random_digest(rng);
    e.previous_hash = random_digest(rng);
    e.action_taken = dimsim::wire::to_action_code(static_cast<std::uint8_t>(rng() % 8));
    return e;
}

}  // namespace testsupport
