#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "dimsim/bytes.hpp"
#include "dimsim/digest.hpp"

namespace dimsim {

// Ed25519 signing. Raw 32-byte keys so test fixtures and the simulator can
// derive key material deterministically from a scenario seed.

using Signature = std::array<std::uint8_t, 64>;

struct VerifyKey {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const VerifyKey&) const = default;

    bool verify(std::span<const std::uint8_t> message, const Signature& sig) const;
};

class SigningKey {
public:
    // seed = raw Ed25519 private key.
    explicit SigningKey(std::array<std::uint8_t, 32> seed);

    static SigningKey generate();

    Signature sign(std::span<const std::uint8_t> message) const;
    const VerifyKey& verify_key() const { return public_; }

private:
    std::array<std::uint8_t, 32> seed_{};
    VerifyKey public_;
};

// Confirmation receipt issued by a solution provider over a digest.
// Used in provisioning (benchmark confirmation) and in the update flow.
struct Receipt {
    std::string provider_id;
    Digest digest;
    Signature signature{};

    bool operator==(const Receipt&) const = default;
};

// Domain-separated signing payloads.
Bytes receipt_signing_bytes(const Digest& digest);
Receipt make_receipt(const std::string& provider_id, const Digest& digest, const SigningKey& key);
bool verify_receipt(const Receipt& receipt, const VerifyKey& provider_key);

}  // namespace dimsim
