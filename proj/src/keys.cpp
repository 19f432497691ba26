#include "dimsim/keys.hpp"

#include <openssl/evp.h>

#include <memory>

#include "dimsim/error.hpp"

namespace dimsim {

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct CtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using CtxPtr = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;

PkeyPtr private_key_from_seed(const std::array<std::uint8_t, 32>& seed) {
    PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size()));
    if (!key) throw Error(Errc::storage_failure, "Ed25519 private key construction failed");
    return key;
}

}  // namespace

SigningKey::SigningKey(std::array<std::uint8_t, 32> seed) : seed_(seed) {
    PkeyPtr key = private_key_from_seed(seed_);
    std::size_t len = public_.bytes.size();
    if (EVP_PKEY_get_raw_public_key(key.get(), public_.bytes.data(), &len) != 1 ||
        len != public_.bytes.size()) {
        throw Error(Errc::storage_failure, "Ed25519 public key derivation failed");
    }
}

SigningKey SigningKey::generate() {
    CtxPtr ctx;  // not needed; keygen via pkey ctx
    EVP_PKEY* raw = nullptr;
    EVP_PKEY_CTX* pctx = EVP_PKEY_CTX_new_id(EVP_PKEY_ED25519, nullptr);
    if (!pctx || EVP_PKEY_keygen_init(pctx) != 1 || EVP_PKEY_keygen(pctx, &raw) != 1) {
        EVP_PKEY_CTX_free(pctx);
        throw Error(Errc::storage_failure, "Ed25519 keygen failed");
    }
    EVP_PKEY_CTX_free(pctx);
    PkeyPtr key(raw);
    std::array<std::uint8_t, 32> seed{};
    std::size_t len = seed.size();
    if (EVP_PKEY_get_raw_private_key(key.get(), seed.data(), &len) != 1 || len != seed.size()) {
        throw Error(Errc::storage_failure, "Ed25519 private key export failed");
    }
    return SigningKey(seed);
}

Signature SigningKey::sign(std::span<const std::uint8_t> message) const {
    PkeyPtr key = private_key_from_seed(seed_);
    CtxPtr ctx(EVP_MD_CTX_new());
    Signature sig{};
    std::size_t sig_len = sig.size();
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1 ||
        EVP_DigestSign(ctx.get(), sig.data(), &sig_len, message.data(), message.size()) != 1 ||
        sig_len != sig.size()) {
        throw Error(Errc::storage_failure, "Ed25519 signing failed");
    }
    return sig;
}

bool VerifyKey::verify(std::span<const std::uint8_t> message, const Signature& sig) const {
    PkeyPtr key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, bytes.data(), bytes.size()));
    if (!key) return false;
    CtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) {
        return false;
    }
    return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), message.data(), message.size()) == 1;
}

Bytes receipt_signing_bytes(const Digest& digest) {
    static constexpr std::string_view kContext = "DIMSIM.receipt";
    Bytes out(kContext.begin(), kContext.end());
    out.push_back(0x00);
    out.insert(out.end(), digest.bytes.begin(), digest.bytes.end());
    return out;
}

Receipt make_receipt(const std::string& provider_id, const Digest& digest, const SigningKey& key) {
    Receipt r;
    r.provider_id = provider_id;
    r.digest = digest;
    r.signature = key.sign(receipt_signing_bytes(digest));
    return r;
}

bool verify_receipt(const Receipt& receipt, const VerifyKey& provider_key) {
    return provider_key.verify(receipt_signing_bytes(receipt.digest), receipt.signature);
}

}  // namespace dimsim
