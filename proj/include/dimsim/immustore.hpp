#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dimsim/bytes.hpp"
#include "dimsim/digest.hpp"

namespace dimsim::immustore {

// Tamper-evident append-only key-value store. Entries form a linear hash
// chain: record_hash = H(canonical record), chain_hash = H(prev ∥ record_hash)
// with a 32-zero-byte genesis. The persisted file alone suffices to re-verify
// the whole chain.
//
// On-disk format (bit-exact):
//   "DIMS" 0x01
//   per entry: [4B BE len of canonical record][canonical record][32B chain_hash]
// Canonical record: [4B BE key len][key][4B BE value len][value][8B BE timestamp µs].

struct Record {
    std::string key;       // nonempty
    Bytes value;
    std::uint64_t timestamp_us = 0;

    bool operator==(const Record&) const = default;
};

Bytes canonical_record_bytes(const Record& record);

struct ChainEntry {
    std::uint64_t index = 0;
    Digest record_hash;
    Digest chain_hash;
};

// Snapshot of the chain head. entry_count never decreases.
struct RootDigest {
    std::uint64_t entry_count = 0;
    Digest head_hash = Digest::zero();  // genesis when empty

    bool operator==(const RootDigest&) const = default;
};

// Proof that a record sits in the chain under a given root: replay
// H(prev_chain_hash ∥ record_hash), fold the suffix of later record hashes,
// land on head_hash.
struct InclusionProof {
    std::uint64_t index = 0;
    Digest record_hash;
    Digest prev_chain_hash;       // chain hash of index-1; genesis for index 0
    std::vector<Digest> suffix;   // record hashes of index+1 .. head
    Digest head_hash;
};

bool verify_proof(const InclusionProof& proof, const RootDigest& root);

struct AuditResult {
    bool ok = true;
    std::uint64_t first_bad_index = 0;
    std::string detail;
};

class Store {
public:
    // Creates the file if absent, replays it if present.
    static Store open(const std::string& path, bool fsync_each_append = true);

    Store(Store&&) noexcept;
    Store& operator=(Store&&) noexcept;
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;
    ~Store();

    // Durable before return (fsync mode). Returns the new entry's index and
    // the root reflecting it.
    std::pair<std::uint64_t, RootDigest> append(const Record& record);

    // Highest-index record for the key plus a proof valid against root().
    std::optional<std::pair<Record, InclusionProof>> get_latest(const std::string& key) const;

    // All records for the key in index order; empty when absent.
    std::vector<Record> history(const std::string& key) const;

    RootDigest root() const;
    std::uint64_t size() const { return records_.size(); }
    const std::string& path() const { return path_; }

    // Re-reads the persisted file and recomputes the full chain; also checks
    // the file still reaches this handle's head (catches truncation).
    AuditResult audit() const;

    // Chain audit from the file alone (external auditor entry point).
    static AuditResult audit_file(const std::string& path);

private:
    Store() = default;

    std::string path_;
    int fd_ = -1;
    bool fsync_each_append_ = true;
    std::vector<Record> records_;
    std::vector<ChainEntry> entries_;
    std::unordered_map<std::string, std::vector<std::uint64_t>> by_key_;
};

}  // namespace dimsim::immustore
