#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dimsim/bytes.hpp"
#include "dimsim/digest.hpp"
#include "dimsim/immustore.hpp"
#include "dimsim/keys.hpp"

namespace dimsim::pdl {

// Minimal permissioned ledger: an append-only block sequence admitted under a
// ⌈2n/3⌉ participant-signature quorum. One block per accepted submission; no
// consensus protocol, a single sequencer orders blocks.
//
// On-disk format (bit-exact, magic "DIMP" 0x01):
//   header: [2B BE participant count] then per participant
//           [1B id len][id][1B role][32B verify key]
//   per block: [4B BE block length][block bytes][32B block hash]
// Block bytes: [8B BE height][32B prev hash][2B BE record count][records]
//              [1B sig count][per sig: 1B id len][id][64B signature].

enum class Role : std::uint8_t {
    SolutionProvider = 0x01,
    DeviceVendor = 0x02,
    ServiceProvider = 0x03,
};

std::string_view role_name(Role role);

struct Participant {
    std::string id;
    Role role = Role::ServiceProvider;
    VerifyKey key;
};

enum class ContractKind : std::uint8_t {
    BenchmarkRegistration = 0x01,
    SlaReference = 0x02,
    SoftwareUpdateExecution = 0x03,
};

std::string_view contract_kind_name(ContractKind kind);

struct ContractRecord {
    ContractKind kind = ContractKind::BenchmarkRegistration;
    std::string software_id;
    Digest payload_hash;
    std::optional<Receipt> confirmation;  // required for SoftwareUpdateExecution
    std::string submitted_by;

    bool operator==(const ContractRecord&) const = default;
};

// Injective encoding; this is what participants sign.
Bytes canonical_contract_bytes(const ContractRecord& record);
Bytes contract_signing_bytes(const std::vector<ContractRecord>& records);

struct BlockSignature {
    std::string participant_id;
    Signature signature{};

    bool operator==(const BlockSignature&) const = default;
};

struct Block {
    std::uint64_t height = 0;
    Digest prev_block_hash;
    std::vector<ContractRecord> records;  // nonempty; one per submission here
    std::vector<BlockSignature> signatures;

    bool operator==(const Block&) const = default;
};

Digest block_hash(const Block& block);

struct LedgerAudit {
    bool ok = true;
    std::uint64_t first_bad_height = 0;
    std::string detail;
};

class Ledger {
public:
    // Creates the file with the given consortium, or reloads an existing file
    // (in which case `participants` must be empty or match the header).
    static Ledger open(const std::string& path, std::vector<Participant> participants,
                       bool fsync_each_block = true);

    Ledger(Ledger&&) noexcept;
    Ledger& operator=(Ledger&&) noexcept;
    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;
    ~Ledger();

    const std::vector<Participant>& participants() const { return participants_; }
    const std::vector<Block>& blocks() const { return blocks_; }

    // ⌈2n/3⌉ over the registered consortium.
    std::size_t quorum_threshold() const { return (2 * participants_.size() + 2) / 3; }

    const Participant* find_participant(const std::string& id) const;

    // Validates every signature over the canonical record encoding and
    // appends one block when the distinct-signer quorum is met.
    const Block& submit_contract(const ContractRecord& record,
                                 const std::vector<BlockSignature>& signatures);

    // payload_hash of the highest-block BenchmarkRegistration or
    // SoftwareUpdateExecution for the id.
    std::optional<Digest> query_benchmark(const std::string& software_id) const;

    // Same query pinned to the first `height` blocks only.
    std::optional<Digest> query_benchmark_at(const std::string& software_id,
                                             std::uint64_t height) const;

    // Whether an accepted SoftwareUpdateExecution matches (software_id, new_hash).
    bool has_update_contract(const std::string& software_id, const Digest& new_hash) const;

    // Vendor-submitted update execution carrying the solution provider's
    // confirmation receipt over new_hash.
    const Block& execute_update_contract(const std::string& software_id, const Digest& new_hash,
                                         const Receipt& confirmation,
                                         const std::string& submitted_by,
                                         const std::vector<BlockSignature>& signatures);

    // Re-walk all blocks: dense heights, hash links, signature quorums.
    LedgerAudit verify() const;

    // Verification and dump from the file alone.
    static LedgerAudit verify_file(const std::string& path);
    static std::string dump_file(const std::string& path);

    // Convenience for fixtures: sign a record set with one key.
    static BlockSignature sign_records(const std::vector<ContractRecord>& records,
                                       const std::string& participant_id, const SigningKey& key);

private:
    Ledger() = default;

    void check_signatures(const std::vector<ContractRecord>& records,
                          const std::vector<BlockSignature>& signatures) const;
    void persist_block(const Block& block);

    std::string path_;
    int fd_ = -1;
    bool fsync_each_block_ = true;
    std::vector<Participant> participants_;
    std::vector<Block> blocks_;
};

}  // namespace dimsim::pdl
