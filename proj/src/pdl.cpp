#include "dimsim/pdl.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "dimsim/error.hpp"
#include "dimsim/measure.hpp"
#include "dimsim/wire.hpp"

namespace dimsim::pdl {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'M', 'P'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::string_view kContractContext = "DIMSIM.contract";
constexpr std::size_t kMaxBlockLen = 1 << 24;

Role to_role(std::uint8_t byte) {
    if (byte < 0x01 || byte > 0x03) throw Error(Errc::invalid_field, "unknown participant role");
    return static_cast<Role>(byte);
}

ContractKind to_contract_kind(std::uint8_t byte) {
    if (byte < 0x01 || byte > 0x03) throw Error(Errc::invalid_field, "unknown contract kind");
    return static_cast<ContractKind>(byte);
}

void put_string8(ByteWriter& w, const std::string& s, const char* field) {
    if (s.empty() || s.size() > 255) {
        throw Error(Errc::invalid_field, std::string(field) + " must be 1-255 chars");
    }
    w.u8(static_cast<std::uint8_t>(s.size()));
    w.raw(to_bytes(s));
}

std::string read_string8(ByteReader& r, const char* field) {
    std::size_t n = r.u8();
    if (n == 0) throw Error(Errc::invalid_field, std::string(field) + " is empty");
    auto raw = r.raw(n);
    return std::string(raw.begin(), raw.end());
}

Bytes encode_block_body(const Block& block) {
    ByteWriter w;
    w.u64be(block.height);
    w.raw(block.prev_block_hash.bytes);
    if (block.records.empty() || block.records.size() > 0xFFFF) {
        throw Error(Errc::invalid_field, "block must carry 1-65535 records");
    }
    w.u16be(static_cast<std::uint16_t>(block.records.size()));
    for (const auto& rec : block.records) w.raw(canonical_contract_bytes(rec));
    return w.take();
}

Bytes encode_block(const Block& block) {
    ByteWriter w;
    w.raw(encode_block_body(block));
    if (block.signatures.size() > 255) throw Error(Errc::invalid_field, "too many signatures");
    w.u8(static_cast<std::uint8_t>(block.signatures.size()));
    for (const auto& sig : block.signatures) {
        put_string8(w, sig.participant_id, "participant id");
        w.raw(std::span(sig.signature.data(), sig.signature.size()));
    }
    return w.take();
}

ContractRecord read_contract(ByteReader& r) {
    ContractRecord rec;
    rec.kind = to_contract_kind(r.u8());
    rec.software_id = read_string8(r, "software_id");
    rec.payload_hash = Digest::from_span(r.raw(Digest::kSize));
    std::uint8_t has_receipt = r.u8();
    if (has_receipt > 0x01) throw Error(Errc::invalid_field, "receipt flag must be 0 or 1");
    if (has_receipt == 0x01) {
        Receipt receipt;
        receipt.provider_id = read_string8(r, "provider id");
        receipt.digest = Digest::from_span(r.raw(Digest::kSize));
        auto sig = r.raw(receipt.signature.size());
        std::copy(sig.begin(), sig.end(), receipt.signature.begin());
        rec.confirmation = std::move(receipt);
    }
    rec.submitted_by = read_string8(r, "submitted_by");
    return rec;
}

Block decode_block(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    Block block;
    block.height = r.u64be();
    block.prev_block_hash = Digest::from_span(r.raw(Digest::kSize));
    std::size_t record_count = r.u16be();
    if (record_count == 0) throw Error(Errc::invalid_field, "block without records");
    for (std::size_t i = 0; i < record_count; ++i) block.records.push_back(read_contract(r));
    std::size_t sig_count = r.u8();
    for (std::size_t i = 0; i < sig_count; ++i) {
        BlockSignature sig;
        sig.participant_id = read_string8(r, "participant id");
        auto raw = r.raw(sig.signature.size());
        std::copy(raw.begin(), raw.end(), sig.signature.begin());
        block.signatures.push_back(std::move(sig));
    }
    r.expect_done();
    return block;
}

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::storage_failure, "cannot open " + path);
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_all(int fd, const Bytes& data, const std::string& path) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(Errc::storage_failure, "write to " + path + ": " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

Bytes encode_header(const std::vector<Participant>& participants) {
    ByteWriter w;
    w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.u8(kVersion);
    w.u16be(static_cast<std::uint16_t>(participants.size()));
    for (const auto& p : participants) {
        put_string8(w, p.id, "participant id");
        w.u8(static_cast<std::uint8_t>(p.role));
        w.raw(std::span(p.key.bytes.data(), p.key.bytes.size()));
    }
    return w.take();
}

struct ParsedLedger {
    std::vector<Participant> participants;
    std::vector<Block> blocks;
};

std::size_t quorum_for(std::size_t participant_count) {
    return (2 * participant_count + 2) / 3;
}

bool signatures_satisfy(const std::vector<Participant>& participants, const Block& block,
                        std::string* why) {
    Bytes message = contract_signing_bytes(block.records);
    std::set<std::string> valid_signers;
    for (const auto& sig : block.signatures) {
        auto it = std::find_if(participants.begin(), participants.end(),
                               [&](const Participant& p) { return p.id == sig.participant_id; });
        if (it == participants.end()) {
            if (why) *why = "signature by unregistered participant " + sig.participant_id;
            return false;
        }
        if (!it->key.verify(message, sig.signature)) {
            if (why) *why = "invalid signature by " + sig.participant_id;
            return false;
        }
        valid_signers.insert(sig.participant_id);
    }
    if (valid_signers.size() < quorum_for(participants.size())) {
        if (why) {
            *why = "quorum not met: " + std::to_string(valid_signers.size()) + " of " +
                   std::to_string(quorum_for(participants.size())) + " required signers";
        }
        return false;
    }
    return true;
}

// Full file walk: framing, hash links, dense heights, signature quorums.
ParsedLedger parse_and_verify(const Bytes& raw, LedgerAudit& audit) {
    ParsedLedger parsed;
    audit = LedgerAudit{};
    auto fail = [&](std::uint64_t height, const std::string& what) {
        audit = {false, height, what};
    };
    ByteReader r(raw);
    try {
        auto magic = r.raw(4);
        if (std::memcmp(magic.data(), kMagic, 4) != 0 || r.u8() != kVersion) {
            fail(0, "bad file header");
            return parsed;
        }
        std::size_t participant_count = r.u16be();
        for (std::size_t i = 0; i < participant_count; ++i) {
            Participant p;
            p.id = read_string8(r, "participant id");
            p.role = to_role(r.u8());
            auto key = r.raw(p.key.bytes.size());
            std::copy(key.begin(), key.end(), p.key.bytes.begin());
            parsed.participants.push_back(std::move(p));
        }
    } catch (const Error& e) {
        fail(0, std::string("unreadable header: ") + e.what());
        return parsed;
    }

    Digest prev = Digest::zero();
    std::uint64_t height = 0;
    while (!r.done()) {
        try {
            std::uint32_t len = r.u32be();
            if (len > kMaxBlockLen) throw Error(Errc::invalid_field, "oversized block");
            auto block_bytes = r.raw(len);
            Digest stored_hash = Digest::from_span(r.raw(Digest::kSize));
            Block block = decode_block(block_bytes);
            if (block.height != height) throw Error(Errc::invalid_field, "non-dense block height");
            if (block.prev_block_hash != prev) {
                throw Error(Errc::invalid_field, "previous-block hash mismatch");
            }
            Digest computed = measure::hash_bytes(block_bytes);
            if (computed != stored_hash) throw Error(Errc::invalid_field, "block hash mismatch");
            std::string why;
            if (!signatures_satisfy(parsed.participants, block, &why)) {
                throw Error(Errc::quorum_not_met, why);
            }
            parsed.blocks.push_back(std::move(block));
            prev = computed;
            ++height;
        } catch (const Error& e) {
            fail(height, e.what());
            return parsed;
        }
    }
    return parsed;
}

}  // namespace

std::string_view role_name(Role role) {
    switch (role) {
        case Role::SolutionProvider: return "SolutionProvider";
        case Role::DeviceVendor: return "DeviceVendor";
        case Role::ServiceProvider: return "ServiceProvider";
    }
    return "?";
}

std::string_view contract_kind_name(ContractKind kind) {
    switch (kind) {
        case ContractKind::BenchmarkRegistration: return "BenchmarkRegistration";
        case ContractKind::SlaReference: return "SlaReference";
        case ContractKind::SoftwareUpdateExecution: return "SoftwareUpdateExecution";
    }
    return "?";
}

Bytes canonical_contract_bytes(const ContractRecord& record) {
    if (record.kind == ContractKind::SoftwareUpdateExecution && !record.confirmation) {
        throw Error(Errc::bad_confirmation, "update execution requires a confirmation receipt");
    }
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(record.kind));
    put_string8(w, record.software_id, "software_id");
    w.raw(record.payload_hash.bytes);
    w.u8(record.confirmation ? 0x01 : 0x00);
    if (record.confirmation) w.raw(wire::encode_receipt(*record.confirmation));
    put_string8(w, record.submitted_by, "submitted_by");
    return w.take();
}

Bytes contract_signing_bytes(const std::vector<ContractRecord>& records) {
    Bytes out(kContractContext.begin(), kContractContext.end());
    out.push_back(0x00);
    for (const auto& rec : records) {
        Bytes canonical = canonical_contract_bytes(rec);
        out.insert(out.end(), canonical.begin(), canonical.end());
    }
    return out;
}

Digest block_hash(const Block& block) {
    return measure::hash_bytes(encode_block(block));
}

Ledger Ledger::open(const std::string& path, std::vector<Participant> participants,
                    bool fsync_each_block) {
    Ledger ledger;
    ledger.path_ = path;
    ledger.fsync_each_block_ = fsync_each_block;

    bool fresh = ::access(path.c_str(), F_OK) != 0;
    if (fresh && participants.empty()) {
        throw Error(Errc::config_invalid, "a new ledger needs at least one participant");
    }
    ledger.fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (ledger.fd_ < 0) {
        throw Error(Errc::storage_failure, "cannot open " + path + ": " + std::strerror(errno));
    }
    if (fresh) {
        std::set<std::string> ids;
        for (const auto& p : participants) {
            if (!ids.insert(p.id).second) {
                ::close(ledger.fd_);
                throw Error(Errc::config_invalid, "duplicate participant id " + p.id);
            }
        }
        ledger.participants_ = std::move(participants);
        write_all(ledger.fd_, encode_header(ledger.participants_), path);
        if (fsync_each_block) ::fsync(ledger.fd_);
    } else {
        LedgerAudit audit;
        ParsedLedger parsed = parse_and_verify(read_file(path), audit);
        if (!audit.ok) {
            ::close(ledger.fd_);
            throw Error(Errc::storage_failure, path + " fails verification at height " +
                                                   std::to_string(audit.first_bad_height) + " (" +
                                                   audit.detail + ")");
        }
        if (!participants.empty()) {
            auto same = [&] {
                if (participants.size() != parsed.participants.size()) return false;
                for (std::size_t i = 0; i < participants.size(); ++i) {
                    if (participants[i].id != parsed.participants[i].id ||
                        participants[i].role != parsed.participants[i].role ||
                        participants[i].key != parsed.participants[i].key) {
                        return false;
                    }
                }
                return true;
            };
            if (!same()) {
                ::close(ledger.fd_);
                throw Error(Errc::config_invalid, "participants differ from ledger header");
            }
        }
        ledger.participants_ = std::move(parsed.participants);
        ledger.blocks_ = std::move(parsed.blocks);
    }
    return ledger;
}

Ledger::Ledger(Ledger&& other) noexcept {
    *this = std::move(other);
}

Ledger& Ledger::operator=(Ledger&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        path_ = std::move(other.path_);
        fd_ = std::exchange(other.fd_, -1);
        fsync_each_block_ = other.fsync_each_block_;
        participants_ = std::move(other.participants_);
        blocks_ = std::move(other.blocks_);
    }
    return *this;
}

Ledger::~Ledger() {
    if (fd_ >= 0) ::close(fd_);
}

const Participant* Ledger::find_participant(const std::string& id) const {
    auto it = std::find_if(participants_.begin(), participants_.end(),
                           [&](const Participant& p) { return p.id == id; });
    return it == participants_.end() ? nullptr : &*it;
}

void Ledger::check_signatures(const std::vector<ContractRecord>& records,
                              const std::vector<BlockSignature>& signatures) const {
    Bytes message = contract_signing_bytes(records);
    std::set<std::string> valid_signers;
    for (const auto& sig : signatures) {
        const Participant* p = find_participant(sig.participant_id);
        if (!p) throw Error(Errc::unknown_signer, sig.participant_id);
        if (!p->key.verify(message, sig.signature)) {
            throw Error(Errc::bad_signature, "signature by " + sig.participant_id);
        }
        valid_signers.insert(sig.participant_id);
    }
    if (valid_signers.size() < quorum_threshold()) {
        throw Error(Errc::quorum_not_met,
                    std::to_string(valid_signers.size()) + " of " +
                        std::to_string(quorum_threshold()) + " required signatures");
    }
}

const Block& Ledger::submit_contract(const ContractRecord& record,
                                     const std::vector<BlockSignature>& signatures) {
    check_signatures({record}, signatures);
    Block block;
    block.height = blocks_.size();
    block.prev_block_hash = blocks_.empty() ? Digest::zero() : block_hash(blocks_.back());
    block.records = {record};
    block.signatures = signatures;
    persist_block(block);
    blocks_.push_back(std::move(block));
    return blocks_.back();
}

std::optional<Digest> Ledger::query_benchmark(const std::string& software_id) const {
    return query_benchmark_at(software_id, blocks_.size());
}

std::optional<Digest> Ledger::query_benchmark_at(const std::string& software_id,
                                                 std::uint64_t height) const {
    height = std::min<std::uint64_t>(height, blocks_.size());
    for (std::uint64_t h = height; h > 0; --h) {
        for (auto it = blocks_[h - 1].records.rbegin(); it != blocks_[h - 1].records.rend(); ++it) {
            if (it->software_id != software_id) continue;
            if (it->kind == ContractKind::BenchmarkRegistration ||
                it->kind == ContractKind::SoftwareUpdateExecution) {
                return it->payload_hash;
            }
        }
    }
    return std::nullopt;
}

bool Ledger::has_update_contract(const std::string& software_id, const Digest& new_hash) const {
    for (const auto& block : blocks_) {
        for (const auto& rec : block.records) {
            if (rec.kind == ContractKind::SoftwareUpdateExecution &&
                rec.software_id == software_id && rec.payload_hash == new_hash) {
                return true;
            }
        }
    }
    return false;
}

const Block& Ledger::execute_update_contract(const std::string& software_id,
                                             const Digest& new_hash, const Receipt& confirmation,
                                             const std::string& submitted_by,
                                             const std::vector<BlockSignature>& signatures) {
    const Participant* vendor = find_participant(submitted_by);
    if (!vendor) throw Error(Errc::unknown_signer, submitted_by);
    if (vendor->role != Role::DeviceVendor) {
        throw Error(Errc::wrong_role, "updates are submitted by device vendors");
    }
    const Participant* provider = find_participant(confirmation.provider_id);
    if (!provider || provider->role != Role::SolutionProvider) {
        throw Error(Errc::bad_confirmation, "confirmation must come from a solution provider");
    }
    if (confirmation.digest != new_hash || !verify_receipt(confirmation, provider->key)) {
        throw Error(Errc::bad_confirmation, "confirmation receipt does not cover the new hash");
    }
    ContractRecord record{ContractKind::SoftwareUpdateExecution, software_id, new_hash,
                          confirmation, submitted_by};
    return submit_contract(record, signatures);
}

LedgerAudit Ledger::verify() const {
    LedgerAudit audit;
    Digest prev = Digest::zero();
    for (std::uint64_t h = 0; h < blocks_.size(); ++h) {
        const Block& block = blocks_[h];
        if (block.height != h) return {false, h, "non-dense block height"};
        if (block.prev_block_hash != prev) return {false, h, "previous-block hash mismatch"};
        std::string why;
        if (!signatures_satisfy(participants_, block, &why)) return {false, h, why};
        prev = block_hash(block);
    }
    return audit;
}

LedgerAudit Ledger::verify_file(const std::string& path) {
    LedgerAudit audit;
    parse_and_verify(read_file(path), audit);
    return audit;
}

std::string Ledger::dump_file(const std::string& path) {
    LedgerAudit audit;
    ParsedLedger parsed = parse_and_verify(read_file(path), audit);
    std::ostringstream out;
    out << "participants (" << parsed.participants.size() << "):\n";
    for (const auto& p : parsed.participants) {
        out << "  " << p.id << "  role=" << role_name(p.role) << "  key=" << to_hex(p.key.bytes)
            << "\n";
    }
    for (const auto& block : parsed.blocks) {
        out << "block " << block.height << "  prev=" << block.prev_block_hash.short_hex()
            << "  hash=" << block_hash(block).short_hex() << "\n";
        for (const auto& rec : block.records) {
            out << "  " << contract_kind_name(rec.kind) << "  software_id=" << rec.software_id
                << "  payload=" << rec.payload_hash.short_hex() << "  by=" << rec.submitted_by;
            if (rec.confirmation) out << "  confirmed-by=" << rec.confirmation->provider_id;
            out << "\n";
        }
        out << "  signatures:";
        for (const auto& sig : block.signatures) out << " " << sig.participant_id;
        out << "\n";
    }
    if (!audit.ok) {
        out << "VERIFICATION FAILED at height " << audit.first_bad_height << ": " << audit.detail
            << "\n";
    } else {
        out << "verification: ok (" << parsed.blocks.size() << " blocks)\n";
    }
    return out.str();
}

BlockSignature Ledger::sign_records(const std::vector<ContractRecord>& records,
                                    const std::string& participant_id, const SigningKey& key) {
    return {participant_id, key.sign(contract_signing_bytes(records))};
}

void Ledger::persist_block(const Block& block) {
    Bytes encoded = encode_block(block);
    ByteWriter w;
    w.u32be(static_cast<std::uint32_t>(encoded.size()));
    w.raw(encoded);
    w.raw(measure::hash_bytes(encoded).bytes);
    write_all(fd_, w.bytes(), path_);
    if (fsync_each_block_ && ::fsync(fd_) != 0) {
        throw Error(Errc::storage_failure, "fsync " + path_ + ": " + std::strerror(errno));
    }
}

}  // namespace dimsim::pdl
