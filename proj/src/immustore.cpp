#include "dimsim/immustore.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <utility>

#include "dimsim/error.hpp"
#include "dimsim/measure.hpp"

namespace dimsim::immustore {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'M', 'S'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kMaxEntryLen = 1 << 24;  // parser sanity bound

Digest chain_step(const Digest& prev, const Digest& record_hash) {
    Bytes preimage;
    preimage.reserve(2 * Digest::kSize);
    preimage.insert(preimage.end(), prev.bytes.begin(), prev.bytes.end());
    preimage.insert(preimage.end(), record_hash.bytes.begin(), record_hash.bytes.end());
    return measure::hash_bytes(preimage);
}

Record decode_record(std::span<const std::uint8_t> canonical) {
    ByteReader r(canonical);
    Record rec;
    std::uint32_t key_len = r.u32be();
    if (key_len == 0) throw Error(Errc::invalid_field, "record key is empty");
    auto key = r.raw(key_len);
    rec.key.assign(key.begin(), key.end());
    std::uint32_t val_len = r.u32be();
    auto val = r.raw(val_len);
    rec.value.assign(val.begin(), val.end());
    rec.timestamp_us = r.u64be();
    r.expect_done();
    return rec;
}

struct ParsedFile {
    std::vector<Record> records;
    std::vector<ChainEntry> entries;
};

// Walks the file bytes, recomputing the chain. Returns the first bad index in
// `result` when anything (framing, record hash, chain hash) is off.
ParsedFile parse_and_verify(const Bytes& raw, AuditResult& result) {
    ParsedFile parsed;
    result = AuditResult{};
    if (raw.size() < 5 || std::memcmp(raw.data(), kMagic, 4) != 0 || raw[4] != kVersion) {
        result = {false, 0, "bad file header"};
        return parsed;
    }
    std::size_t pos = 5;
    Digest prev = Digest::zero();
    std::uint64_t index = 0;
    while (pos < raw.size()) {
        auto fail = [&](const std::string& what) {
            result = {false, index, what};
        };
        if (raw.size() - pos < 4) {
            fail("truncated entry length");
            return parsed;
        }
        std::uint32_t len = (std::uint32_t(raw[pos]) << 24) | (std::uint32_t(raw[pos + 1]) << 16) |
                            (std::uint32_t(raw[pos + 2]) << 8) | std::uint32_t(raw[pos + 3]);
        pos += 4;
        if (len > kMaxEntryLen || raw.size() - pos < len + Digest::kSize) {
            fail("truncated entry body");
            return parsed;
        }
        std::span<const std::uint8_t> canonical(raw.data() + pos, len);
        pos += len;
        Digest stored_chain = Digest::from_span(std::span(raw.data() + pos, Digest::kSize));
        pos += Digest::kSize;

        Record rec;
        try {
            rec = decode_record(canonical);
        } catch (const Error& e) {
            fail(std::string("undecodable record: ") + e.what());
            return parsed;
        }
        Digest record_hash = measure::hash_bytes(canonical);
        Digest expect_chain = chain_step(prev, record_hash);
        if (expect_chain != stored_chain) {
            fail("chain hash mismatch");
            return parsed;
        }
        parsed.records.push_back(std::move(rec));
        parsed.entries.push_back({index, record_hash, expect_chain});
        prev = expect_chain;
        ++index;
    }
    return parsed;
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

}  // namespace

Bytes canonical_record_bytes(const Record& record) {
    if (record.key.empty()) throw Error(Errc::invalid_field, "record key is empty");
    ByteWriter w;
    w.u32be(static_cast<std::uint32_t>(record.key.size()));
    w.raw(to_bytes(record.key));
    w.u32be(static_cast<std::uint32_t>(record.value.size()));
    w.raw(record.value);
    w.u64be(record.timestamp_us);
    return w.take();
}

bool verify_proof(const InclusionProof& proof, const RootDigest& root) {
    if (proof.index + 1 + proof.suffix.size() != root.entry_count) return false;
    if (proof.head_hash != root.head_hash) return false;
    Digest acc = chain_step(proof.prev_chain_hash, proof.record_hash);
    for (const Digest& record_hash : proof.suffix) {
        acc = chain_step(acc, record_hash);
    }
    return acc == root.head_hash;
}

Store Store::open(const std::string& path, bool fsync_each_append) {
    Store store;
    store.path_ = path;
    store.fsync_each_append_ = fsync_each_append;

    bool fresh = ::access(path.c_str(), F_OK) != 0;
    store.fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (store.fd_ < 0) {
        throw Error(Errc::storage_failure, "cannot open " + path + ": " + std::strerror(errno));
    }
    if (fresh) {
        Bytes header(kMagic, kMagic + 4);
        header.push_back(kVersion);
        write_all(store.fd_, header, path);
        if (fsync_each_append) ::fsync(store.fd_);
    } else {
        AuditResult result;
        ParsedFile parsed = parse_and_verify(read_file(path), result);
        if (!result.ok) {
            ::close(store.fd_);
            throw Error(Errc::storage_failure,
                        path + " fails chain verification at index " +
                            std::to_string(result.first_bad_index) + " (" + result.detail + ")");
        }
        store.records_ = std::move(parsed.records);
        store.entries_ = std::move(parsed.entries);
        for (std::uint64_t i = 0; i < store.records_.size(); ++i) {
            store.by_key_[store.records_[i].key].push_back(i);
        }
    }
    return store;
}

Store::Store(Store&& other) noexcept {
    *this = std::move(other);
}

Store& Store::operator=(Store&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        path_ = std::move(other.path_);
        fd_ = std::exchange(other.fd_, -1);
        fsync_each_append_ = other.fsync_each_append_;
        records_ = std::move(other.records_);
        entries_ = std::move(other.entries_);
        by_key_ = std::move(other.by_key_);
    }
    return *this;
}

Store::~Store() {
    if (fd_ >= 0) ::close(fd_);
}

std::pair<std::uint64_t, RootDigest> Store::append(const Record& record) {
    Bytes canonical = canonical_record_bytes(record);
    Digest record_hash = measure::hash_bytes(canonical);
    Digest prev = entries_.empty() ? Digest::zero() : entries_.back().chain_hash;
    Digest chain = chain_step(prev, record_hash);

    ByteWriter w;
    w.u32be(static_cast<std::uint32_t>(canonical.size()));
    w.raw(canonical);
    w.raw(chain.bytes);
    write_all(fd_, w.bytes(), path_);
    if (fsync_each_append_ && ::fsync(fd_) != 0) {
        throw Error(Errc::storage_failure, "fsync " + path_ + ": " + std::strerror(errno));
    }

    std::uint64_t index = entries_.size();
    entries_.push_back({index, record_hash, chain});
    records_.push_back(record);
    by_key_[record.key].push_back(index);
    return {index, root()};
}

std::optional<std::pair<Record, InclusionProof>> Store::get_latest(const std::string& key) const {
    auto it = by_key_.find(key);
    if (it == by_key_.end() || it->second.empty()) return std::nullopt;
    std::uint64_t index = it->second.back();

    InclusionProof proof;
    proof.index = index;
    proof.record_hash = entries_[index].record_hash;
    proof.prev_chain_hash = index == 0 ? Digest::zero() : entries_[index - 1].chain_hash;
    proof.suffix.reserve(entries_.size() - index - 1);
    for (std::uint64_t i = index + 1; i < entries_.size(); ++i) {
        proof.suffix.push_back(entries_[i].record_hash);
    }
    proof.head_hash = entries_.back().chain_hash;
    return std::make_pair(records_[index], proof);
}

std::vector<Record> Store::history(const std::string& key) const {
    std::vector<Record> out;
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return out;
    out.reserve(it->second.size());
    for (std::uint64_t index : it->second) out.push_back(records_[index]);
    return out;
}

RootDigest Store::root() const {
    RootDigest r;
    r.entry_count = entries_.size();
    r.head_hash = entries_.empty() ? Digest::zero() : entries_.back().chain_hash;
    return r;
}

AuditResult Store::audit() const {
    AuditResult result = audit_file(path_);
    if (!result.ok) return result;
    // The file must still reach this handle's head; a truncated tail is
    // otherwise a valid shorter chain.
    AuditResult head_check;
    ParsedFile parsed = parse_and_verify(read_file(path_), head_check);
    if (parsed.entries.size() != entries_.size()) {
        return {false, parsed.entries.size(), "persisted entry count behind live head"};
    }
    if (!entries_.empty() && parsed.entries.back().chain_hash != entries_.back().chain_hash) {
        return {false, entries_.size() - 1, "persisted head hash differs from live head"};
    }
    return result;
}

AuditResult Store::audit_file(const std::string& path) {
    AuditResult result;
    parse_and_verify(read_file(path), result);
    return result;
}

}  // namespace dimsim::immustore
