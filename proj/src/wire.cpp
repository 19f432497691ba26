#include "dimsim/wire.hpp"

#include <algorithm>

#include "dimsim/error.hpp"

namespace dimsim::wire {

namespace {

constexpr std::size_t kIdMin = 5;
constexpr std::size_t kIdMax = 7;
constexpr std::size_t kTsMin = 7;
constexpr std::size_t kTsMax = 13;

// Minimal big-endian byte length of v, zero-padded to at least kTsMin.
std::size_t timestamp_encoded_len(std::uint64_t v) {
    std::size_t n = 1;
    while (n < 8 && (v >> (8 * n)) != 0) ++n;
    return std::max(n, kTsMin);
}

void put_timestamp(ByteWriter& w, std::uint64_t v) {
    std::size_t n = timestamp_encoded_len(v);
    w.u8(static_cast<std::uint8_t>(n));
    for (std::size_t i = n; i > 0; --i) {
        w.u8(static_cast<std::uint8_t>(v >> (8 * (i - 1))));
    }
}

std::uint64_t read_timestamp(ByteReader& r) {
    std::size_t n = r.u8();
    if (n < kTsMin || n > kTsMax) {
        throw Error(Errc::invalid_field, "timestamp length byte outside 7-13");
    }
    auto raw = r.raw(n);
    // A canonical value fits 8 bytes; longer encodings would need nonzero
    // leading bytes, which a 64-bit timestamp cannot produce.
    if (n > 8) throw Error(Errc::invalid_field, "timestamp does not fit 64 bits");
    std::uint64_t v = 0;
    for (std::uint8_t b : raw) v = (v << 8) | b;
    if (timestamp_encoded_len(v) != n) {
        throw Error(Errc::invalid_field, "non-canonical timestamp length");
    }
    return v;
}

void put_prefixed_id(ByteWriter& w, const Bytes& id, const char* field) {
    if (id.size() < kIdMin || id.size() > kIdMax) {
        throw Error(Errc::invalid_field, std::string(field) + " must be 5-7 bytes");
    }
    w.u8(static_cast<std::uint8_t>(id.size()));
    w.raw(id);
}

Bytes read_prefixed_id(ByteReader& r, const char* field) {
    std::size_t n = r.u8();
    if (n < kIdMin || n > kIdMax) {
        throw Error(Errc::invalid_field, std::string(field) + " length byte outside 5-7");
    }
    auto raw = r.raw(n);
    return Bytes(raw.begin(), raw.end());
}

Digest read_digest(ByteReader& r) {
    return Digest::from_span(r.raw(Digest::kSize));
}

// Packet decoders report a bad action byte as InvalidField; UnknownCode is
// reserved for the action-table lookup itself.
ActionCode read_action_code(std::uint8_t byte) {
    if (byte > kActionCodeMax) {
        throw Error(Errc::invalid_field, "action code outside 0x00-0x07");
    }
    return static_cast<ActionCode>(byte);
}

}  // namespace

std::string_view action_name(ActionCode code) {
    switch (code) {
        case ActionCode::Null: return "null";
        case ActionCode::InitiateInvestigation: return "Initiate investigation";
        case ActionCode::RestrictExecution: return "Restrict application or software execution";
        case ActionCode::IsolateDevice: return "Isolate device";
        case ActionCode::ContainDevice: return "Contain device";
        case ActionCode::RevokeDevice: return "Revoke device";
        case ActionCode::StopAndQuarantineFile: return "Stop and quarantine a file";
        case ActionCode::RequestDeeperInvestigation: return "Request deeper investigation";
    }
    throw Error(Errc::unknown_code, "action code outside 0x00-0x07");
}

ActionCode to_action_code(std::uint8_t byte) {
    if (byte > kActionCodeMax) throw Error(Errc::unknown_code, "action code outside 0x00-0x07");
    return static_cast<ActionCode>(byte);
}

Bytes encode_dispute(const DisputePacket& packet) {
    ByteWriter w;
    put_prefixed_id(w, packet.device_id, "device_id");
    put_prefixed_id(w, packet.applet_id, "applet_id");
    put_timestamp(w, packet.timestamp_us);
    w.raw(packet.current_hash.bytes);
    w.raw(packet.previous_hash.bytes);
    // 32-byte action field: byte 0 is the code, bytes 1-31 reserved zero.
    w.u8(static_cast<std::uint8_t>(packet.action_taken));
    for (int i = 0; i < 31; ++i) w.u8(0x00);
    return w.take();
}

DisputePacket decode_dispute(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    DisputePacket p;
    p.device_id = read_prefixed_id(r, "device_id");
    p.applet_id = read_prefixed_id(r, "applet_id");
    p.timestamp_us = read_timestamp(r);
    p.current_hash = read_digest(r);
    p.previous_hash = read_digest(r);
    auto action_field = r.raw(Digest::kSize);
    p.action_taken = read_action_code(action_field[0]);
    if (std::any_of(action_field.begin() + 1, action_field.end(),
                    [](std::uint8_t b) { return b != 0; })) {
        throw Error(Errc::invalid_field, "reserved action_taken bytes must be zero");
    }
    r.expect_done();
    return p;
}

Bytes encode_apdu(const ApduCommand& cmd) {
    if (cmd.data.size() > 255) throw Error(Errc::invalid_field, "short APDU data limit is 255");
    ByteWriter w;
    w.u8(cmd.cla);
    w.u8(cmd.ins);
    w.u8(cmd.p1);
    w.u8(cmd.p2);
    if (!cmd.data.empty()) {
        w.u8(static_cast<std::uint8_t>(cmd.data.size()));
        w.raw(cmd.data);
    }
    if (cmd.le) w.u8(*cmd.le);
    return w.take();
}

ApduCommand decode_apdu(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw Error(Errc::truncated, "APDU shorter than the 4-byte header");
    ApduCommand cmd;
    cmd.cla = bytes[0];
    cmd.ins = bytes[1];
    cmd.p1 = bytes[2];
    cmd.p2 = bytes[3];
    std::size_t rest = bytes.size() - 4;
    if (rest == 0) return cmd;  // case 1
    if (rest == 1) {            // case 2
        cmd.le = bytes[4];
        return cmd;
    }
    std::size_t lc = bytes[4];
    if (lc == 0) throw Error(Errc::lc_mismatch, "Lc = 0 is reserved for extended length");
    std::size_t body = rest - 1;
    if (body == lc) {  // case 3
        cmd.data.assign(bytes.begin() + 5, bytes.end());
        return cmd;
    }
    if (body == lc + 1) {  // case 4
        cmd.data.assign(bytes.begin() + 5, bytes.end() - 1);
        cmd.le = bytes.back();
        return cmd;
    }
    throw Error(Errc::lc_mismatch, "declared Lc does not match remaining length");
}

Bytes encode_apdu_response(const ApduResponse& rsp) {
    ByteWriter w;
    w.raw(rsp.data);
    w.u8(rsp.sw1);
    w.u8(rsp.sw2);
    return w.take();
}

ApduResponse decode_apdu_response(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2) throw Error(Errc::truncated, "APDU response needs a status word");
    ApduResponse rsp;
    rsp.data.assign(bytes.begin(), bytes.end() - 2);
    rsp.sw1 = bytes[bytes.size() - 2];
    rsp.sw2 = bytes[bytes.size() - 1];
    return rsp;
}

ApduResponse status_response(std::uint16_t sw, Bytes data) {
    ApduResponse rsp;
    rsp.data = std::move(data);
    rsp.sw1 = static_cast<std::uint8_t>(sw >> 8);
    rsp.sw2 = static_cast<std::uint8_t>(sw & 0xFF);
    return rsp;
}

std::string_view msg_type_name(MsgType type) {
    switch (type) {
        case MsgType::Dispute: return "DISPUTE";
        case MsgType::DisputeResponse: return "DISPUTE_RESPONSE";
        case MsgType::LogArchive: return "LOG_ARCHIVE";
        case MsgType::UpdateNotify: return "UPDATE_NOTIFY";
        case MsgType::ProvisionMeasurement: return "PROVISION_MEASUREMENT";
        case MsgType::ProvisionConfirm: return "PROVISION_CONFIRM";
        case MsgType::ControlAction: return "CONTROL_ACTION";
    }
    throw Error(Errc::unknown_code, "unknown frame msg_type");
}

Bytes encode_frame(const Frame& frame) {
    msg_type_name(frame.msg_type);  // reject values outside the registry
    ByteWriter w;
    w.u8(kFrameVersion);
    w.u8(static_cast<std::uint8_t>(frame.msg_type));
    w.u32be(static_cast<std::uint32_t>(frame.payload.size()));
    w.raw(frame.payload);
    return w.take();
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.u8() != kFrameVersion) throw Error(Errc::invalid_field, "unsupported frame version");
    std::uint8_t type = r.u8();
    if (type < 0x01 || type > 0x07) throw Error(Errc::unknown_code, "unknown frame msg_type");
    Frame f;
    f.msg_type = static_cast<MsgType>(type);
    std::uint32_t len = r.u32be();
    auto payload = r.raw(len);
    f.payload.assign(payload.begin(), payload.end());
    r.expect_done();
    return f;
}

Bytes encode_log_entry(const LogEntry& entry) {
    ByteWriter w;
    put_timestamp(w, entry.t_s);
    w.raw(entry.current_hash.bytes);
    w.raw(entry.previous_hash.bytes);
    w.u8(static_cast<std::uint8_t>(entry.action_taken));
    return w.take();
}

namespace {
LogEntry read_log_entry(ByteReader& r) {
    LogEntry e;
    e.t_s = read_timestamp(r);
    e.current_hash = read_digest(r);
    e.previous_hash = read_digest(r);
    e.action_taken = read_action_code(r.u8());
    return e;
}
}  // namespace

LogEntry decode_log_entry(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    LogEntry e = read_log_entry(r);
    r.expect_done();
    return e;
}

Bytes encode_log_archive(const std::vector<LogEntry>& entries) {
    if (entries.empty() || entries.size() > 255) {
        throw Error(Errc::malformed_batch, "archive batch must hold 1-255 entries");
    }
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(entries.size()));
    for (const auto& e : entries) w.raw(encode_log_entry(e));
    return w.take();
}

std::vector<LogEntry> decode_log_archive(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    std::size_t count = r.u8();
    if (count == 0) throw Error(Errc::malformed_batch, "empty archive batch");
    std::vector<LogEntry> entries;
    entries.reserve(count);
    for (std::size_t i = 0; i < count; ++i) entries.push_back(read_log_entry(r));
    r.expect_done();
    return entries;
}

Bytes encode_measurement_report(const measure::MeasurementReport& report) {
    if (report.software_id.empty() || report.software_id.size() > 64) {
        throw Error(Errc::invalid_field, "software_id must be 1-64 chars");
    }
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(report.software_id.size()));
    w.raw(to_bytes(report.software_id));
    w.u64be(report.measured_at_us);
    w.raw(report.composite.bytes);
    if (report.per_artifact.size() > 0xFFFF) {
        throw Error(Errc::invalid_field, "too many artifacts");
    }
    w.u16be(static_cast<std::uint16_t>(report.per_artifact.size()));
    for (const auto& [path, digest] : report.per_artifact) {
        if (path.empty() || path.size() > 0xFFFF) {
            throw Error(Errc::invalid_field, "artifact path length");
        }
        w.u16be(static_cast<std::uint16_t>(path.size()));
        w.raw(to_bytes(path));
        w.raw(digest.bytes);
    }
    return w.take();
}

measure::MeasurementReport decode_measurement_report(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    measure::MeasurementReport report;
    std::size_t id_len = r.u8();
    if (id_len == 0) throw Error(Errc::invalid_field, "empty software_id");
    auto id = r.raw(id_len);
    report.software_id.assign(id.begin(), id.end());
    report.measured_at_us = r.u64be();
    report.composite = read_digest(r);
    std::size_t count = r.u16be();
    report.per_artifact.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t path_len = r.u16be();
        if (path_len == 0) throw Error(Errc::invalid_field, "empty artifact path");
        auto path = r.raw(path_len);
        Digest d = read_digest(r);
        report.per_artifact.emplace_back(std::string(path.begin(), path.end()), d);
    }
    r.expect_done();
    if (report.composite != measure::composite_of(report.per_artifact)) {
        throw Error(Errc::invalid_field, "composite does not match per-artifact digests");
    }
    return report;
}

Bytes encode_receipt(const Receipt& receipt) {
    if (receipt.provider_id.empty() || receipt.provider_id.size() > 255) {
        throw Error(Errc::invalid_field, "provider id must be 1-255 chars");
    }
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(receipt.provider_id.size()));
    w.raw(to_bytes(receipt.provider_id));
    w.raw(receipt.digest.bytes);
    w.raw(std::span(receipt.signature.data(), receipt.signature.size()));
    return w.take();
}

namespace {
Receipt read_receipt(ByteReader& r) {
    Receipt receipt;
    std::size_t id_len = r.u8();
    if (id_len == 0) throw Error(Errc::invalid_field, "empty provider id");
    auto id = r.raw(id_len);
    receipt.provider_id.assign(id.begin(), id.end());
    receipt.digest = read_digest(r);
    auto sig = r.raw(receipt.signature.size());
    std::copy(sig.begin(), sig.end(), receipt.signature.begin());
    return receipt;
}
}  // namespace

Receipt decode_receipt(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    Receipt receipt = read_receipt(r);
    r.expect_done();
    return receipt;
}

Bytes encode_provision_confirm(const std::optional<Receipt>& receipt) {
    ByteWriter w;
    w.u8(receipt ? 0x01 : 0x00);
    if (receipt) w.raw(encode_receipt(*receipt));
    return w.take();
}

std::optional<Receipt> decode_provision_confirm(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    std::uint8_t ok = r.u8();
    if (ok > 0x01) throw Error(Errc::invalid_field, "confirm flag must be 0x00 or 0x01");
    std::optional<Receipt> receipt;
    if (ok == 0x01) receipt = read_receipt(r);
    r.expect_done();
    return receipt;
}

}  // namespace dimsim::wire
