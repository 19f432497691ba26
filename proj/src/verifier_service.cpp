#include "dimsim/verifier_service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "dimsim/error.hpp"

namespace dimsim::verifier {

namespace {

void write_exact(int fd, const std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t n = ::send(fd, data + off, len - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(Errc::storage_failure, std::string("send: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t n = ::recv(fd, data + off, len - off, 0);
        if (n == 0) return false;  // peer closed
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(Errc::storage_failure, std::string("recv: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

// DISPUTE_RESPONSE kind 0x00 = transport-level error + 1 error byte.
wire::Frame error_response(Errc code) {
    Bytes payload{0x00, static_cast<std::uint8_t>(code)};
    return wire::Frame{wire::MsgType::DisputeResponse, std::move(payload)};
}

}  // namespace

void send_frame(int fd, const wire::Frame& frame) {
    Bytes encoded = wire::encode_frame(frame);
    write_exact(fd, encoded.data(), encoded.size());
}

wire::Frame recv_frame(int fd) {
    std::uint8_t header[6];
    if (!read_exact(fd, header, sizeof(header))) {
        throw Error(Errc::truncated, "connection closed before a full frame header");
    }
    std::uint32_t len = (std::uint32_t(header[2]) << 24) | (std::uint32_t(header[3]) << 16) |
                        (std::uint32_t(header[4]) << 8) | std::uint32_t(header[5]);
    if (len > (1u << 24)) throw Error(Errc::invalid_field, "oversized frame payload");
    Bytes buf(header, header + sizeof(header));
    buf.resize(sizeof(header) + len);
    if (len > 0 && !read_exact(fd, buf.data() + sizeof(header), len)) {
        throw Error(Errc::truncated, "connection closed inside a frame payload");
    }
    return wire::decode_frame(buf);
}

VerifierService::VerifierService(Verifier& verifier, std::function<std::uint64_t()> now_fn)
    : verifier_(verifier), now_fn_(std::move(now_fn)) {}

VerifierService::~VerifierService() {
    stop();
}

wire::Frame VerifierService::handle_frame(const wire::Frame& request) {
    try {
        switch (request.msg_type) {
            case wire::MsgType::Dispute: {
                wire::DisputePacket packet = wire::decode_dispute(request.payload);
                DisputeDecision decision = verifier_.handle_dispute(packet, now_fn_());
                return wire::Frame{wire::MsgType::DisputeResponse, encode_decision_payload(decision)};
            }
            case wire::MsgType::LogArchive: {
                // Payload: [1B count][entries], preceded on the wire by the
                // device id the same way a dispute carries it.
                ByteReader r(request.payload);
                std::size_t id_len = r.u8();
                if (id_len < 5 || id_len > 7) {
                    throw Error(Errc::invalid_field, "device id length outside 5-7");
                }
                auto id = r.raw(id_len);
                Bytes device_id(id.begin(), id.end());
                auto rest = r.raw(r.remaining());
                auto batch = wire::decode_log_archive(rest);
                auto [count, root] = verifier_.ingest_archive(batch, device_id, now_fn_());
                Bytes ack;
                put_u32be(ack, static_cast<std::uint32_t>(count));
                return wire::Frame{wire::MsgType::LogArchive, std::move(ack)};
            }
            case wire::MsgType::UpdateNotify: {
                UpdateNotification n = decode_update_notification(request.payload);
                verifier_.record_software_update(n, now_fn_());
                return wire::Frame{wire::MsgType::UpdateNotify, Bytes{0x01}};
            }
            default:
                return error_response(Errc::unknown_code);
        }
    } catch (const Error& e) {
        if (request.msg_type == wire::MsgType::UpdateNotify) {
            return wire::Frame{wire::MsgType::UpdateNotify,
                               Bytes{0x00, static_cast<std::uint8_t>(e.code())}};
        }
        return error_response(e.code());
    }
}

void VerifierService::start(std::uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(Errc::storage_failure, "socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(Errc::storage_failure, std::string("bind/listen: ") + std::strerror(errno));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    running_ = true;
    thread_ = std::thread([this] { serve_loop(); });
}

void VerifierService::serve_loop() {
    while (running_) {
        int client = ::accept(listen_fd_, nullptr, nullptr);
        if (client < 0) {
            if (running_ && (errno == EINTR || errno == ECONNABORTED)) continue;
            break;  // listen socket closed by stop()
        }
        try {
            // One request/response exchange per connection turn; the client
            // may pipeline further requests on the same connection.
            while (true) {
                wire::Frame request = recv_frame(client);
                send_frame(client, handle_frame(request));
            }
        } catch (const Error&) {
            // peer closed or sent garbage; drop the connection
        }
        ::close(client);
    }
}

void VerifierService::stop() {
    if (!running_.exchange(false)) {
        if (thread_.joinable()) thread_.join();
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (thread_.joinable()) thread_.join();
    listen_fd_ = -1;
}

wire::Frame exchange_frame(const std::string& host, std::uint16_t port,
                           const wire::Frame& request) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Errc::storage_failure, "socket failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw Error(Errc::config_invalid, "bad host address " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        throw Error(Errc::storage_failure, std::string("connect: ") + std::strerror(errno));
    }
    try {
        send_frame(fd, request);
        wire::Frame response = recv_frame(fd);
        ::close(fd);
        return response;
    } catch (...) {
        ::close(fd);
        throw;
    }
}

}  // namespace dimsim::verifier
