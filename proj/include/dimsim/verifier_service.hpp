#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>

#include "dimsim/verifier.hpp"
#include "dimsim/wire.hpp"

namespace dimsim::verifier {

// TCP endpoint speaking the frame protocol: one request frame per
// connection turn, one response frame back.
//
//   DISPUTE              -> DISPUTE_RESPONSE (decision, or kind 0x00 error)
//   LOG_ARCHIVE          -> LOG_ARCHIVE ack payload [4B BE count stored]
//   UPDATE_NOTIFY        -> UPDATE_NOTIFY ack payload [1B ok] (0x00 + errc on failure)
//   PROVISION_MEASUREMENT is handled by the provisioning orchestrator, not here.
class VerifierService {
public:
    // now_fn supplies decision timestamps so simulations stay deterministic.
    VerifierService(Verifier& verifier, std::function<std::uint64_t()> now_fn);
    ~VerifierService();

    VerifierService(const VerifierService&) = delete;
    VerifierService& operator=(const VerifierService&) = delete;

    // Binds 127.0.0.1:port (0 = ephemeral) and serves on a background thread.
    void start(std::uint16_t port = 0);
    void stop();

    std::uint16_t port() const { return port_; }

    // Builds the response frame for one request; the TCP loop and the
    // in-process transport both go through this.
    wire::Frame handle_frame(const wire::Frame& request);

private:
    void serve_loop();

    Verifier& verifier_;
    std::function<std::uint64_t()> now_fn_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::thread thread_;
    std::atomic<bool> running_{false};
};

// Blocking client helper: connect, send one frame, read one frame.
wire::Frame exchange_frame(const std::string& host, std::uint16_t port, const wire::Frame& request);

// Frame IO over a connected socket.
void send_frame(int fd, const wire::Frame& frame);
wire::Frame recv_frame(int fd);

}  // namespace dimsim::verifier
