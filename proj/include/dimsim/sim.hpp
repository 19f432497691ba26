#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dimsim/applet.hpp"
#include "dimsim/kvconfig.hpp"
#include "dimsim/measure.hpp"
#include "dimsim/pdl.hpp"
#include "dimsim/verifier.hpp"

namespace dimsim::sim {

enum class TamperKind {
    ModifyArtifact,
    DeleteArtifact,
    Restore,
    // Legitimate update: the artifact changes and the vendor/provider run the
    // contract + verifier update flow before the next scan.
    UpdateSoftware,
};

std::string_view tamper_kind_name(TamperKind kind);
TamperKind parse_tamper_kind(std::string_view name);

struct TamperEvent {
    std::size_t device = 0;
    std::uint64_t epoch = 0;
    TamperKind kind = TamperKind::ModifyArtifact;
};

struct ScenarioConfig {
    std::size_t device_count = 1;
    std::uint64_t epochs = 10;
    std::uint64_t scan_period_us = 1'000'000;
    std::vector<TamperEvent> tamper_events;
    applet::PolicyConfig policy;
    std::size_t verifier_count = 1;  // 1..3, unanimity quorum
    std::uint64_t seed = 1;
    std::size_t artifacts_per_device = 3;
    std::size_t artifact_size = 1024;
    bool use_tcp = false;  // route dispute/archive frames over TCP loopback

    void validate() const;  // throws Errc::config_invalid
};

// Config file keys: devices, epochs, scan_period_us, seed, verifiers,
// alarm_block_threshold, autonomous_block, artifacts_per_device,
// artifact_size, use_tcp and repeatable `tamper = <device>:<epoch>:<kind>`.
ScenarioConfig parse_scenario_config(const KvConfig& kv);
std::string scenario_config_to_text(const ScenarioConfig& config);

// Deterministic in-memory device file trees derived from the scenario seed.
class SimWorld {
public:
    explicit SimWorld(const ScenarioConfig& config);

    std::size_t device_count() const { return devices_.size(); }
    const measure::Manifest& manifest(std::size_t device) const;
    std::string software_id(std::size_t device) const;
    measure::FileProvider provider(std::size_t device) const;

    void modify_artifact(std::size_t device, std::mt19937_64& rng);
    void delete_artifact(std::size_t device);
    void restore(std::size_t device);

    bool tampered(std::size_t device) const { return devices_.at(device).tampered; }
    void mark_legitimate(std::size_t device) { devices_.at(device).tampered = false; }

private:
    struct DeviceTree {
        std::map<std::string, Bytes> files;
        std::map<std::string, Bytes> pristine;
        measure::Manifest manifest;
        bool tampered = false;
    };

    std::vector<DeviceTree> devices_;
};

// Measurement that turns a missing artifact into a deterministic anomaly
// digest instead of an error, so deletion disputes like any other mismatch.
measure::MeasurementReport measure_or_anomaly(const measure::Manifest& manifest,
                                              const measure::FileProvider& provider,
                                              std::uint64_t now_us);

struct TranscriptLine {
    std::string direction;  // e.g. "applet->provider"
    wire::MsgType msg_type;
    std::size_t frame_size = 0;
    std::string note;
};

struct ProvisionTranscript {
    std::vector<TranscriptLine> lines;
    applet::Mode final_mode = applet::Mode::Unprovisioned;

    std::string to_text() const;
};

// Full provisioning handshake: measure → PROVISION_MEASUREMENT → provider
// comparison against the ledger benchmark → PROVISION_CONFIRM → Active.
// Registers the device and the initial benchmark with every verifier.
// Throws Errc::benchmark_mismatch when the ledger value disagrees with the
// measurement (the applet stays AwaitingConfirmation).
ProvisionTranscript provision_device(applet::Applet& a, const measure::Manifest& manifest,
                                     const measure::FileProvider& provider,
                                     const pdl::Ledger& ledger,
                                     const std::vector<verifier::Verifier*>& verifiers,
                                     const std::string& provider_id,
                                     const SigningKey& provider_key, std::uint64_t now_us);

struct Detection {
    std::size_t device = 0;
    std::uint64_t tamper_epoch = 0;
    TamperKind kind = TamperKind::ModifyArtifact;
    std::optional<std::uint64_t> detection_epoch;
    std::string decision;       // "action:0x05 Revoke device" / "update-benchmark:<hex8>"
    std::size_t frames = 0;     // dispute + response frames for this detection
};

struct DetectionReport {
    std::vector<Detection> detections;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    std::size_t total_disputes = 0;
    std::size_t total_frames = 0;
    bool store_audit_ok = false;
    bool ledger_audit_ok = false;

    std::string to_text() const;
    // Machine-readable variant: documented header line, one tab-separated
    // record per line.
    std::string to_tsv() const;
};

struct ScenarioResult {
    DetectionReport report;
    std::vector<std::size_t> match_entries_per_device;
    std::vector<applet::Mode> final_modes;
    std::string store_path;
    std::string ledger_path;
};

// Deterministic for a fixed config (seed included). Store and ledger files are
// created under workdir and audited after the run.
ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& workdir);

}  // namespace dimsim::sim
