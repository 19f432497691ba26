#include "dimsim/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>

#include "dimsim/error.hpp"
#include "dimsim/verifier_service.hpp"

namespace dimsim::sim {

namespace {

namespace fs = std::filesystem;

// Fixed logical origin so runs are reproducible; epoch e scans at
// kT0 + (e+1) * scan_period.
constexpr std::uint64_t kT0 = 1'750'000'000'000'000ULL;

std::string device_tag(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "dev%02zu", index % 100);
    return buf;
}

Bytes device_id_bytes(std::size_t index) {
    return to_bytes(device_tag(index));  // "devNN" = 5 bytes
}

Bytes applet_id_bytes(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "aa%03zu", index % 1000);
    return to_bytes(buf);  // "aaNNN" = 5 bytes
}

std::array<std::uint8_t, 32> key_seed(std::mt19937_64& rng) {
    std::array<std::uint8_t, 32> seed{};
    for (auto& b : seed) b = static_cast<std::uint8_t>(rng());
    return seed;
}

}  // namespace

std::string_view tamper_kind_name(TamperKind kind) {
    switch (kind) {
        case TamperKind::ModifyArtifact: return "modify_artifact";
        case TamperKind::DeleteArtifact: return "delete_artifact";
        case TamperKind::Restore: return "restore";
        case TamperKind::UpdateSoftware: return "update_software";
    }
    return "?";
}

TamperKind parse_tamper_kind(std::string_view name) {
    if (name == "modify_artifact") return TamperKind::ModifyArtifact;
    if (name == "delete_artifact") return TamperKind::DeleteArtifact;
    if (name == "restore") return TamperKind::Restore;
    if (name == "update_software") return TamperKind::UpdateSoftware;
    throw Error(Errc::config_invalid, "unknown tamper kind '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
    if (device_count < 1 || device_count > 1000) {
        throw Error(Errc::config_invalid, "devices must be 1-1000");
    }
    if (epochs < 1) throw Error(Errc::config_invalid, "epochs must be >= 1");
    if (scan_period_us < 1) throw Error(Errc::config_invalid, "scan_period_us must be >= 1");
    if (verifier_count < 1 || verifier_count > 5) {
        throw Error(Errc::config_invalid, "verifiers must be 1-5");
    }
    if (policy.alarm_block_threshold < 1) {
        throw Error(Errc::config_invalid, "alarm_block_threshold must be >= 1");
    }
    if (artifacts_per_device < 1 || artifact_size < 1) {
        throw Error(Errc::config_invalid, "artifacts_per_device and artifact_size must be >= 1");
    }
    for (const auto& ev : tamper_events) {
        if (ev.device >= device_count) {
            throw Error(Errc::config_invalid, "tamper device index out of range");
        }
        if (ev.epoch >= epochs) throw Error(Errc::config_invalid, "tamper epoch out of range");
    }
}

ScenarioConfig parse_scenario_config(const KvConfig& kv) {
    ScenarioConfig config;
    config.device_count = static_cast<std::size_t>(kv.get_int("devices", 1));
    config.epochs = static_cast<std::uint64_t>(kv.get_int("epochs", 10));
    config.scan_period_us = static_cast<std::uint64_t>(kv.get_int("scan_period_us", 1'000'000));
    config.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
    config.verifier_count = static_cast<std::size_t>(kv.get_int("verifiers", 1));
    config.policy.alarm_block_threshold =
        static_cast<std::uint32_t>(kv.get_int("alarm_block_threshold", 3));
    config.policy.autonomous_block = kv.get_bool("autonomous_block", true);
    config.policy.scan_period_us = config.scan_period_us;
    config.artifacts_per_device = static_cast<std::size_t>(kv.get_int("artifacts_per_device", 3));
    config.artifact_size = static_cast<std::size_t>(kv.get_int("artifact_size", 1024));
    config.use_tcp = kv.get_bool("use_tcp", false);
    for (const auto& spec : kv.get_all("tamper")) {
        // <device>:<epoch>:<kind>
        auto first = spec.find(':');
        auto second = spec.find(':', first == std::string::npos ? first : first + 1);
        if (first == std::string::npos || second == std::string::npos) {
            throw Error(Errc::config_invalid, "tamper must be <device>:<epoch>:<kind>");
        }
        TamperEvent ev;
        try {
            ev.device = std::stoul(spec.substr(0, first));
            ev.epoch = std::stoull(spec.substr(first + 1, second - first - 1));
        } catch (const std::exception&) {
            throw Error(Errc::config_invalid, "bad tamper spec '" + spec + "'");
        }
        ev.kind = parse_tamper_kind(spec.substr(second + 1));
        config.tamper_events.push_back(ev);
    }
    config.validate();
    return config;
}

std::string scenario_config_to_text(const ScenarioConfig& config) {
    std::ostringstream out;
    out << "devices = " << config.device_count << "\n";
    out << "epochs = " << config.epochs << "\n";
    out << "scan_period_us = " << config.scan_period_us << "\n";
    out << "seed = " << config.seed << "\n";
    out << "verifiers = " << config.verifier_count << "\n";
    out << "alarm_block_threshold = " << config.policy.alarm_block_threshold << "\n";
    out << "autonomous_block = " << (config.policy.autonomous_block ? "true" : "false") << "\n";
    out << "artifacts_per_device = " << config.artifacts_per_device << "\n";
    out << "artifact_size = " << config.artifact_size << "\n";
    out << "use_tcp = " << (config.use_tcp ? "true" : "false") << "\n";
    for (const auto& ev : config.tamper_events) {
        out << "tamper = " << ev.device << ":" << ev.epoch << ":" << tamper_kind_name(ev.kind)
            << "\n";
    }
    return out.str();
}

SimWorld::SimWorld(const ScenarioConfig& config) {
    devices_.resize(config.device_count);
    for (std::size_t d = 0; d < config.device_count; ++d) {
        DeviceTree& tree = devices_[d];
        tree.manifest.software_id = "fw." + device_tag(d);
        for (std::size_t a = 0; a < config.artifacts_per_device; ++a) {
            char name[32];
            std::snprintf(name, sizeof(name), "artifact_%03zu.bin", a);
            // Per-file stream keyed by (seed, device, artifact) so trees do
            // not depend on generation order.
            std::seed_seq seq{config.seed, static_cast<std::uint64_t>(d),
                              static_cast<std::uint64_t>(a)};
            std::mt19937_64 rng(seq);
            Bytes content(config.artifact_size);
            for (auto& b : content) b = static_cast<std::uint8_t>(rng());
            tree.files[name] = content;
            tree.manifest.artifact_paths.push_back(name);
        }
        tree.pristine = tree.files;
        tree.manifest = measure::canonicalize(tree.manifest);
    }
}

const measure::Manifest& SimWorld::manifest(std::size_t device) const {
    return devices_.at(device).manifest;
}

std::string SimWorld::software_id(std::size_t device) const {
    return devices_.at(device).manifest.software_id;
}

measure::FileProvider SimWorld::provider(std::size_t device) const {
    const DeviceTree* tree = &devices_.at(device);
    return [tree](const std::string& path) -> std::optional<Bytes> {
        auto it = tree->files.find(path);
        if (it == tree->files.end()) return std::nullopt;
        return it->second;
    };
}

void SimWorld::modify_artifact(std::size_t device, std::mt19937_64& rng) {
    DeviceTree& tree = devices_.at(device);
    const std::string& path = tree.manifest.artifact_paths.front();
    auto it = tree.files.find(path);
    if (it == tree.files.end()) {
        // Artifact was deleted earlier; tampering re-creates it with foreign bytes.
        Bytes content(16);
        for (auto& b : content) b = static_cast<std::uint8_t>(rng());
        tree.files[path] = content;
    } else {
        Bytes& content = it->second;
        std::size_t pos = rng() % content.size();
        content[pos] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    }
    tree.tampered = true;
}

void SimWorld::delete_artifact(std::size_t device) {
    DeviceTree& tree = devices_.at(device);
    tree.files.erase(tree.manifest.artifact_paths.front());
    tree.tampered = true;
}

void SimWorld::restore(std::size_t device) {
    DeviceTree& tree = devices_.at(device);
    tree.files = tree.pristine;
    tree.tampered = false;
}

measure::MeasurementReport measure_or_anomaly(const measure::Manifest& manifest,
                                              const measure::FileProvider& provider,
                                              std::uint64_t now_us) {
    // A deleted artifact hashes to a deterministic sentinel so the composite
    // mismatches and the normal dispute path fires.
    measure::FileProvider wrapped = [&provider](const std::string& path) -> std::optional<Bytes> {
        if (auto content = provider(path)) return content;
        Bytes sentinel = to_bytes("DIMSIM.missing");
        sentinel.push_back(0x00);
        Bytes path_bytes = to_bytes(path);
        sentinel.insert(sentinel.end(), path_bytes.begin(), path_bytes.end());
        return sentinel;
    };
    return measure::measure_manifest(manifest, wrapped, now_us);
}

std::string ProvisionTranscript::to_text() const {
    std::ostringstream out;
    for (const auto& line : lines) {
        out << line.direction << "  " << wire::msg_type_name(line.msg_type) << "  "
            << line.frame_size << "B";
        if (!line.note.empty()) out << "  " << line.note;
        out << "\n";
    }
    out << "final mode: " << applet::mode_name(final_mode) << "\n";
    return out.str();
}

ProvisionTranscript provision_device(applet::Applet& a, const measure::Manifest& manifest,
                                     const measure::FileProvider& provider,
                                     const pdl::Ledger& ledger,
                                     const std::vector<verifier::Verifier*>& verifiers,
                                     const std::string& provider_id,
                                     const SigningKey& provider_key, std::uint64_t now_us) {
    ProvisionTranscript transcript;
    measure::MeasurementReport report = measure::measure_manifest(manifest, provider, now_us);

    wire::Frame submit = a.submit_initial_measurement(report);
    transcript.lines.push_back({"applet->provider", submit.msg_type,
                                wire::encode_frame(submit).size(),
                                "composite " + report.composite.short_hex()});

    auto registered = ledger.query_benchmark(manifest.software_id);
    if (!registered) {
        transcript.final_mode = a.mode();
        throw Error(Errc::not_found,
                    "no benchmark registered in the ledger for " + manifest.software_id);
    }
    if (!measure::compare(*registered, report.composite)) {
        // Vendor promise and device reality disagree: provisioning refused,
        // the applet stays AwaitingConfirmation.
        transcript.final_mode = a.mode();
        throw Error(Errc::benchmark_mismatch,
                    "ledger benchmark " + registered->short_hex() + " != measured " +
                        report.composite.short_hex());
    }

    Receipt receipt = make_receipt(provider_id, report.composite, provider_key);
    wire::Frame confirm{wire::MsgType::ProvisionConfirm, wire::encode_provision_confirm(receipt)};
    transcript.lines.push_back({"provider->applet", confirm.msg_type,
                                wire::encode_frame(confirm).size(),
                                "receipt by " + provider_id});
    a.confirm_benchmark(receipt);

    for (verifier::Verifier* v : verifiers) {
        v->register_device(a.device_id(), manifest.software_id);
        v->record_initial_benchmark(manifest.software_id, report.composite, now_us);
    }
    transcript.final_mode = a.mode();
    return transcript;
}

std::string DetectionReport::to_tsv() const {
    std::ostringstream out;
    out << "device\ttamper_epoch\tkind\tdetection_epoch\tdecision\tframes\n";
    for (const auto& d : detections) {
        out << d.device << "\t" << d.tamper_epoch << "\t" << tamper_kind_name(d.kind) << "\t";
        if (d.detection_epoch) {
            out << *d.detection_epoch;
        } else {
            out << "-";
        }
        out << "\t" << (d.decision.empty() ? "-" : d.decision) << "\t" << d.frames << "\n";
    }
    out << "#summary\tfalse_positives=" << false_positives
        << "\tfalse_negatives=" << false_negatives << "\tdisputes=" << total_disputes
        << "\tframes=" << total_frames << "\tstore_audit=" << (store_audit_ok ? "ok" : "FAIL")
        << "\tledger_audit=" << (ledger_audit_ok ? "ok" : "FAIL") << "\n";
    return out.str();
}

std::string DetectionReport::to_text() const {
    std::ostringstream out;
    out << "scenario report\n";
    if (detections.empty()) {
        out << "  no tamper events\n";
    }
    for (const auto& d : detections) {
        out << "  device " << d.device << ": " << tamper_kind_name(d.kind) << " @ epoch "
            << d.tamper_epoch;
        if (d.detection_epoch) {
            out << " -> detected @ epoch " << *d.detection_epoch << ", decision " << d.decision
                << ", frames " << d.frames;
        } else {
            out << " -> NOT DETECTED";
        }
        out << "\n";
    }
    out << "false positives: " << false_positives << "\n";
    out << "false negatives: " << false_negatives << "\n";
    out << "disputes: " << total_disputes << "\n";
    out << "frames: " << total_frames << "\n";
    out << "store audit: " << (store_audit_ok ? "ok" : "FAIL") << "\n";
    out << "ledger audit: " << (ledger_audit_ok ? "ok" : "FAIL") << "\n";
    return out.str();
}

namespace {

// One verifier endpoint; frames travel in-process or over TCP loopback, both
// through VerifierService::handle_frame.
struct VerifierEndpoint {
    std::unique_ptr<immustore::Store> store;
    std::unique_ptr<verifier::Verifier> verifier;
    std::unique_ptr<verifier::VerifierService> service;
    bool tcp = false;

    wire::Frame exchange(const wire::Frame& request) const {
        if (tcp) return verifier::exchange_frame("127.0.0.1", service->port(), request);
        return service->handle_frame(request);
    }
};

struct OpenAnomaly {
    std::size_t detection_slot;  // index into report.detections
};

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& workdir) {
    config.validate();
    fs::create_directories(workdir);
    std::mt19937_64 rng(config.seed);

    // Consortium keys are derived from the seed so whole runs replay bit-exact.
    SigningKey sp_key(key_seed(rng));
    SigningKey vendor_key(key_seed(rng));
    SigningKey svc_key(key_seed(rng));
    const std::string sp_id = "sp";
    const std::string vendor_id = "vendor";
    std::vector<pdl::Participant> participants = {
        {sp_id, pdl::Role::SolutionProvider, sp_key.verify_key()},
        {vendor_id, pdl::Role::DeviceVendor, vendor_key.verify_key()},
        {"svc", pdl::Role::ServiceProvider, svc_key.verify_key()},
    };

    std::string ledger_path = workdir + "/pdl.ledger";
    pdl::Ledger ledger = pdl::Ledger::open(ledger_path, participants, false);

    std::atomic<std::uint64_t> logical_now{kT0};
    std::vector<VerifierEndpoint> endpoints(config.verifier_count);
    verifier::QuorumConfig quorum;
    for (std::size_t k = 0; k < config.verifier_count; ++k) {
        VerifierEndpoint& ep = endpoints[k];
        std::string store_path = workdir + "/verifier" + std::to_string(k) + ".store";
        ep.store = std::make_unique<immustore::Store>(immustore::Store::open(store_path, false));
        ep.verifier = std::make_unique<verifier::Verifier>(*ep.store, &ledger,
                                                           wire::ActionCode::RevokeDevice);
        ep.verifier->register_provider(sp_id, sp_key.verify_key());
        ep.service = std::make_unique<verifier::VerifierService>(
            *ep.verifier, [&logical_now] { return logical_now.load(); });
        ep.tcp = config.use_tcp;
        if (config.use_tcp) ep.service->start(0);
        quorum.verifier_ids.push_back("verifier" + std::to_string(k));
    }

    SimWorld world(config);

    // Vendor registers every benchmark in the ledger, then each device runs
    // the provisioning handshake.
    std::vector<applet::Applet> applets;
    std::vector<verifier::Verifier*> verifier_ptrs;
    for (auto& ep : endpoints) verifier_ptrs.push_back(ep.verifier.get());
    for (std::size_t d = 0; d < config.device_count; ++d) {
        Digest pristine =
            measure::measure_manifest(world.manifest(d), world.provider(d), kT0).composite;
        pdl::ContractRecord reg{pdl::ContractKind::BenchmarkRegistration, world.software_id(d),
                                pristine, std::nullopt, vendor_id};
        ledger.submit_contract(reg, {pdl::Ledger::sign_records({reg}, vendor_id, vendor_key),
                                     pdl::Ledger::sign_records({reg}, sp_id, sp_key)});

        applet::AppletConfig acfg;
        acfg.device_id = device_id_bytes(d);
        acfg.applet_id = applet_id_bytes(d);
        acfg.policy = config.policy;
        acfg.provider_key = sp_key.verify_key();
        applets.emplace_back(acfg);
        provision_device(applets.back(), world.manifest(d), world.provider(d), ledger,
                         verifier_ptrs, sp_id, sp_key, kT0);
    }

    ScenarioResult result;
    DetectionReport& report = result.report;
    result.match_entries_per_device.assign(config.device_count, 0);
    std::vector<std::vector<OpenAnomaly>> open_anomalies(config.device_count);
    std::vector<bool> update_pending(config.device_count, false);

    auto send_archive = [&](std::size_t device, const std::vector<wire::LogEntry>& batch) {
        ByteWriter payload;
        Bytes id = device_id_bytes(device);
        payload.u8(static_cast<std::uint8_t>(id.size()));
        payload.raw(id);
        payload.raw(wire::encode_log_archive(batch));
        wire::Frame frame{wire::MsgType::LogArchive, payload.take()};
        for (const auto& ep : endpoints) {
            wire::Frame ack = ep.exchange(frame);
            if (ack.msg_type != wire::MsgType::LogArchive) {
                throw Error(Errc::malformed_batch, "archive rejected by verifier");
            }
            report.total_frames += 2;
        }
    };

    for (std::uint64_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::uint64_t now = kT0 + (epoch + 1) * config.scan_period_us;
        logical_now.store(now);

        // Tamper/update events land before this epoch's scans.
        for (const auto& ev : config.tamper_events) {
            if (ev.epoch != epoch) continue;
            switch (ev.kind) {
                case TamperKind::ModifyArtifact:
                case TamperKind::DeleteArtifact: {
                    if (ev.kind == TamperKind::ModifyArtifact) {
                        world.modify_artifact(ev.device, rng);
                    } else {
                        world.delete_artifact(ev.device);
                    }
                    report.detections.push_back(
                        {ev.device, epoch, ev.kind, std::nullopt, "", 0});
                    open_anomalies[ev.device].push_back({report.detections.size() - 1});
                    break;
                }
                case TamperKind::Restore:
                    world.restore(ev.device);
                    break;
                case TamperKind::UpdateSoftware: {
                    // Agreed update: new bytes, executed contract, verifier
                    // records updated; the applet only learns on its next scan.
                    world.modify_artifact(ev.device, rng);
                    measure::MeasurementReport updated =
                        measure_or_anomaly(world.manifest(ev.device), world.provider(ev.device),
                                           now);
                    Digest new_hash = updated.composite;
                    Receipt confirmation = make_receipt(sp_id, new_hash, sp_key);
                    pdl::ContractRecord rec{pdl::ContractKind::SoftwareUpdateExecution,
                                            world.software_id(ev.device), new_hash, confirmation,
                                            vendor_id};
                    ledger.execute_update_contract(
                        world.software_id(ev.device), new_hash, confirmation, vendor_id,
                        {pdl::Ledger::sign_records({rec}, vendor_id, vendor_key),
                         pdl::Ledger::sign_records({rec}, sp_id, sp_key)});
                    verifier::UpdateNotification notify{world.software_id(ev.device), new_hash,
                                                        confirmation};
                    wire::Frame frame{wire::MsgType::UpdateNotify,
                                      verifier::encode_update_notification(notify)};
                    for (const auto& ep : endpoints) {
                        wire::Frame ack = ep.exchange(frame);
                        if (ack.payload.empty() || ack.payload[0] != 0x01) {
                            throw Error(Errc::bad_receipt, "update rejected by verifier");
                        }
                        report.total_frames += 2;
                    }
                    world.mark_legitimate(ev.device);
                    update_pending[ev.device] = true;
                    report.detections.push_back(
                        {ev.device, epoch, ev.kind, std::nullopt, "", 0});
                    open_anomalies[ev.device].push_back({report.detections.size() - 1});
                    break;
                }
            }
        }

        for (std::size_t d = 0; d < config.device_count; ++d) {
            if (applets[d].mode() != applet::Mode::Active) continue;
            measure::MeasurementReport scan =
                measure_or_anomaly(world.manifest(d), world.provider(d), now);
            applet::ScanOutcome outcome = applets[d].scan_epoch(scan, now);
            if (outcome.archive) send_archive(d, *outcome.archive);
            if (!outcome.dispute) {
                ++result.match_entries_per_device[d];
                continue;
            }

            ++report.total_disputes;
            wire::Frame dispute{wire::MsgType::Dispute, wire::encode_dispute(*outcome.dispute)};
            std::vector<verifier::DisputeDecision> decisions;
            for (const auto& ep : endpoints) {
                wire::Frame response = ep.exchange(dispute);
                report.total_frames += 2;
                if (response.msg_type != wire::MsgType::DisputeResponse ||
                    (!response.payload.empty() && response.payload[0] == 0x00)) {
                    throw Error(Errc::unknown_device, "verifier rejected dispute");
                }
                decisions.push_back(verifier::decode_decision_payload(response.payload));
            }
            verifier::QuorumOutcome outcome_q = verifier::quorum_decide(quorum, decisions);
            std::string decision_text;
            if (auto* decision = std::get_if<verifier::DisputeDecision>(&outcome_q)) {
                decision_text = decision->describe();
                if (decision->kind == verifier::DisputeDecision::Kind::UpdateBenchmark) {
                    applets[d].handle_verifier_response(
                        applet::VerifierDecision::update(decision->benchmark));
                    update_pending[d] = false;
                } else {
                    applets[d].handle_verifier_response(
                        applet::VerifierDecision::act(decision->action));
                }
            } else {
                // Disagreeing verifiers: no action delivered, the applet's own
                // policy governs.
                decision_text = "no-quorum";
            }

            if (!open_anomalies[d].empty()) {
                Detection& slot = report.detections[open_anomalies[d].front().detection_slot];
                slot.detection_epoch = epoch;
                slot.decision = decision_text;
                slot.frames = 2 * endpoints.size();
                open_anomalies[d].erase(open_anomalies[d].begin());
            } else {
                ++report.false_positives;
            }
        }
    }

    for (const auto& per_device : open_anomalies) {
        for (const auto& open : per_device) {
            // A tamper with no dispute by scenario end is a miss; pending
            // legitimate updates are not.
            TamperKind kind = report.detections[open.detection_slot].kind;
            if (kind == TamperKind::ModifyArtifact || kind == TamperKind::DeleteArtifact) {
                ++report.false_negatives;
            }
        }
    }

    report.store_audit_ok = true;
    for (const auto& ep : endpoints) {
        if (!ep.store->audit().ok) report.store_audit_ok = false;
    }
    report.ledger_audit_ok = ledger.verify().ok && pdl::Ledger::verify_file(ledger_path).ok;

    for (auto& ep : endpoints) {
        if (ep.tcp) ep.service->stop();
    }

    for (const auto& a : applets) result.final_modes.push_back(a.mode());
    result.store_path = workdir + "/verifier0.store";
    result.ledger_path = ledger_path;
    return result;
}

}  // namespace dimsim::sim
