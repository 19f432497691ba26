// dimsim: provision simulated devices, run tamper scenarios, benchmark the
// hash/store paths and audit the persisted files.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "dimsim/bench.hpp"
#include "dimsim/sim.hpp"
#include "dimsim/verifier_service.hpp"

using namespace dimsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t wall_clock_us() {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                          std::chrono::system_clock::now().time_since_epoch())
                                          .count());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::config_invalid, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::storage_failure, "cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// Workdir lab: consortium keys, ledger, store and per-device state files that
// let provision / tamper / scan compose across CLI invocations.
// ---------------------------------------------------------------------------

struct Lab {
    std::string workdir;
    SigningKey sp_key;
    SigningKey vendor_key;
    SigningKey svc_key;
    pdl::Ledger ledger;
    immustore::Store store;
    verifier::Verifier verifier;

    static std::array<std::uint8_t, 32> seed_from_hex(const std::string& hex) {
        Bytes raw = from_hex(hex);
        std::array<std::uint8_t, 32> seed{};
        std::copy(raw.begin(), raw.end(), seed.begin());
        return seed;
    }

    static Lab open(const std::string& workdir) {
        fs::create_directories(workdir);
        fs::create_directories(workdir + "/devices");

        std::string keys_path = workdir + "/keys.json";
        json keys;
        if (fs::exists(keys_path)) {
            keys = json::parse(read_text_file(keys_path));
        } else {
            std::random_device rd;
            auto fresh_seed = [&rd] {
                std::string hex;
                for (int i = 0; i < 32; ++i) {
                    char buf[4];
                    std::snprintf(buf, sizeof(buf), "%02x", rd() & 0xFF);
                    hex += buf;
                }
                return hex;
            };
            keys = {{"sp", fresh_seed()}, {"vendor", fresh_seed()}, {"svc", fresh_seed()}};
            write_text_file(keys_path, keys.dump(2) + "\n");
        }

        SigningKey sp(seed_from_hex(keys.at("sp")));
        SigningKey vendor(seed_from_hex(keys.at("vendor")));
        SigningKey svc(seed_from_hex(keys.at("svc")));
        std::vector<pdl::Participant> participants = {
            {"sp", pdl::Role::SolutionProvider, sp.verify_key()},
            {"vendor", pdl::Role::DeviceVendor, vendor.verify_key()},
            {"svc", pdl::Role::ServiceProvider, svc.verify_key()}};

        pdl::Ledger ledger = pdl::Ledger::open(workdir + "/pdl.ledger", participants);
        immustore::Store store = immustore::Store::open(workdir + "/verifier.store");
        return Lab(workdir, std::move(sp), std::move(vendor), std::move(svc), std::move(ledger),
                   std::move(store));
    }

    std::string device_state_path(std::size_t index) const {
        return workdir + "/devices/dev" + std::to_string(index) + ".json";
    }

    std::size_t next_device_index() const {
        std::size_t index = 0;
        while (fs::exists(device_state_path(index))) ++index;
        return index;
    }

    // The verifier's device registry and provider keys live in this process
    // only; rebuild them from the state files on every invocation.
    void load_registry() {
        verifier.register_provider("sp", sp_key.verify_key());
        for (std::size_t i = 0;; ++i) {
            std::string path = device_state_path(i);
            if (!fs::exists(path)) break;
            json state = json::parse(read_text_file(path));
            verifier.register_device(from_hex(state.at("device_id").get<std::string>()),
                                     state.at("software_id").get<std::string>());
        }
    }

private:
    // Note: `verifier` references the `store` and `ledger` members; Lab::open
    // returns a prvalue, so the object is constructed in place and the
    // references stay valid.
    Lab(std::string wd, SigningKey sp, SigningKey vendor, SigningKey svc, pdl::Ledger l,
        immustore::Store s)
        : workdir(std::move(wd)),
          sp_key(std::move(sp)),
          vendor_key(std::move(vendor)),
          svc_key(std::move(svc)),
          ledger(std::move(l)),
          store(std::move(s)),
          verifier(store, &ledger) {}
};

json snapshot_to_json(const applet::AppletSnapshot& snap) {
    json log = json::array();
    for (const auto& e : snap.log_entries) {
        log.push_back({{"t_s", e.t_s},
                       {"current", e.current_hash.hex()},
                       {"previous", e.previous_hash.hex()},
                       {"action", static_cast<int>(e.action_taken)}});
    }
    json out = {{"mode", std::string(applet::mode_name(snap.mode))},
                {"alarms", snap.consecutive_alarms},
                {"log", log}};
    if (snap.benchmark) out["benchmark"] = snap.benchmark->hex();
    if (snap.last_scan_hash) out["last_scan_hash"] = snap.last_scan_hash->hex();
    return out;
}

applet::AppletSnapshot snapshot_from_json(const json& state) {
    applet::AppletSnapshot snap;
    std::string mode = state.at("mode");
    if (mode == "Unprovisioned") snap.mode = applet::Mode::Unprovisioned;
    else if (mode == "Active") snap.mode = applet::Mode::Active;
    else if (mode == "Blocked") snap.mode = applet::Mode::Blocked;
    else throw Error(Errc::config_invalid, "unrestorable mode " + mode);
    if (state.contains("benchmark")) {
        snap.benchmark = Digest::from_hex(state.at("benchmark").get<std::string>());
    }
    if (state.contains("last_scan_hash")) {
        snap.last_scan_hash = Digest::from_hex(state.at("last_scan_hash").get<std::string>());
    }
    snap.consecutive_alarms = state.at("alarms");
    for (const auto& e : state.at("log")) {
        wire::LogEntry entry;
        entry.t_s = e.at("t_s");
        entry.current_hash = Digest::from_hex(e.at("current").get<std::string>());
        entry.previous_hash = Digest::from_hex(e.at("previous").get<std::string>());
        entry.action_taken = wire::to_action_code(e.at("action").get<int>());
        snap.log_entries.push_back(entry);
    }
    return snap;
}

struct DeviceState {
    std::size_t index = 0;
    Bytes device_id;
    Bytes applet_id;
    std::string software_id;
    measure::Manifest manifest;
    std::string root;
    applet::PolicyConfig policy;
    applet::AppletSnapshot snapshot;
};

DeviceState load_device(const Lab& lab, std::size_t index) {
    std::string path = lab.device_state_path(index);
    if (!fs::exists(path)) {
        throw Error(Errc::unknown_device, "no provisioned device " + std::to_string(index) +
                                              " under " + lab.workdir);
    }
    json state = json::parse(read_text_file(path));
    DeviceState d;
    d.index = index;
    d.device_id = from_hex(state.at("device_id").get<std::string>());
    d.applet_id = from_hex(state.at("applet_id").get<std::string>());
    d.software_id = state.at("software_id");
    d.manifest = measure::parse_manifest_text(state.at("manifest_text").get<std::string>());
    d.root = state.at("root");
    d.policy.alarm_block_threshold = state.at("threshold");
    d.policy.autonomous_block = state.at("autonomous_block");
    d.snapshot = snapshot_from_json(state);
    return d;
}

void save_device(const Lab& lab, const DeviceState& d) {
    json state = snapshot_to_json(d.snapshot);
    state["device_id"] = to_hex(d.device_id);
    state["applet_id"] = to_hex(d.applet_id);
    state["software_id"] = d.software_id;
    state["manifest_text"] = measure::manifest_to_text(d.manifest);
    state["root"] = d.root;
    state["threshold"] = d.policy.alarm_block_threshold;
    state["autonomous_block"] = d.policy.autonomous_block;
    write_text_file(lab.device_state_path(d.index), state.dump(2) + "\n");
}

Bytes index_id(const char* prefix, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, index % 1000);
    return to_bytes(buf);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_provision(const std::string& workdir, const std::string& manifest_path,
                  const std::string& root, std::uint32_t threshold, bool autonomous) {
    Lab lab = Lab::open(workdir);
    lab.load_registry();
    measure::Manifest manifest = measure::parse_manifest_text(read_text_file(manifest_path));

    std::uint64_t now = wall_clock_us();
    auto provider = measure::fs_provider(root);

    // The vendor's promise must be on the ledger before provisioning; in this
    // lab the CLI plays the vendor and registers the measured tree when the
    // software id is new.
    if (!lab.ledger.query_benchmark(manifest.software_id)) {
        Digest pristine = measure::measure_manifest(manifest, provider, now).composite;
        pdl::ContractRecord reg{pdl::ContractKind::BenchmarkRegistration, manifest.software_id,
                                pristine, std::nullopt, "vendor"};
        lab.ledger.submit_contract(
            reg, {pdl::Ledger::sign_records({reg}, "vendor", lab.vendor_key),
                  pdl::Ledger::sign_records({reg}, "sp", lab.sp_key)});
        std::cout << "ledger: registered benchmark " << pristine.short_hex() << " for "
                  << manifest.software_id << "\n";
    }

    DeviceState d;
    d.index = lab.next_device_index();
    d.device_id = index_id("dv", d.index);
    d.applet_id = index_id("aa", d.index);
    d.software_id = manifest.software_id;
    d.manifest = manifest;
    d.root = fs::absolute(root).string();
    d.policy.alarm_block_threshold = threshold;
    d.policy.autonomous_block = autonomous;

    applet::AppletConfig cfg;
    cfg.device_id = d.device_id;
    cfg.applet_id = d.applet_id;
    cfg.policy = d.policy;
    cfg.provider_key = lab.sp_key.verify_key();
    applet::Applet a(cfg);

    sim::ProvisionTranscript transcript = sim::provision_device(
        a, manifest, provider, lab.ledger, {&lab.verifier}, "sp", lab.sp_key, now);
    std::cout << transcript.to_text();

    // Pristine copies make `tamper --kind restore` possible later.
    std::string pristine_dir = workdir + "/pristine/" + std::to_string(d.index);
    for (const auto& path : d.manifest.artifact_paths) {
        fs::path src = fs::path(root) / path;
        fs::path dst = fs::path(pristine_dir) / path;
        fs::create_directories(dst.parent_path());
        fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
    }

    d.snapshot = a.snapshot();
    save_device(lab, d);
    std::cout << "device " << d.index << " provisioned (state in " << lab.device_state_path(d.index)
              << ")\n";
    return 0;
}

int cmd_tamper(const std::string& workdir, std::size_t device, const std::string& kind) {
    Lab lab = Lab::open(workdir);
    DeviceState d = load_device(lab, device);
    sim::TamperKind k = sim::parse_tamper_kind(kind);
    const std::string& first = d.manifest.artifact_paths.front();
    fs::path target = fs::path(d.root) / first;

    switch (k) {
        case sim::TamperKind::ModifyArtifact: {
            std::fstream f(target, std::ios::in | std::ios::out | std::ios::binary);
            if (!f) throw Error(Errc::storage_failure, "cannot open " + target.string());
            char byte = 0;
            f.read(&byte, 1);
            byte = static_cast<char>(byte ^ 0x01);
            f.seekp(0);
            f.write(&byte, 1);
            std::cout << "modified " << target.string() << " (first byte flipped)\n";
            break;
        }
        case sim::TamperKind::DeleteArtifact:
            if (!fs::remove(target)) {
                throw Error(Errc::storage_failure, target.string() + " was already absent");
            }
            std::cout << "deleted " << target.string() << "\n";
            break;
        case sim::TamperKind::Restore: {
            fs::path pristine = fs::path(workdir) / "pristine" / std::to_string(device);
            for (const auto& path : d.manifest.artifact_paths) {
                fs::copy_file(pristine / path, fs::path(d.root) / path,
                              fs::copy_options::overwrite_existing);
            }
            std::cout << "restored " << d.manifest.artifact_paths.size() << " artifact(s)\n";
            break;
        }
        case sim::TamperKind::UpdateSoftware:
            throw Error(Errc::config_invalid,
                        "update_software is a scenario event; use run-scenario");
    }
    return 0;
}

int cmd_scan(const std::string& workdir, std::size_t device) {
    Lab lab = Lab::open(workdir);
    lab.load_registry();
    DeviceState d = load_device(lab, device);

    applet::AppletConfig cfg;
    cfg.device_id = d.device_id;
    cfg.applet_id = d.applet_id;
    cfg.policy = d.policy;
    cfg.provider_key = lab.sp_key.verify_key();
    applet::Applet a = applet::Applet::from_snapshot(cfg, d.snapshot);

    std::uint64_t now = wall_clock_us();
    measure::MeasurementReport report =
        sim::measure_or_anomaly(d.manifest, measure::fs_provider(d.root), now);
    applet::ScanOutcome outcome = a.scan_epoch(report, now);

    std::cout << "scan composite " << report.composite.short_hex() << " action "
              << wire::action_name(outcome.entry.action_taken) << "\n";
    if (outcome.archive) {
        auto [count, root] = lab.verifier.ingest_archive(*outcome.archive, d.device_id, now);
        std::cout << "archived " << count << " log entries to the verifier store (head "
                  << root.entry_count << ")\n";
    }
    if (outcome.dispute) {
        verifier::DisputeDecision decision = lab.verifier.handle_dispute(*outcome.dispute, now);
        std::cout << "dispute -> " << decision.describe() << "\n";
        if (decision.kind == verifier::DisputeDecision::Kind::UpdateBenchmark) {
            a.handle_verifier_response(applet::VerifierDecision::update(decision.benchmark));
        } else {
            a.handle_verifier_response(applet::VerifierDecision::act(decision.action));
        }
    } else {
        std::cout << "match; waiting for the next epoch\n";
    }
    std::cout << "mode " << applet::mode_name(a.mode()) << ", consecutive alarms "
              << a.consecutive_alarms() << "\n";

    d.snapshot = a.snapshot();
    save_device(lab, d);
    return 0;
}

int cmd_run_scenario(const std::string& config_path, std::optional<std::uint64_t> seed,
                     const std::string& workdir, const std::string& out_path, bool tcp) {
    sim::ScenarioConfig config = sim::parse_scenario_config(KvConfig::load(config_path));
    if (seed) config.seed = *seed;
    if (tcp) config.use_tcp = true;
    sim::ScenarioResult result = sim::run_scenario(config, workdir);
    std::cout << result.report.to_text();
    if (!out_path.empty()) {
        write_text_file(out_path, result.report.to_tsv());
        std::cout << "machine-readable report written to " << out_path << "\n";
    }
    bool healthy = result.report.false_negatives == 0 && result.report.store_audit_ok &&
                   result.report.ledger_audit_ok;
    return healthy ? 0 : 1;
}

int cmd_bench_hash(std::size_t iterations, const std::string& tsv_path) {
    auto reports = bench::bench_hash(iterations);
    std::cout << bench::reports_to_text(reports);
    if (!tsv_path.empty()) write_text_file(tsv_path, bench::reports_to_tsv(reports));
    return 0;
}

int cmd_bench_store(std::size_t iterations, std::size_t preload, const std::string& path,
                    bool no_fsync, const std::string& tsv_path) {
    std::string store_path = path;
    if (store_path.empty()) {
        store_path = (fs::temp_directory_path() /
                      ("dimsim-bench-" + std::to_string(wall_clock_us()) + ".store"))
                         .string();
    }
    auto reports = bench::bench_store(iterations, preload, store_path, !no_fsync);
    std::cout << bench::reports_to_text(reports);
    if (!tsv_path.empty()) write_text_file(tsv_path, bench::reports_to_tsv(reports));
    if (path.empty()) fs::remove(store_path);
    return 0;
}

int cmd_audit_store(const std::string& path) {
    immustore::AuditResult result = immustore::Store::audit_file(path);
    if (result.ok) {
        std::cout << "store chain ok\n";
        return 0;
    }
    std::cout << "CORRUPTION at index " << result.first_bad_index << ": " << result.detail << "\n";
    return 1;
}

int cmd_audit_ledger(const std::string& path, bool dump) {
    if (dump) std::cout << pdl::Ledger::dump_file(path);
    pdl::LedgerAudit result = pdl::Ledger::verify_file(path);
    if (result.ok) {
        if (!dump) std::cout << "ledger ok\n";
        return 0;
    }
    if (!dump) {
        std::cout << "CORRUPTION at height " << result.first_bad_height << ": " << result.detail
                  << "\n";
    }
    return 1;
}

int cmd_serve(const std::string& config_path) {
    KvConfig config = KvConfig::load(config_path);
    std::uint16_t port = static_cast<std::uint16_t>(config.get_int("listen_port", 7816));
    std::string store_path = config.get_or("store_path", "verifier.store");
    std::string ledger_path = config.get_or("ledger_path", "");
    int default_action = static_cast<int>(config.get_int("default_action", 0x05));

    auto store = immustore::Store::open(store_path);
    std::optional<pdl::Ledger> ledger;
    if (!ledger_path.empty()) ledger = pdl::Ledger::open(ledger_path, {});
    verifier::Verifier v(store, ledger ? &*ledger : nullptr,
                         wire::to_action_code(static_cast<std::uint8_t>(default_action)));

    for (const auto& spec : config.get_all("device")) {
        auto colon = spec.find(':');
        if (colon == std::string::npos) {
            throw Error(Errc::config_invalid, "device must be <hex id>:<software_id>");
        }
        v.register_device(from_hex(spec.substr(0, colon)), spec.substr(colon + 1));
    }
    for (const auto& spec : config.get_all("provider")) {
        auto colon = spec.find(':');
        if (colon == std::string::npos) {
            throw Error(Errc::config_invalid, "provider must be <id>:<hex key>");
        }
        VerifyKey key;
        Bytes raw = from_hex(spec.substr(colon + 1));
        if (raw.size() != key.bytes.size()) {
            throw Error(Errc::config_invalid, "provider key must be 32 bytes of hex");
        }
        std::copy(raw.begin(), raw.end(), key.bytes.begin());
        v.register_provider(spec.substr(0, colon), key);
    }
    for (const auto& peer : config.get_all("quorum_peer")) {
        std::cout << "quorum peer (coordinated by the caller): " << peer << "\n";
    }

    verifier::VerifierService service(v, wall_clock_us);
    service.start(port);
    std::cout << "verifier listening on 127.0.0.1:" << service.port() << " (store " << store_path
              << ")\n";
    while (true) std::this_thread::sleep_for(std::chrono::seconds(3600));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DIMSIM device-integrity monitoring simulator"};
    app.require_subcommand(1);

    std::string workdir = "dimsim-work";
    std::string manifest_path;
    std::string root = ".";
    std::uint32_t threshold = 3;
    bool no_autonomous = false;
    auto* provision = app.add_subcommand("provision", "provision a device from a manifest");
    provision->add_option("--workdir", workdir, "lab directory");
    provision->add_option("--manifest", manifest_path, "manifest file")->required();
    provision->add_option("--root", root, "artifact root directory");
    provision->add_option("--threshold", threshold, "alarm block threshold");
    provision->add_flag("--no-autonomous-block", no_autonomous, "disable autonomous blocking");

    std::size_t device = 0;
    std::string kind;
    auto* tamper = app.add_subcommand("tamper", "mutate a provisioned device's artifacts");
    tamper->add_option("--workdir", workdir, "lab directory");
    tamper->add_option("--device", device, "device index")->required();
    tamper->add_option("--kind", kind, "modify_artifact | delete_artifact | restore")->required();

    auto* scan = app.add_subcommand("scan", "run one measurement epoch for a device");
    scan->add_option("--workdir", workdir, "lab directory");
    scan->add_option("--device", device, "device index");

    std::string config_path;
    std::string out_path;
    std::uint64_t seed_value = 0;
    bool tcp = false;
    auto* run = app.add_subcommand("run-scenario", "run a multi-device scenario");
    run->add_option("--config", config_path, "scenario config file")->required();
    auto* seed_opt = run->add_option("--seed", seed_value, "override the config seed");
    run->add_option("--workdir", workdir, "scenario working directory");
    run->add_option("--out", out_path, "write the TSV report here");
    run->add_flag("--tcp", tcp, "route verifier frames over TCP loopback");

    std::size_t iterations = 1000;
    std::size_t preload = 10'000;
    std::string bench_path;
    std::string tsv_path;
    bool no_fsync = false;
    auto* bench_cmd = app.add_subcommand("bench", "latency benchmarks");
    auto* bench_hash_cmd = bench_cmd->add_subcommand("hash", "32-byte hash and compare");
    bench_hash_cmd->add_option("--iterations", iterations, ">= 1000");
    bench_hash_cmd->add_option("--tsv", tsv_path, "write TSV report here");
    auto* bench_store_cmd = bench_cmd->add_subcommand("store", "store append / get_latest");
    bench_store_cmd->add_option("--iterations", iterations, ">= 1000");
    bench_store_cmd->add_option("--preload", preload, "records preloaded before measuring");
    bench_store_cmd->add_option("--path", bench_path, "store file (default: temp, removed)");
    bench_store_cmd->add_flag("--no-fsync", no_fsync, "skip fsync per append");
    bench_store_cmd->add_option("--tsv", tsv_path, "write TSV report here");
    bench_cmd->require_subcommand(1);

    std::string audit_path;
    bool dump = false;
    auto* audit = app.add_subcommand("audit", "re-verify persisted files");
    auto* audit_store_cmd = audit->add_subcommand("store", "verify a store file's hash chain");
    audit_store_cmd->add_option("--path", audit_path, "store file")->required();
    auto* audit_ledger_cmd = audit->add_subcommand("ledger", "verify a ledger file");
    audit_ledger_cmd->add_option("--path", audit_path, "ledger file")->required();
    audit_ledger_cmd->add_flag("--dump", dump, "print blocks before the verdict");
    audit->require_subcommand(1);

    auto* serve = app.add_subcommand("serve", "run a verifier frame endpoint over TCP");
    serve->add_option("--config", config_path, "key = value config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*provision) return cmd_provision(workdir, manifest_path, root, threshold, !no_autonomous);
        if (*tamper) return cmd_tamper(workdir, device, kind);
        if (*scan) return cmd_scan(workdir, device);
        if (*run) {
            std::optional<std::uint64_t> seed;
            if (seed_opt->count() > 0) seed = seed_value;
            return cmd_run_scenario(config_path, seed, workdir, out_path, tcp);
        }
        if (*bench_hash_cmd) return cmd_bench_hash(iterations, tsv_path);
        if (*bench_store_cmd) {
            return cmd_bench_store(iterations, preload, bench_path, no_fsync, tsv_path);
        }
        if (*audit_store_cmd) return cmd_audit_store(audit_path);
        if (*audit_ledger_cmd) return cmd_audit_ledger(audit_path, dump);
        if (*serve) return cmd_serve(config_path);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
