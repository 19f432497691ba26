// Python bindings for the main operations: hashing and comparison, the wire
// codecs, the attestation applet state machine, the verifiable store, the
// ledger, dispute handling and the scenario runner.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dimsim/bench.hpp"
#include "dimsim/sim.hpp"
#include "dimsim/verifier_service.hpp"

namespace py = pybind11;
using namespace dimsim;

namespace {

Bytes to_vec(const py::bytes& b) {
    std::string s = b;
    return Bytes(s.begin(), s.end());
}

py::bytes to_py(std::span<const std::uint8_t> data) {
    return py::bytes(reinterpret_cast<const char*>(data.data()), data.size());
}

Digest digest_from_py(const py::bytes& b) {
    return Digest::from_span(to_vec(b));
}

measure::FileProvider provider_from_map(std::map<std::string, py::bytes> files) {
    auto shared = std::make_shared<std::map<std::string, Bytes>>();
    for (auto& [path, content] : files) (*shared)[path] = to_vec(content);
    return [shared](const std::string& path) -> std::optional<Bytes> {
        auto it = shared->find(path);
        if (it == shared->end()) return std::nullopt;
        return it->second;
    };
}

}  // namespace

PYBIND11_MODULE(_dimsim, m) {
    m.doc() = "Device-integrity monitoring simulator: eUICC-style attestation applets, "
              "a verifiable store, a permissioned ledger and a scenario engine.";

    py::register_exception<Error>(m, "DimsimError");

    // ---- digests and hashing ------------------------------------------------
    py::class_<Digest>(m, "Digest")
        .def_static("from_hex", &Digest::from_hex)
        .def_static("from_bytes", &digest_from_py)
        .def_property_readonly("bytes", [](const Digest& d) { return to_py(d.bytes); })
        .def("hex", &Digest::hex)
        .def("__eq__", [](const Digest& a, const Digest& b) { return a == b; })
        .def("__hash__", [](const Digest& d) {
            std::size_t h = 0;
            for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes[i];
            return h;
        })
        .def("__repr__", [](const Digest& d) { return "Digest(" + d.hex() + ")"; });

    m.def("hash_bytes", [](const py::bytes& content) { return measure::hash_bytes(to_vec(content)); },
          "SHA-256 of the given bytes");
    m.def("compare", &measure::compare, "Constant-time digest equality");

    // ---- measurement --------------------------------------------------------
    py::class_<measure::MeasurementReport>(m, "MeasurementReport")
        .def_readonly("software_id", &measure::MeasurementReport::software_id)
        .def_readonly("composite", &measure::MeasurementReport::composite)
        .def_readonly("measured_at_us", &measure::MeasurementReport::measured_at_us)
        .def_readonly("per_artifact", &measure::MeasurementReport::per_artifact);

    m.def(
        "measure_files",
        [](const std::string& software_id, std::map<std::string, py::bytes> files,
           std::uint64_t now_us) {
            measure::Manifest manifest;
            manifest.software_id = software_id;
            for (const auto& [path, content] : files) manifest.artifact_paths.push_back(path);
            return measure::measure_manifest(manifest, provider_from_map(std::move(files)), now_us);
        },
        py::arg("software_id"), py::arg("files"), py::arg("now_us") = 0,
        "Measure an in-memory artifact tree into a report");

    // ---- wire ---------------------------------------------------------------
    py::enum_<wire::ActionCode>(m, "ActionCode")
        .value("NULL_ACTION", wire::ActionCode::Null)
        .value("INITIATE_INVESTIGATION", wire::ActionCode::InitiateInvestigation)
        .value("RESTRICT_EXECUTION", wire::ActionCode::RestrictExecution)
        .value("ISOLATE_DEVICE", wire::ActionCode::IsolateDevice)
        .value("CONTAIN_DEVICE", wire::ActionCode::ContainDevice)
        .value("REVOKE_DEVICE", wire::ActionCode::RevokeDevice)
        .value("STOP_AND_QUARANTINE_FILE", wire::ActionCode::StopAndQuarantineFile)
        .value("REQUEST_DEEPER_INVESTIGATION", wire::ActionCode::RequestDeeperInvestigation);

    m.def("action_name",
          [](std::uint8_t code) { return std::string(wire::action_name(wire::to_action_code(code))); },
          "Table label for a 1-byte action code");

    py::class_<wire::DisputePacket>(m, "DisputePacket")
        .def(py::init([](const py::bytes& device_id, const py::bytes& applet_id,
                         std::uint64_t timestamp_us, const Digest& current, const Digest& previous,
                         wire::ActionCode action) {
                 wire::DisputePacket p;
                 p.device_id = to_vec(device_id);
                 p.applet_id = to_vec(applet_id);
                 p.timestamp_us = timestamp_us;
                 p.current_hash = current;
                 p.previous_hash = previous;
                 p.action_taken = action;
                 return p;
             }),
             py::arg("device_id"), py::arg("applet_id"), py::arg("timestamp_us"),
             py::arg("current_hash"), py::arg("previous_hash"), py::arg("action_taken"))
        .def_property_readonly("device_id",
                               [](const wire::DisputePacket& p) { return to_py(p.device_id); })
        .def_property_readonly("applet_id",
                               [](const wire::DisputePacket& p) { return to_py(p.applet_id); })
        .def_readonly("timestamp_us", &wire::DisputePacket::timestamp_us)
        .def_readonly("current_hash", &wire::DisputePacket::current_hash)
        .def_readonly("previous_hash", &wire::DisputePacket::previous_hash)
        .def_readonly("action_taken", &wire::DisputePacket::action_taken)
        .def("__eq__",
             [](const wire::DisputePacket& a, const wire::DisputePacket& b) { return a == b; });

    m.def("encode_dispute",
          [](const wire::DisputePacket& p) { return to_py(wire::encode_dispute(p)); });
    m.def("decode_dispute",
          [](const py::bytes& b) { return wire::decode_dispute(to_vec(b)); });

    py::class_<wire::ApduCommand>(m, "ApduCommand")
        .def(py::init([](std::uint8_t cla, std::uint8_t ins, std::uint8_t p1, std::uint8_t p2,
                         const py::bytes& data, std::optional<std::uint8_t> le) {
                 wire::ApduCommand c{cla, ins, p1, p2, to_vec(data), le};
                 return c;
             }),
             py::arg("cla"), py::arg("ins"), py::arg("p1") = 0, py::arg("p2") = 0,
             py::arg("data") = py::bytes(), py::arg("le") = std::nullopt)
        .def_readonly("cla", &wire::ApduCommand::cla)
        .def_readonly("ins", &wire::ApduCommand::ins)
        .def_readonly("p1", &wire::ApduCommand::p1)
        .def_readonly("p2", &wire::ApduCommand::p2)
        .def_property_readonly("data", [](const wire::ApduCommand& c) { return to_py(c.data); })
        .def_readonly("le", &wire::ApduCommand::le)
        .def("__eq__",
             [](const wire::ApduCommand& a, const wire::ApduCommand& b) { return a == b; });

    py::class_<wire::ApduResponse>(m, "ApduResponse")
        .def_property_readonly("data", [](const wire::ApduResponse& r) { return to_py(r.data); })
        .def_property_readonly("sw", &wire::ApduResponse::sw);

    m.def("encode_apdu", [](const wire::ApduCommand& c) { return to_py(wire::encode_apdu(c)); });
    m.def("decode_apdu", [](const py::bytes& b) { return wire::decode_apdu(to_vec(b)); });

    // ---- receipts and keys --------------------------------------------------
    py::class_<Receipt>(m, "Receipt")
        .def_readonly("provider_id", &Receipt::provider_id)
        .def_readonly("digest", &Receipt::digest);

    py::class_<VerifyKey>(m, "VerifyKey")
        .def_property_readonly("bytes", [](const VerifyKey& k) { return to_py(k.bytes); });

    py::class_<SigningKey>(m, "SigningKey")
        .def(py::init([](const py::bytes& seed) {
                 Bytes raw = to_vec(seed);
                 if (raw.size() != 32) throw Error(Errc::invalid_field, "seed must be 32 bytes");
                 std::array<std::uint8_t, 32> s{};
                 std::copy(raw.begin(), raw.end(), s.begin());
                 return SigningKey(s);
             }),
             py::arg("seed"))
        .def_static("generate", &SigningKey::generate)
        .def_property_readonly("verify_key", &SigningKey::verify_key);

    m.def("make_receipt", &make_receipt, py::arg("provider_id"), py::arg("digest"),
          py::arg("key"));

    // ---- applet -------------------------------------------------------------
    py::enum_<applet::Mode>(m, "Mode")
        .value("UNPROVISIONED", applet::Mode::Unprovisioned)
        .value("AWAITING_CONFIRMATION", applet::Mode::AwaitingConfirmation)
        .value("ACTIVE", applet::Mode::Active)
        .value("BLOCKED", applet::Mode::Blocked);

    py::class_<applet::ScanOutcome>(m, "ScanOutcome")
        .def_property_readonly("dispute",
                               [](const applet::ScanOutcome& o) { return o.dispute; })
        .def_property_readonly("action_taken",
                               [](const applet::ScanOutcome& o) { return o.entry.action_taken; })
        .def_property_readonly("archive", [](const applet::ScanOutcome& o) {
            return o.archive ? static_cast<py::object>(py::int_(o.archive->size()))
                             : py::none();
        });

    py::class_<applet::Applet>(m, "Applet")
        .def(py::init([](const py::bytes& device_id, const py::bytes& applet_id,
                         std::uint32_t threshold, bool autonomous_block,
                         std::optional<VerifyKey> provider_key) {
                 applet::AppletConfig cfg;
                 cfg.device_id = to_vec(device_id);
                 cfg.applet_id = to_vec(applet_id);
                 cfg.policy.alarm_block_threshold = threshold;
                 cfg.policy.autonomous_block = autonomous_block;
                 cfg.provider_key = provider_key;
                 return applet::Applet(std::move(cfg));
             }),
             py::arg("device_id"), py::arg("applet_id"), py::arg("threshold") = 3,
             py::arg("autonomous_block") = true, py::arg("provider_key") = std::nullopt)
        .def_property_readonly("mode", &applet::Applet::mode)
        .def_property_readonly("benchmark", [](const applet::Applet& a) { return a.benchmark(); })
        .def_property_readonly("consecutive_alarms", &applet::Applet::consecutive_alarms)
        .def_property_readonly("log_size", [](const applet::Applet& a) { return a.log().size(); })
        .def("submit_initial_measurement",
             [](applet::Applet& a, const measure::MeasurementReport& r) {
                 wire::Frame f = a.submit_initial_measurement(r);
                 return to_py(wire::encode_frame(f));
             })
        .def("confirm_benchmark", &applet::Applet::confirm_benchmark)
        .def("scan_epoch", &applet::Applet::scan_epoch, py::arg("report"), py::arg("now_us"))
        .def("update_benchmark",
             [](applet::Applet& a, const Digest& d) {
                 a.handle_verifier_response(applet::VerifierDecision::update(d));
             })
        .def("apply_action",
             [](applet::Applet& a, wire::ActionCode code) {
                 a.handle_verifier_response(applet::VerifierDecision::act(code));
             })
        .def("handle_apdu", &applet::Applet::handle_apdu);

    // ---- store --------------------------------------------------------------
    py::class_<immustore::RootDigest>(m, "RootDigest")
        .def_readonly("entry_count", &immustore::RootDigest::entry_count)
        .def_readonly("head_hash", &immustore::RootDigest::head_hash);

    py::class_<immustore::InclusionProof>(m, "InclusionProof")
        .def_readonly("index", &immustore::InclusionProof::index);

    py::class_<immustore::Store>(m, "Store")
        .def_static("open", &immustore::Store::open, py::arg("path"),
                    py::arg("fsync_each_append") = true)
        .def("append",
             [](immustore::Store& s, const std::string& key, const py::bytes& value,
                std::uint64_t timestamp_us) {
                 auto [index, root] = s.append({key, to_vec(value), timestamp_us});
                 return py::make_tuple(index, root);
             },
             py::arg("key"), py::arg("value"), py::arg("timestamp_us"))
        .def("get_latest",
             [](const immustore::Store& s, const std::string& key)
                 -> std::optional<py::tuple> {
                 auto latest = s.get_latest(key);
                 if (!latest) return std::nullopt;
                 return py::make_tuple(to_py(latest->first.value), latest->first.timestamp_us,
                                       latest->second);
             })
        .def("history",
             [](const immustore::Store& s, const std::string& key) {
                 py::list out;
                 for (const auto& r : s.history(key)) {
                     out.append(py::make_tuple(to_py(r.value), r.timestamp_us));
                 }
                 return out;
             })
        .def_property_readonly("size", &immustore::Store::size)
        .def("root", &immustore::Store::root)
        .def("audit", [](const immustore::Store& s) { return s.audit().ok; })
        .def_static("audit_file",
                    [](const std::string& path) { return immustore::Store::audit_file(path).ok; });

    m.def("verify_proof", &immustore::verify_proof, py::arg("proof"), py::arg("root"));

    // ---- ledger -------------------------------------------------------------
    py::enum_<pdl::Role>(m, "Role")
        .value("SOLUTION_PROVIDER", pdl::Role::SolutionProvider)
        .value("DEVICE_VENDOR", pdl::Role::DeviceVendor)
        .value("SERVICE_PROVIDER", pdl::Role::ServiceProvider);

    py::class_<pdl::Ledger>(m, "Ledger")
        .def_static(
            "open",
            [](const std::string& path,
               const std::vector<std::tuple<std::string, pdl::Role, VerifyKey>>& participants) {
                std::vector<pdl::Participant> parts;
                for (const auto& [id, role, key] : participants) parts.push_back({id, role, key});
                return pdl::Ledger::open(path, std::move(parts));
            },
            py::arg("path"), py::arg("participants") = std::vector<std::tuple<std::string, pdl::Role, VerifyKey>>{})
        .def("register_benchmark",
             [](pdl::Ledger& l, const std::string& software_id, const Digest& hash,
                const std::string& submitted_by,
                const std::vector<std::pair<std::string, const SigningKey*>>& signers) {
                 pdl::ContractRecord rec{pdl::ContractKind::BenchmarkRegistration, software_id,
                                         hash, std::nullopt, submitted_by};
                 std::vector<pdl::BlockSignature> sigs;
                 for (const auto& [id, key] : signers) {
                     sigs.push_back(pdl::Ledger::sign_records({rec}, id, *key));
                 }
                 return l.submit_contract(rec, sigs).height;
             },
             py::arg("software_id"), py::arg("hash"), py::arg("submitted_by"), py::arg("signers"))
        .def("execute_update_contract",
             [](pdl::Ledger& l, const std::string& software_id, const Digest& new_hash,
                const Receipt& confirmation, const std::string& submitted_by,
                const std::vector<std::pair<std::string, const SigningKey*>>& signers) {
                 pdl::ContractRecord rec{pdl::ContractKind::SoftwareUpdateExecution, software_id,
                                         new_hash, confirmation, submitted_by};
                 std::vector<pdl::BlockSignature> sigs;
                 for (const auto& [id, key] : signers) {
                     sigs.push_back(pdl::Ledger::sign_records({rec}, id, *key));
                 }
                 return l.execute_update_contract(software_id, new_hash, confirmation,
                                                  submitted_by, sigs)
                     .height;
             })
        .def("query_benchmark", &pdl::Ledger::query_benchmark)
        .def("verify", [](const pdl::Ledger& l) { return l.verify().ok; })
        .def_property_readonly("height", [](const pdl::Ledger& l) { return l.blocks().size(); })
        .def_static("verify_file",
                    [](const std::string& path) { return pdl::Ledger::verify_file(path).ok; })
        .def_static("dump_file", &pdl::Ledger::dump_file);

    // ---- verifier -----------------------------------------------------------
    py::class_<verifier::DisputeDecision>(m, "DisputeDecision")
        .def_property_readonly("is_update_benchmark",
                               [](const verifier::DisputeDecision& d) {
                                   return d.kind ==
                                          verifier::DisputeDecision::Kind::UpdateBenchmark;
                               })
        .def_readonly("benchmark", &verifier::DisputeDecision::benchmark)
        .def_readonly("action", &verifier::DisputeDecision::action)
        .def("describe", &verifier::DisputeDecision::describe);

    py::class_<verifier::Verifier>(m, "Verifier")
        .def(py::init([](immustore::Store& store, pdl::Ledger* ledger,
                         wire::ActionCode default_action) {
                 return verifier::Verifier(store, ledger, default_action);
             }),
             py::arg("store"), py::arg("ledger") = nullptr,
             py::arg("default_action") = wire::ActionCode::RevokeDevice, py::keep_alive<1, 2>(),
             py::keep_alive<1, 3>())
        .def("register_device",
             [](verifier::Verifier& v, const py::bytes& device_id, const std::string& software_id) {
                 v.register_device(to_vec(device_id), software_id);
             })
        .def("register_provider", &verifier::Verifier::register_provider)
        .def("record_initial_benchmark", &verifier::Verifier::record_initial_benchmark,
             py::arg("software_id"), py::arg("digest"), py::arg("now_us"))
        .def("handle_dispute", &verifier::Verifier::handle_dispute, py::arg("packet"),
             py::arg("now_us"))
        .def("record_software_update",
             [](verifier::Verifier& v, const std::string& software_id, const Digest& new_hash,
                const Receipt& confirmation, std::uint64_t now_us) {
                 auto [index, root] =
                     v.record_software_update({software_id, new_hash, confirmation}, now_us);
                 return index;
             });

    // ---- scenario runner and benches ---------------------------------------
    m.def(
        "run_scenario",
        [](const std::string& config_text, const std::string& workdir) {
            sim::ScenarioConfig config = sim::parse_scenario_config(KvConfig::parse(config_text));
            sim::ScenarioResult result = sim::run_scenario(config, workdir);
            py::dict out;
            out["text"] = result.report.to_text();
            out["tsv"] = result.report.to_tsv();
            out["false_positives"] = result.report.false_positives;
            out["false_negatives"] = result.report.false_negatives;
            out["disputes"] = result.report.total_disputes;
            out["frames"] = result.report.total_frames;
            out["store_audit_ok"] = result.report.store_audit_ok;
            out["ledger_audit_ok"] = result.report.ledger_audit_ok;
            out["store_path"] = result.store_path;
            out["ledger_path"] = result.ledger_path;
            py::list detections;
            for (const auto& d : result.report.detections) {
                py::dict row;
                row["device"] = d.device;
                row["tamper_epoch"] = d.tamper_epoch;
                row["kind"] = std::string(sim::tamper_kind_name(d.kind));
                row["detection_epoch"] =
                    d.detection_epoch ? py::object(py::int_(*d.detection_epoch)) : py::none();
                row["decision"] = d.decision;
                detections.append(row);
            }
            out["detections"] = detections;
            return out;
        },
        py::arg("config_text"), py::arg("workdir"),
        "Run a scenario from key = value config text; returns the report as a dict");

    m.def("bench_hash",
          [](std::size_t iterations) {
              py::list out;
              for (const auto& r : bench::bench_hash(iterations)) {
                  py::dict row;
                  row["operation"] = r.operation;
                  row["unit"] = r.unit;
                  row["median"] = r.median;
                  row["min"] = r.min;
                  row["max"] = r.max;
                  row["stddev"] = r.stddev;
                  out.append(row);
              }
              return out;
          },
          py::arg("iterations") = 1000);

    m.attr("LOG_RING_CAPACITY") = applet::LogRing::kCapacity;
    m.attr("SW_OK") = wire::kSwOk;
    m.attr("SW_WRONG_DATA") = wire::kSwWrongData;
    m.attr("SW_CONDITIONS_NOT_SATISFIED") = wire::kSwConditionsNotSatisfied;
    m.attr("SW_NOT_FOUND") = wire::kSwNotFound;

#ifdef DIMSIM_VERSION
#define DIMSIM_STR2(x) #x
#define DIMSIM_STR(x) DIMSIM_STR2(x)
    m.attr("__version__") = DIMSIM_STR(DIMSIM_VERSION);
#else
    m.attr("__version__") = "dev";
#endif
}
