#include "dimsim/error.hpp"

namespace dimsim {

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::invalid_field: return "InvalidField";
        case Errc::truncated: return "Truncated";
        case Errc::trailing_bytes: return "TrailingBytes";
        case Errc::lc_mismatch: return "LcMismatch";
        case Errc::unknown_code: return "UnknownCode";
        case Errc::wrong_state: return "WrongState";
        case Errc::receipt_mismatch: return "ReceiptMismatch";
        case Errc::non_monotone_timestamp: return "NonMonotoneTimestamp";
        case Errc::missing_artifact: return "MissingArtifact";
        case Errc::not_found: return "NotFound";
        case Errc::unknown_device: return "UnknownDevice";
        case Errc::unknown_signer: return "UnknownSigner";
        case Errc::bad_signature: return "BadSignature";
        case Errc::bad_receipt: return "BadReceipt";
        case Errc::bad_confirmation: return "BadConfirmation";
        case Errc::benchmark_mismatch: return "BenchmarkMismatch";
        case Errc::wrong_role: return "WrongRole";
        case Errc::quorum_not_met: return "QuorumNotMet";
        case Errc::no_matching_contract: return "NoMatchingContract";
        case Errc::malformed_batch: return "MalformedBatch";
        case Errc::incomplete_vote: return "IncompleteVote";
        case Errc::config_invalid: return "ConfigInvalid";
        case Errc::storage_failure: return "StorageFailure";
    }
    return "UnknownError";
}

}  // namespace dimsim
