#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dimsim {

// Every recoverable failure in the system carries one of these classes.
// The CLI prints the class name on stderr; the Python bindings surface it
// in the exception text.
enum class Errc {
    invalid_field,
    truncated,
    trailing_bytes,
    lc_mismatch,
    unknown_code,
    wrong_state,
    receipt_mismatch,
    non_monotone_timestamp,
    missing_artifact,
    not_found,
    unknown_device,
    unknown_signer,
    bad_signature,
    bad_receipt,
    bad_confirmation,
    benchmark_mismatch,
    wrong_role,
    quorum_not_met,
    no_matching_contract,
    malformed_batch,
    incomplete_vote,
    config_invalid,
    storage_failure,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

}  // namespace dimsim
