#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dimsim/bytes.hpp"
#include "dimsim/digest.hpp"

namespace dimsim::measure {

// SHA-256 of content.
Digest hash_bytes(std::span<const std::uint8_t> content);
Digest hash_bytes(std::string_view content);

// Constant-time equality of two digests.
bool compare(const Digest& a, const Digest& b);

// What gets measured for one software_id: an ordered set of artifact paths.
// software_id: nonempty, <= 64 chars, [a-zA-Z0-9._-].
struct Manifest {
    std::string software_id;
    std::vector<std::string> artifact_paths;
};

// Validates the id, normalizes paths, sorts them lexicographically and
// rejects duplicates. All measurement goes through the canonical form, so
// input path order never changes a composite.
Manifest canonicalize(const Manifest& manifest);

// path -> content, or nullopt when the artifact is gone. Deletion is an
// integrity anomaly, never a silent skip.
using FileProvider = std::function<std::optional<Bytes>(const std::string& path)>;

FileProvider fs_provider(const std::string& root_dir);

struct MeasurementReport {
    std::string software_id;
    std::vector<std::pair<std::string, Digest>> per_artifact;  // canonical order
    Digest composite;  // hash of concatenated per-artifact digests
    std::uint64_t measured_at_us = 0;

    bool operator==(const MeasurementReport&) const = default;
};

// Hashes every artifact in canonical order and folds the digests into the
// composite. Throws Errc::missing_artifact naming the first absent path.
MeasurementReport measure_manifest(const Manifest& manifest, const FileProvider& provider,
                                   std::uint64_t now_us);

// Composite of an already-hashed artifact list (canonical order assumed).
Digest composite_of(const std::vector<std::pair<std::string, Digest>>& per_artifact);

// Manifest text format:
//   software_id: <id>
//   <one path per line>
// Blank lines and '#' comments are ignored.
Manifest parse_manifest_text(std::string_view text);
std::string manifest_to_text(const Manifest& manifest);

}  // namespace dimsim::measure
