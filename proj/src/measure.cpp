#include "dimsim/measure.hpp"

#include <openssl/crypto.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dimsim/error.hpp"

namespace dimsim::measure {

Digest hash_bytes(std::span<const std::uint8_t> content) {
    Digest d;
    SHA256(content.data(), content.size(), d.bytes.data());
    return d;
}

Digest hash_bytes(std::string_view content) {
    return hash_bytes(std::span(reinterpret_cast<const std::uint8_t*>(content.data()),
                                content.size()));
}

bool compare(const Digest& a, const Digest& b) {
    return CRYPTO_memcmp(a.bytes.data(), b.bytes.data(), Digest::kSize) == 0;
}

namespace {

bool valid_software_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    });
}

std::string normalize_path(const std::string& path) {
    return std::filesystem::path(path).lexically_normal().generic_string();
}

}  // namespace

Manifest canonicalize(const Manifest& manifest) {
    if (!valid_software_id(manifest.software_id)) {
        throw Error(Errc::invalid_field,
                    "software_id must be 1-64 chars of [a-zA-Z0-9._-]: '" + manifest.software_id +
                        "'");
    }
    Manifest out;
    out.software_id = manifest.software_id;
    out.artifact_paths.reserve(manifest.artifact_paths.size());
    for (const auto& p : manifest.artifact_paths) {
        if (p.empty()) throw Error(Errc::invalid_field, "empty artifact path");
        out.artifact_paths.push_back(normalize_path(p));
    }
    std::sort(out.artifact_paths.begin(), out.artifact_paths.end());
    auto dup = std::adjacent_find(out.artifact_paths.begin(), out.artifact_paths.end());
    if (dup != out.artifact_paths.end()) {
        throw Error(Errc::invalid_field, "duplicate artifact path: " + *dup);
    }
    return out;
}

FileProvider fs_provider(const std::string& root_dir) {
    return [root = std::filesystem::path(root_dir)](const std::string& path) -> std::optional<Bytes> {
        std::filesystem::path full = root / path;
        std::ifstream in(full, std::ios::binary);
        if (!in) return std::nullopt;
        Bytes content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return content;
    };
}

Digest composite_of(const std::vector<std::pair<std::string, Digest>>& per_artifact) {
    Bytes concat;
    concat.reserve(per_artifact.size() * Digest::kSize);
    for (const auto& [path, digest] : per_artifact) {
        concat.insert(concat.end(), digest.bytes.begin(), digest.bytes.end());
    }
    return hash_bytes(concat);
}

MeasurementReport measure_manifest(const Manifest& manifest, const FileProvider& provider,
                                   std::uint64_t now_us) {
    Manifest canon = canonicalize(manifest);
    MeasurementReport report;
    report.software_id = canon.software_id;
    report.measured_at_us = now_us;
    report.per_artifact.reserve(canon.artifact_paths.size());
    for (const auto& path : canon.artifact_paths) {
        std::optional<Bytes> content = provider(path);
        if (!content) throw Error(Errc::missing_artifact, path);
        report.per_artifact.emplace_back(path, hash_bytes(*content));
    }
    report.composite = composite_of(report.per_artifact);
    return report;
}

Manifest parse_manifest_text(std::string_view text) {
    Manifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    bool have_header = false;
    auto trim = [](std::string s) {
        auto is_space = [](unsigned char c) { return std::isspace(c); };
        while (!s.empty() && is_space(s.front())) s.erase(s.begin());
        while (!s.empty() && is_space(s.back())) s.pop_back();
        return s;
    };
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!have_header) {
            constexpr std::string_view kHeader = "software_id:";
            if (t.rfind(kHeader, 0) != 0) {
                throw Error(Errc::invalid_field, "manifest must start with 'software_id: <id>'");
            }
            m.software_id = trim(t.substr(kHeader.size()));
            have_header = true;
            continue;
        }
        m.artifact_paths.push_back(t);
    }
    if (!have_header) throw Error(Errc::invalid_field, "empty manifest");
    return canonicalize(m);
}

std::string manifest_to_text(const Manifest& manifest) {
    Manifest canon = canonicalize(manifest);
    std::string out = "software_id: " + canon.software_id + "\n";
    for (const auto& p : canon.artifact_paths) {
        out += p;
        out += '\n';
    }
    return out;
}

}  // namespace dimsim::measure
