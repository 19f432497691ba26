#include <doctest.h>

#include <fstream>
#include <map>
#include <random>

#include "dimsim/measure.hpp"
#include "support/ref_sha256.hpp"
#include "support/temp_dir.hpp"

using namespace dimsim;
using namespace dimsim::measure;

namespace {

measure::FileProvider map_provider(const std::map<std::string, Bytes>& files) {
    return [&files](const std::string& path) -> std::optional<Bytes> {
        auto it = files.find(path);
        if (it == files.end()) return std::nullopt;
        return it->second;
    };
}

}  // namespace

TEST_SUITE_BEGIN("measure");

TEST_CASE("hash_bytes matches the frozen SHA-256 vectors") {
    CHECK(hash_bytes("").hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hash_bytes("abc").hex() ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hash_bytes("abc") == hash_bytes("abc"));
}

TEST_CASE("hash_bytes agrees with the independent reference implementation") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 300; ++i) {
        Bytes input(rng() % 300);
        for (auto& b : input) b = static_cast<std::uint8_t>(rng());
        CHECK(hash_bytes(input).bytes == testsupport::ref_sha256(input));
    }
    // Multi-block inputs cross the 64-byte boundary.
    for (std::size_t n : {55, 56, 63, 64, 65, 127, 128, 1000}) {
        Bytes input(n, 0x61);
        CHECK(hash_bytes(input).bytes == testsupport::ref_sha256(input));
    }
}

TEST_CASE("compare is an equality verdict") {
    Digest d = hash_bytes("payload");
    CHECK(compare(d, d));
    Digest flipped = d;
    flipped.bytes[31] ^= 0x01;
    CHECK_FALSE(compare(d, flipped));
}

TEST_CASE("manifest canonicalization") {
    Manifest m;
    m.software_id = "fw.device-1_x";
    m.artifact_paths = {"lib/z.so", "bin/app", "lib/./a.so"};
    Manifest canon = canonicalize(m);
    CHECK(canon.artifact_paths == std::vector<std::string>{"bin/app", "lib/a.so", "lib/z.so"});

    SUBCASE("duplicates rejected") {
        m.artifact_paths = {"bin/app", "bin/./app"};
        CHECK_THROWS_AS(canonicalize(m), Error);
    }
    SUBCASE("bad software ids rejected") {
        for (const std::string& id :
             std::vector<std::string>{"", "has space", "semi;colon", std::string(65, 'a')}) {
            Manifest bad;
            bad.software_id = id;
            CHECK_THROWS_AS(canonicalize(bad), Error);
        }
    }
}

TEST_CASE("measure_manifest composites") {
    std::map<std::string, Bytes> files;
    files["a.bin"] = to_bytes("hello-artifact");

    SUBCASE("empty manifest hashes the empty string") {
        Manifest m{"fw.x", {}};
        MeasurementReport r = measure_manifest(m, map_provider(files), 5);
        CHECK(r.composite == hash_bytes(""));
        CHECK(r.measured_at_us == 5);
    }

    SUBCASE("single file composite is the hash of its digest") {
        Manifest m{"fw.x", {"a.bin"}};
        MeasurementReport r = measure_manifest(m, map_provider(files), 5);
        // Independently derived: H(H(file)).
        CHECK(r.composite.hex() ==
              "e33c4ad196e3fe242e278dae0c489c1ae6d0cc2407362cb629713e5cbf546210");
        auto ref_inner = testsupport::ref_sha256(files["a.bin"]);
        CHECK(r.composite.bytes == testsupport::ref_sha256(ref_inner));
    }

    SUBCASE("input path order never changes the composite") {
        files["b.bin"] = to_bytes("second");
        files["c.bin"] = to_bytes("third");
        Manifest fwd{"fw.x", {"a.bin", "b.bin", "c.bin"}};
        Manifest rev{"fw.x", {"c.bin", "a.bin", "b.bin"}};
        CHECK(measure_manifest(fwd, map_provider(files), 1).composite ==
              measure_manifest(rev, map_provider(files), 1).composite);
    }

    SUBCASE("missing artifact is an anomaly") {
        Manifest m{"fw.x", {"a.bin", "gone.bin"}};
        try {
            measure_manifest(m, map_provider(files), 1);
            FAIL("expected MissingArtifact");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::missing_artifact);
            CHECK(std::string(e.what()).find("gone.bin") != std::string::npos);
        }
    }
}

TEST_CASE("single-bit flips always change the composite") {
    std::mt19937_64 rng(29);
    Bytes artifact(1024);
    for (auto& b : artifact) b = static_cast<std::uint8_t>(rng());
    std::map<std::string, Bytes> files{{"fw.bin", artifact}};
    Manifest m{"fw.x", {"fw.bin"}};
    Digest base = measure_manifest(m, map_provider(files), 0).composite;

    for (int i = 0; i < 1000; ++i) {
        std::size_t byte = rng() % artifact.size();
        std::uint8_t bit = 1 << (rng() % 8);
        files["fw.bin"][byte] ^= bit;
        CHECK(measure_manifest(m, map_provider(files), 0).composite != base);
        files["fw.bin"][byte] ^= bit;  // restore
    }
    CHECK(measure_manifest(m, map_provider(files), 0).composite == base);
}

TEST_CASE("manifest text format round-trips") {
    std::string text =
        "# monitored artifacts\n"
        "software_id: fw.dev01\n"
        "\n"
        "lib/core.so\n"
        "bin/app\n";
    Manifest m = parse_manifest_text(text);
    CHECK(m.software_id == "fw.dev01");
    CHECK(m.artifact_paths == std::vector<std::string>{"bin/app", "lib/core.so"});
    CHECK(parse_manifest_text(manifest_to_text(m)).artifact_paths == m.artifact_paths);

    CHECK_THROWS_AS(parse_manifest_text("bin/app\n"), Error);
    CHECK_THROWS_AS(parse_manifest_text(""), Error);
}

TEST_CASE("fs_provider reads files under the root") {
    testsupport::TempDir dir("measure");
    {
        std::ofstream out(dir.file("blob.bin"), std::ios::binary);
        out << "content";
    }
    auto provider = fs_provider(dir.path().string());
    auto content = provider("blob.bin");
    REQUIRE(content.has_value());
    CHECK(*content == to_bytes("content"));
    CHECK_FALSE(provider("missing.bin").has_value());
}

TEST_SUITE_END();
