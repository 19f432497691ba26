#include "dimsim/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "dimsim/error.hpp"
#include "dimsim/immustore.hpp"
#include "dimsim/measure.hpp"

namespace dimsim::bench {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_us(Clock::time_point start) {
    return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

void require_iterations(std::size_t iterations) {
    // Matches the measurement methodology: at least 1000 samples per series.
    if (iterations < 1000) {
        throw Error(Errc::config_invalid, "benchmarks need >= 1000 iterations");
    }
}

}  // namespace

BenchReport summarize(const std::string& operation, const std::string& unit,
                      std::vector<double> samples) {
    if (samples.empty()) throw Error(Errc::config_invalid, "no samples");
    BenchReport report;
    report.operation = operation;
    report.unit = unit;
    report.iterations = samples.size();
    std::sort(samples.begin(), samples.end());
    report.min = samples.front();
    report.max = samples.back();
    std::size_t mid = samples.size() / 2;
    report.median =
        samples.size() % 2 == 1 ? samples[mid] : (samples[mid - 1] + samples[mid]) / 2.0;
    double mean = 0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(samples.size());
    report.stddev = std::sqrt(var);
    return report;
}

std::string BenchReport::to_text() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%-18s  n=%zu  min=%.3f %s  median=%.3f %s  max=%.3f %s  stddev=%.3f %s",
                  operation.c_str(), iterations, min, unit.c_str(), median, unit.c_str(), max,
                  unit.c_str(), stddev, unit.c_str());
    return buf;
}

std::string BenchReport::tsv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s\t%zu\t%s\t%.3f\t%.3f\t%.3f\t%.3f", operation.c_str(),
                  iterations, unit.c_str(), min, median, max, stddev);
    return buf;
}

std::vector<BenchReport> bench_hash(std::size_t iterations, std::uint64_t seed) {
    require_iterations(iterations);
    std::mt19937_64 rng(seed);

    std::vector<double> hash_samples;
    hash_samples.reserve(iterations);
    Bytes input = random_bytes(rng, 32);
    volatile std::uint8_t sink = 0;
    for (std::size_t i = 0; i < iterations; ++i) {
        input[i % input.size()] = static_cast<std::uint8_t>(rng());
        auto start = Clock::now();
        Digest d = measure::hash_bytes(input);
        hash_samples.push_back(elapsed_us(start));
        sink = sink ^ d.bytes[0];
    }

    std::vector<double> cmp_samples;
    cmp_samples.reserve(iterations);
    Digest a = measure::hash_bytes(random_bytes(rng, 32));
    Digest b = a;
    for (std::size_t i = 0; i < iterations; ++i) {
        if (i % 2 == 0) b.bytes[31] ^= 0x01;  // alternate match / mismatch
        auto start = Clock::now();
        bool same = measure::compare(a, b);
        cmp_samples.push_back(elapsed_us(start));
        sink = sink ^ static_cast<std::uint8_t>(same);
    }
    (void)sink;

    return {summarize("hash_32B", "us", std::move(hash_samples)),
            summarize("compare_32B", "us", std::move(cmp_samples))};
}

std::vector<BenchReport> bench_store(std::size_t iterations, std::size_t preload_count,
                                     const std::string& store_path, bool fsync_each_append,
                                     std::uint64_t seed) {
    require_iterations(iterations);
    std::mt19937_64 rng(seed);

    auto software_key = [](std::size_t i) { return "sw." + std::to_string(i); };

    {
        // Preload is setup, not measurement: skip fsync for speed.
        auto store = immustore::Store::open(store_path, false);
        for (std::size_t i = 0; i < preload_count; ++i) {
            immustore::Record record{software_key(i), random_bytes(rng, 32),
                                     1'000'000 + static_cast<std::uint64_t>(i)};
            store.append(record);
        }
    }
    auto store = immustore::Store::open(store_path, fsync_each_append);

    std::vector<double> write_samples;
    write_samples.reserve(iterations);
    std::uint64_t ts = 2'000'000'000;
    for (std::size_t i = 0; i < iterations; ++i) {
        immustore::Record record{software_key(rng() % std::max<std::size_t>(preload_count, 1)),
                                 random_bytes(rng, 32), ts++};
        auto start = Clock::now();
        store.append(record);
        write_samples.push_back(elapsed_us(start) / 1000.0);  // ms
    }

    std::vector<double> read_samples;
    read_samples.reserve(iterations);
    volatile std::uint64_t sink = 0;
    for (std::size_t i = 0; i < iterations; ++i) {
        std::string key = software_key(rng() % std::max<std::size_t>(preload_count, 1));
        auto start = Clock::now();
        auto latest = store.get_latest(key);
        read_samples.push_back(elapsed_us(start) / 1000.0);  // ms
        if (latest) sink = sink + latest->second.index;
    }
    (void)sink;

    return {summarize("store_append", "ms", std::move(write_samples)),
            summarize("store_get_latest", "ms", std::move(read_samples))};
}

std::string reports_to_text(const std::vector<BenchReport>& reports) {
    std::ostringstream out;
    for (const auto& r : reports) out << r.to_text() << "\n";
    return out.str();
}

std::string reports_to_tsv(const std::vector<BenchReport>& reports) {
    std::ostringstream out;
    out << "operation\titerations\tunit\tmin\tmedian\tmax\tstddev\n";
    for (const auto& r : reports) out << r.tsv_row() << "\n";
    return out.str();
}

}  // namespace dimsim::bench
