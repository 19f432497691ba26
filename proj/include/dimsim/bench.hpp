#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dimsim::bench {

// Latency summary over one measured operation.
struct BenchReport {
    std::string operation;
    std::size_t iterations = 0;
    std::string unit;  // "us" or "ms"
    double min = 0;
    double median = 0;
    double max = 0;
    double stddev = 0;

    std::string to_text() const;
    std::string tsv_row() const;
};

BenchReport summarize(const std::string& operation, const std::string& unit,
                      std::vector<double> samples);

// Hashing of 32-byte inputs and digest comparison, wall-clock timed.
// iterations must be >= 1000.
std::vector<BenchReport> bench_hash(std::size_t iterations, std::uint64_t seed = 0x5eed);

// Store append (fsync mode as given) and get_latest against a store preloaded
// with preload_count records. iterations must be >= 1000.
std::vector<BenchReport> bench_store(std::size_t iterations, std::size_t preload_count,
                                     const std::string& store_path, bool fsync_each_append = true,
                                     std::uint64_t seed = 0x5eed);

std::string reports_to_text(const std::vector<BenchReport>& reports);
std::string reports_to_tsv(const std::vector<BenchReport>& reports);

}  // namespace dimsim::bench
