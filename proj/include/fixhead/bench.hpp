#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fixhead/types.hpp"

namespace fixhead {

struct BenchReport {
  Index n = 0;
  Index c = 0;
  double median_ns_dense = 0.0;
  double median_ns_fwht = 0.0;
  double speedup = 0.0;  // median_ns_dense / median_ns_fwht
  Index reps = 0;
  double checksum = 0.0;  // folded from outputs so the timed work cannot be elided
  std::vector<double> samples_dense_ns;
  std::vector<double> samples_fwht_ns;
};

// Times the truncated-Hadamard head both ways on identical inputs: an
// explicit c x n dense +-1/sqrt(n) matrix via gemv, and the FWHT kernel.
// 5 warmup runs each, medians over `reps` timed runs, single-threaded.
// Outputs must agree to 1e-10 before any timing happens.
BenchReport bench_head(Index n, Index c, Index reps, std::uint64_t seed = 42);

// Summary line: `n,c,median_ns_dense,median_ns_fwht,speedup`.
void write_bench_csv(const BenchReport& report, const std::filesystem::path& path);

// Raw per-rep timings for inspection: `rep,dense_ns,fwht_ns`.
void write_bench_samples_csv(const BenchReport& report, const std::filesystem::path& path);

}  // namespace fixhead
