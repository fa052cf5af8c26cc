#include "fixhead/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "fixhead/hadamard.hpp"
#include "fixhead/linalg.hpp"
#include "fixhead/rng.hpp"
#include "fixhead/util.hpp"

namespace fixhead {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double now_ns() {
  return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                 std::chrono::steady_clock::now().time_since_epoch())
                                 .count());
}

}  // namespace

BenchReport bench_head(Index n, Index c, Index reps, std::uint64_t seed) {
  if (!is_power_of_two(n)) throw std::invalid_argument("bench_head: n must be a power of two");
  if (c < 1 || c > n) throw std::invalid_argument("bench_head: need 1 <= c <= n");
  if (reps < 30) throw std::invalid_argument("bench_head: reps must be >= 30");

  const HadamardHeadGeometry geom = make_hadamard_geometry(n, c);
  const double alpha = 1.25;

  // Explicit truncated classifier for the dense arm.
  const Matrix h = sylvester(n);
  Matrix dense(c, n);
  for (Index i = 0; i < c; ++i)
    for (Index j = 0; j < n; ++j) dense(i, j) = geom.row_scale * h(i, j);

  Rng rng(seed);
  Vector b(c);
  for (Index i = 0; i < c; ++i) b[i] = rng.next_normal();

  // Shared input pool: unit vectors, reused in the same order by both arms.
  const Index pool_size = std::min<Index>(reps, 16);
  std::vector<Vector> inputs;
  for (Index p = 0; p < pool_size; ++p) {
    Vector x = rng_normal(rng, n);
    const double norm = l2_norm(x);
    x /= norm;
    inputs.push_back(std::move(x));
  }

  const auto dense_eval = [&](const Vector& x) {
    Vector y = gemv(dense, x);
    for (Index i = 0; i < c; ++i) y[i] = alpha * y[i] + b[i];
    return y;
  };

  // Correctness gate: no timing for mismatched outputs.
  for (const Vector& x : inputs) {
    const Vector yd = dense_eval(x);
    const Vector yf = hadamard_logits(geom, x, alpha, b);
    const double diff = (yd - yf).cwiseAbs().maxCoeff();
    if (diff > 1e-10)
      throw std::runtime_error("bench_head: dense and FWHT outputs disagree by " +
                               std::to_string(diff));
  }

  BenchReport report;
  report.n = n;
  report.c = c;
  report.reps = reps;

  for (Index w = 0; w < 5; ++w) report.checksum += dense_eval(inputs[w % pool_size])[0];
  for (Index r = 0; r < reps; ++r) {
    const Vector& x = inputs[r % pool_size];
    const double t0 = now_ns();
    const Vector y = dense_eval(x);
    const double t1 = now_ns();
    report.samples_dense_ns.push_back(t1 - t0);
    report.checksum += y[0] + y[c - 1];
  }

  for (Index w = 0; w < 5; ++w)
    report.checksum += hadamard_logits(geom, inputs[w % pool_size], alpha, b)[0];
  for (Index r = 0; r < reps; ++r) {
    const Vector& x = inputs[r % pool_size];
    const double t0 = now_ns();
    const Vector y = hadamard_logits(geom, x, alpha, b);
    const double t1 = now_ns();
    report.samples_fwht_ns.push_back(t1 - t0);
    report.checksum += y[0] + y[c - 1];
  }

  report.median_ns_dense = median(report.samples_dense_ns);
  report.median_ns_fwht = median(report.samples_fwht_ns);
  report.speedup = report.median_ns_dense / report.median_ns_fwht;
  return report;
}

void write_bench_csv(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_bench_csv: cannot open " + path.string());
  os << "n,c,median_ns_dense,median_ns_fwht,speedup\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(report.n),
                static_cast<long long>(report.c), report.median_ns_dense, report.median_ns_fwht,
                report.speedup);
  os << buf;
  if (!os) throw std::runtime_error("write_bench_csv: write failed for " + path.string());
}

void write_bench_samples_csv(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_bench_samples_csv: cannot open " + path.string());
  os << "rep,dense_ns,fwht_ns\n";
  char buf[128];
  for (std::size_t r = 0; r < report.samples_dense_ns.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", r, report.samples_dense_ns[r],
                  report.samples_fwht_ns[r]);
    os << buf;
  }
  if (!os) throw std::runtime_error("write_bench_samples_csv: write failed for " + path.string());
}

}  // namespace fixhead
