// Acceptance suite for the fixed-head training engine. Each criterion prints
// exactly one [PASS]/[FAIL] line with the measured quantities; the process
// exits nonzero if any hard criterion fails. The benchmark speedup target is
// advisory (its correctness gate is not).
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fixhead/bench.hpp"
#include "fixhead/experiment.hpp"
#include "fixhead/gradcheck.hpp"
#include "fixhead/hadamard.hpp"
#include "fixhead/linalg.hpp"
#include "fixhead/projection.hpp"
#include "fixhead/rng.hpp"

using namespace fixhead;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", idx, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

ExperimentConfig desk_config(HeadMode mode, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.head_mode = mode;
  cfg.alpha_trainable = true;
  cfg.alpha_value = 1.0;
  cfg.hidden_widths = {64, 64};
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.data.blobs = {10, 32, 100, 0.3};
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// ---- criterion 1: FWHT equals the dense Sylvester product -----------------

void criterion_kernel_equivalence() {
  Stopwatch timer;
  Rng rng(101);
  double worst = 0.0;
  for (Index n = 2; n <= 1024; n *= 2) {
    const Matrix h = sylvester(n);
    for (int rep = 0; rep < 10; ++rep) {
      const Vector x = rng_normal(rng, n);
      const Vector dense = gemv(h, x);
      Vector fast = x;
      fwht_in_place(fast);
      const double scale = std::max(dense.cwiseAbs().maxCoeff(), 1e-300);
      worst = std::max(worst, (fast - dense).cwiseAbs().maxCoeff() / scale);
    }
  }
  const double elapsed = timer.seconds();
  report(1, "FWHT matches dense Sylvester multiply (rel 1e-12, n up to 1024)",
         worst < 1e-12 && elapsed < 10.0,
         fmt("max rel err %.3g, %.1f s", worst, elapsed));
}

// ---- criterion 2: orthonormality ------------------------------------------

void criterion_orthonormality() {
  Stopwatch timer;
  const std::vector<std::pair<Index, Index>> shapes = {
      {2, 1},    {2, 2},    {4, 3},    {8, 8},    {16, 5},    {16, 16},   {32, 10},
      {32, 32},  {64, 8},   {64, 64},  {96, 40},  {128, 10},  {128, 128}, {200, 50},
      {256, 100}, {256, 256}, {300, 7}, {384, 200}, {512, 64}, {512, 512}};
  double worst = 0.0;
  std::uint64_t seed = 200;
  for (const auto& [n, c] : shapes) {
    const FixedProjection p = random_orthonormal(n, c, seed++);
    const Matrix gram = p.q.transpose() * p.q - Matrix::Identity(c, c);
    worst = std::max(worst, gram.cwiseAbs().maxCoeff());
  }
  const double elapsed = timer.seconds();
  report(2, "random_orthonormal gram error < 1e-10 on 20 shapes up to 512x512",
         worst < 1e-10 && elapsed < 30.0,
         fmt("max |Q^T Q - I| = %.3g, %.1f s", worst, elapsed));
}

// ---- criterion 3: gradients ------------------------------------------------

void criterion_gradients() {
  Stopwatch timer;
  const GradCheckReport r = run_gradient_checks(2026);
  const double elapsed = timer.seconds();
  report(3, "analytic gradients match central differences (rel 1e-4)",
         r.max_rel_error < kGradCheckTolerance && r.num_checks >= 20 && elapsed < 60.0,
         fmt("max rel err %.3g over %lld checks, %.1f s", r.max_rel_error,
             static_cast<long long>(r.num_checks), elapsed));
}

// ---- criteria 4/5/8/9: paired desk-scale comparisons -----------------------

struct PairedStats {
  double mean_abs_delta = 0.0;
  double max_val_error = 0.0;
  int learned_train_wins = 0;  // seeds where learned final train error <= fixed
  double elapsed = 0.0;
};

PairedStats paired_comparison(HeadMode fixed_mode, std::vector<RunResult>& fixed_runs) {
  Stopwatch timer;
  PairedStats stats;
  const std::uint64_t seeds[] = {1, 2, 3};
  for (const std::uint64_t seed : seeds) {
    ComparisonReport rep = compare_fixed_vs_learned(desk_config(fixed_mode, seed));
    stats.mean_abs_delta += std::abs(rep.fixed.final_val_error - rep.learned.final_val_error);
    stats.max_val_error = std::max({stats.max_val_error, rep.fixed.final_val_error,
                                    rep.learned.final_val_error});
    if (rep.learned.final_train_error <= rep.fixed.final_train_error)
      ++stats.learned_train_wins;
    fixed_runs.push_back(std::move(rep.fixed));
  }
  stats.mean_abs_delta /= 3.0;
  stats.elapsed = timer.seconds();
  return stats;
}

// ---- criterion 6/7: alpha dynamics and sweep --------------------------------

void criterion_alpha_dynamics(const AlphaArm& trainable) {
  const std::vector<MetricsRow>& h = trainable.result.history;
  bool increasing = true;
  for (std::size_t e = 3; e < h.size(); ++e)
    if (h[e].alpha <= h[e - 1].alpha) increasing = false;

  const std::size_t third = h.size() / 3;
  const double d1 = h[third - 1].alpha - h[0].alpha;
  const double d2 = h[2 * third - 1].alpha - h[third - 1].alpha;
  const double d3 = h[h.size() - 1].alpha - h[2 * third - 1].alpha;
  const double tol = 0.1 * std::abs(d1);
  const bool decelerating = d2 <= d1 + tol && d3 <= d2 + tol;

  report(6, "trainable alpha grows strictly after epoch 2 with decaying increments",
         increasing && decelerating,
         fmt("alpha 1 -> %.3g, thirds +%.3g/+%.3g/+%.3g", h.back().alpha, d1, d2, d3));
}

void criterion_alpha_sweep(const std::vector<AlphaArm>& arms) {
  const double err01 = arms[0].result.final_val_error;
  const double err1 = arms[1].result.final_val_error;
  const double err10 = arms[2].result.final_val_error;
  const double errT = arms[3].result.final_val_error;
  const bool near = std::abs(err1 - errT) <= 0.02 && std::abs(err10 - errT) <= 0.02;
  const bool small_alpha_worse = err01 > err1 && err01 > err10;
  report(7, "frozen alpha {1,10} within 2 points of trainable; alpha 0.1 strictly worse",
         near && small_alpha_worse,
         fmt("val err: 0.1 -> %.3f, 1 -> %.3f, 10 -> %.3f, trainable -> %.3f", err01, err1, err10,
             errT));
}

// ---- criterion 10: benchmark ------------------------------------------------

void criterion_benchmark() {
  try {
    const BenchReport rep = bench_head(1024, 1024, 101);
    const bool soft_ok = rep.speedup >= 2.0;
    report(10, "FWHT head vs dense gemv at n=c=1024 (correctness hard, speedup soft)", true,
           fmt("agreement within 1e-10; speedup %.1fx%s", rep.speedup,
               soft_ok ? "" : " — below the 2x soft target (advisory only)"));
  } catch (const std::exception& e) {
    report(10, "FWHT head vs dense gemv at n=c=1024 (correctness hard, speedup soft)", false,
           fmt("correctness gate failed: %s", e.what()));
  }
}

// ---- criterion 11: CLI determinism ------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FIXHEAD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

void criterion_cli_determinism() {
  Stopwatch timer;
  const fs::path dir = fs::temp_directory_path() / "fixhead_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string flags = "train --seed 1 --out ";
  const int rc_a = run_cli(flags + (dir / "a").string());
  const int rc_b = run_cli(flags + (dir / "b").string());
  const std::string a = slurp(dir / "a" / "metrics.csv");
  const std::string b = slurp(dir / "b" / "metrics.csv");
  const bool ok = rc_a == 0 && rc_b == 0 && !a.empty() && a == b;
  report(11, "repeated train invocations reproduce metrics.csv bitwise",
         ok, fmt("exit codes %d/%d, %zu bytes%s", rc_a, rc_b, a.size(),
                 ok ? ", identical" : ", MISMATCH"));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  std::printf("fixhead acceptance suite\n");

  criterion_kernel_equivalence();
  criterion_orthonormality();
  criterion_gradients();

  std::vector<RunResult> fixed_runs;
  fixed_runs.reserve(16);

  const PairedStats orth = paired_comparison(HeadMode::Orthonormal, fixed_runs);
  report(4, "fixed orthonormal head matches learned head on default blobs",
         orth.mean_abs_delta <= 0.01 && orth.max_val_error <= 0.05 && orth.elapsed < 180.0,
         fmt("mean |delta val err| %.4f, worst val err %.4f over 3 paired seeds, %.1f s",
             orth.mean_abs_delta, orth.max_val_error, orth.elapsed));

  report(5, "learned head's final train error <= fixed in most seeds",
         orth.learned_train_wins >= 2, fmt("%d of 3 seeds", orth.learned_train_wins));

  const std::vector<AlphaArm> arms = sweep_alpha(desk_config(HeadMode::Orthonormal, 1),
                                                 {0.1, 1.0, 10.0});
  criterion_alpha_dynamics(arms.back());
  criterion_alpha_sweep(arms);

  const PairedStats had = paired_comparison(HeadMode::Hadamard, fixed_runs);
  report(8, "hadamard head matches learned head at the same tolerances",
         had.mean_abs_delta <= 0.01 && had.max_val_error <= 0.05 && had.elapsed < 180.0,
         fmt("mean |delta val err| %.4f, worst val err %.4f over 3 paired seeds, %.1f s",
             had.mean_abs_delta, had.max_val_error, had.elapsed));

  bool all_fixed = true;
  int fixed_count = 0;
  for (const RunResult& r : fixed_runs) {
    all_fixed = all_fixed && r.initial_head_checksum == r.final_head_checksum;
    ++fixed_count;
  }
  for (const AlphaArm& arm : arms) {
    all_fixed =
        all_fixed && arm.result.initial_head_checksum == arm.result.final_head_checksum;
    ++fixed_count;
  }
  report(9, "head weight checksums identical before and after every fixed-mode run", all_fixed,
         fmt("%d runs checked", fixed_count));

  criterion_benchmark();
  criterion_cli_determinism();

  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", g_failures);
  return 1;
}
