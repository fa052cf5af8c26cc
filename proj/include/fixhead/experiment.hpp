#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "fixhead/data.hpp"
#include "fixhead/net.hpp"
#include "fixhead/types.hpp"

namespace fixhead {

struct BlobsSpec {
  Index n_classes = 10;
  Index dim = 32;
  Index per_class = 100;
  double noise_sigma = 0.3;
};

struct IdxSpec {
  std::filesystem::path images;
  std::filesystem::path labels;
  Index limit = -1;  // negative = all
};

struct DataSpec {
  enum class Kind { Blobs, Idx };
  Kind kind = Kind::Blobs;
  BlobsSpec blobs;
  IdxSpec idx;
};

struct ExperimentConfig {
  HeadMode head_mode = HeadMode::Orthonormal;
  bool alpha_trainable = true;  // ignored in learned mode
  double alpha_value = 1.0;     // initial (trainable) or frozen constant
  LossKind loss = LossKind::SoftmaxCrossEntropy;
  std::vector<Index> hidden_widths = {64, 64};
  SgdConfig sgd;
  Index epochs = 30;
  Index batch_size = 32;
  DataSpec data;
  std::uint64_t seed = 1;
  // When non-empty, run() saves the final model here.
  std::filesystem::path checkpoint_path;
};

struct MetricsRow {
  Index epoch = 0;
  double train_loss = 0.0;
  double train_error = 0.0;
  double val_error = 0.0;
  double alpha = 0.0;
};

// Training blew up (NaN loss); carries the epoch where it happened.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(Index epoch, const std::string& detail);
  Index epoch() const { return epoch_; }

 private:
  Index epoch_;
};

struct RunResult {
  std::vector<MetricsRow> history;
  std::uint64_t shuffle_checksum = 0;  // digest of every epoch's sample order
  std::uint64_t initial_head_checksum = 0;
  std::uint64_t final_head_checksum = 0;
  double final_val_error = 0.0;
  double final_train_error = 0.0;
  Mlp model;
};

// Full training run: seeded data, seeded init, seeded per-epoch shuffling.
// Deterministic per config. Fixed-mode head weights are checksum-verified
// after every optimizer step.
RunResult run(const ExperimentConfig& config);

// Same config, two arms: the learned baseline and a fixed head (base's mode
// when already fixed, orthonormal otherwise). Both arms share seeds, so data,
// non-head init, and sample order are identical.
struct ComparisonReport {
  RunResult learned;
  RunResult fixed;
  std::vector<double> val_error_delta;  // fixed - learned, per epoch
};

ComparisonReport compare_fixed_vs_learned(const ExperimentConfig& base);

// One frozen-alpha run per value plus one trainable-alpha run (last arm).
struct AlphaArm {
  bool trainable = false;
  double alpha = 1.0;
  RunResult result;
};

std::vector<AlphaArm> sweep_alpha(const ExperimentConfig& base, const std::vector<double>& values);

// Header `epoch,train_loss,train_error,val_error,alpha`, 9 significant
// digits, one newline-terminated row per epoch.
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

double evaluate_error(Mlp& mlp, const Dataset& ds);

// Worker cap for independent arms (FIXHEAD_THREADS, default 1).
int max_worker_threads();

}  // namespace fixhead
