#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixhead/experiment.hpp"

using namespace fixhead;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.head_mode = HeadMode::Orthonormal;
  cfg.hidden_widths = {16};
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.seed = 21;
  cfg.data.blobs = {3, 8, 20, 0.1};
  return cfg;
}

bool same_history(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].epoch != b[i].epoch) return false;
    if (a[i].train_loss != b[i].train_loss) return false;
    if (a[i].train_error != b[i].train_error) return false;
    if (a[i].val_error != b[i].val_error) return false;
    if (a[i].alpha != b[i].alpha) return false;
  }
  return true;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("noise-free blobs are solved exactly in every head mode") {
    for (const HeadMode mode : {HeadMode::Learned, HeadMode::Orthonormal, HeadMode::Hadamard}) {
      ExperimentConfig cfg = tiny_config();
      cfg.head_mode = mode;
      cfg.data.blobs.noise_sigma = 0.0;
      cfg.epochs = 6;
      const RunResult r = run(cfg);
      CHECK(r.final_val_error == 0.0);
      CHECK(r.history.size() == 6);
    }
  }

  TEST_CASE("runs are bitwise deterministic") {
    const RunResult a = run(tiny_config());
    const RunResult b = run(tiny_config());
    CHECK(same_history(a.history, b.history));
    CHECK(a.shuffle_checksum == b.shuffle_checksum);
    CHECK(a.final_head_checksum == b.final_head_checksum);
    CHECK(parameter_checksum(a.model) == parameter_checksum(b.model));

    ExperimentConfig other = tiny_config();
    other.seed = 22;
    const RunResult c = run(other);
    CHECK(!same_history(a.history, c.history));
  }

  TEST_CASE("fixed heads keep their weights, learned heads move") {
    ExperimentConfig cfg = tiny_config();
    for (const HeadMode mode : {HeadMode::Orthonormal, HeadMode::Hadamard}) {
      cfg.head_mode = mode;
      const RunResult r = run(cfg);
      CHECK(r.initial_head_checksum == r.final_head_checksum);
    }
    cfg.head_mode = HeadMode::Learned;
    const RunResult r = run(cfg);
    CHECK(r.initial_head_checksum != r.final_head_checksum);
  }

  TEST_CASE("frozen alpha never moves, trainable alpha does") {
    ExperimentConfig cfg = tiny_config();
    cfg.alpha_trainable = false;
    cfg.alpha_value = 0.7;
    const RunResult frozen = run(cfg);
    for (const MetricsRow& row : frozen.history) CHECK(row.alpha == 0.7);

    cfg.alpha_trainable = true;
    cfg.alpha_value = 1.0;
    const RunResult trained = run(cfg);
    CHECK(trained.history.back().alpha != 1.0);
  }

  TEST_CASE("comparison arms share data and sample order") {
    const ComparisonReport report = compare_fixed_vs_learned(tiny_config());
    CHECK(report.learned.model.head.mode == HeadMode::Learned);
    CHECK(report.fixed.model.head.mode == HeadMode::Orthonormal);
    CHECK(report.learned.shuffle_checksum == report.fixed.shuffle_checksum);
    REQUIRE(report.val_error_delta.size() == report.learned.history.size());
    for (std::size_t e = 0; e < report.val_error_delta.size(); ++e)
      CHECK(report.val_error_delta[e] ==
            report.fixed.history[e].val_error - report.learned.history[e].val_error);
  }

  TEST_CASE("comparison keeps the base head mode when already fixed") {
    ExperimentConfig cfg = tiny_config();
    cfg.head_mode = HeadMode::Hadamard;
    const ComparisonReport report = compare_fixed_vs_learned(cfg);
    CHECK(report.fixed.model.head.mode == HeadMode::Hadamard);
  }

  TEST_CASE("parallel arm execution changes nothing") {
    const ComparisonReport sequential = compare_fixed_vs_learned(tiny_config());
    REQUIRE(setenv("FIXHEAD_THREADS", "2", 1) == 0);
    CHECK(max_worker_threads() == 2);
    const ComparisonReport parallel = compare_fixed_vs_learned(tiny_config());
    REQUIRE(unsetenv("FIXHEAD_THREADS") == 0);
    CHECK(max_worker_threads() == 1);

    CHECK(same_history(sequential.learned.history, parallel.learned.history));
    CHECK(same_history(sequential.fixed.history, parallel.fixed.history));
  }

  TEST_CASE("the alpha sweep runs frozen arms in order and a trainable arm last") {
    const std::vector<double> values = {0.5, 2.0};
    const std::vector<AlphaArm> arms = sweep_alpha(tiny_config(), values);
    REQUIRE(arms.size() == 3);

    CHECK(!arms[0].trainable);
    CHECK(arms[0].alpha == 0.5);
    for (const MetricsRow& row : arms[0].result.history) CHECK(row.alpha == 0.5);

    CHECK(!arms[1].trainable);
    CHECK(arms[1].alpha == 2.0);
    for (const MetricsRow& row : arms[1].result.history) CHECK(row.alpha == 2.0);

    CHECK(arms[2].trainable);
    CHECK(arms[2].result.history.back().alpha != 1.0);

    // frozen arms differ only in alpha; everything else is seed-shared
    CHECK(arms[0].result.shuffle_checksum == arms[1].result.shuffle_checksum);
    CHECK(arms[0].result.shuffle_checksum == arms[2].result.shuffle_checksum);
  }

  TEST_CASE("a diverging run reports the epoch it blew up in") {
    ExperimentConfig cfg = tiny_config();
    cfg.head_mode = HeadMode::Learned;
    cfg.sgd.learning_rate = 1e30;
    cfg.sgd.momentum = 0.0;
    try {
      run(cfg);
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() >= 0);
      CHECK(e.epoch() < cfg.epochs);
      CHECK(std::string(e.what()).find("not finite") != std::string::npos);
    }
  }

  TEST_CASE("invalid configs are rejected up front") {
    ExperimentConfig cfg = tiny_config();
    cfg.epochs = 0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.hidden_widths.clear();
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.alpha_value = 0.0;
    CHECK_THROWS_AS(run(cfg), std::invalid_argument);
  }

  TEST_CASE("run can checkpoint its final model") {
    const fs::path path = fs::temp_directory_path() / "fixhead_experiment_ckpt.bin";
    ExperimentConfig cfg = tiny_config();
    cfg.checkpoint_path = path;
    const RunResult r = run(cfg);
    Mlp back = load_checkpoint(path);
    CHECK(parameter_checksum(back) == parameter_checksum(r.model));
    fs::remove(path);
  }

  TEST_CASE("metrics csv formatting is exact") {
    const fs::path path = fs::temp_directory_path() / "fixhead_metrics_fmt.csv";
    std::vector<MetricsRow> rows(2);
    rows[0] = {0, 0.5, 0.25, 0.125, 1.0};
    rows[1] = {1, 1.0 / 3.0, 1e-9, 123456.789, 2.5};
    write_metrics_csv(rows, path);
    CHECK(slurp(path) ==
          "epoch,train_loss,train_error,val_error,alpha\n"
          "0,0.5,0.25,0.125,1\n"
          "1,0.333333333,1e-09,123456.789,2.5\n");

    const std::vector<MetricsRow> back = read_metrics_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].epoch == 0);
    CHECK(back[0].train_loss == 0.5);
    CHECK(back[0].val_error == 0.125);
    CHECK(back[1].train_error == 1e-9);
    CHECK(back[1].alpha == 2.5);
    fs::remove(path);
  }

  TEST_CASE("an empty history writes just the header") {
    const fs::path path = fs::temp_directory_path() / "fixhead_metrics_empty.csv";
    write_metrics_csv({}, path);
    CHECK(slurp(path) == "epoch,train_loss,train_error,val_error,alpha\n");
    CHECK(read_metrics_csv(path).empty());
    fs::remove(path);
  }

  TEST_CASE("reading rejects a foreign header") {
    const fs::path path = fs::temp_directory_path() / "fixhead_metrics_bad.csv";
    {
      std::ofstream os(path, std::ios::binary);
      os << "step,loss\n0,1\n";
    }
    CHECK_THROWS_AS(read_metrics_csv(path), std::runtime_error);
    fs::remove(path);
  }

  TEST_CASE("a small gold run reproduces its committed metrics byte for byte") {
    ExperimentConfig cfg;
    cfg.head_mode = HeadMode::Orthonormal;
    cfg.hidden_widths = {16, 8};
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 5;
    cfg.data.blobs = {3, 8, 10, 0.1};
    const RunResult r = run(cfg);

    const fs::path fresh = fs::temp_directory_path() / "fixhead_metrics_tiny.csv";
    write_metrics_csv(r.history, fresh);
    const fs::path golden = fs::path(FIXHEAD_TEST_GOLDEN_DIR) / "metrics_tiny.csv";
    CHECK(slurp(fresh) == slurp(golden));
    fs::remove(fresh);
  }
}
