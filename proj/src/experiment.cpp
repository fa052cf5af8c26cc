#include "fixhead/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>

#include "fixhead/projection.hpp"
#include "fixhead/rng.hpp"
#include "fixhead/util.hpp"

namespace fixhead {

namespace {

// Seed streams for the run itself; streams 1-3 belong to make_blobs.
constexpr std::uint64_t kStreamIdxSplit = 4;
constexpr std::uint64_t kStreamProjection = 10;
constexpr std::uint64_t kStreamInit = 11;
constexpr std::uint64_t kStreamShuffle = 12;

TrainValSplit load_data(const ExperimentConfig& config) {
  if (config.data.kind == DataSpec::Kind::Blobs) {
    const BlobsSpec& b = config.data.blobs;
    return make_blobs(b.n_classes, b.dim, b.per_class, b.noise_sigma, config.seed);
  }
  // Single IDX pair: deterministic 80/20 split, mirroring the blobs policy.
  Dataset all = load_idx(config.data.idx.images, config.data.idx.labels, config.data.idx.limit);
  const Index total = all.size();
  if (total < 2) throw std::runtime_error("experiment: need at least 2 samples to split");
  std::vector<Index> order(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng shuffler(derive_seed(config.seed, kStreamIdxSplit));
  for (Index i = total - 1; i > 0; --i) {
    const Index j = static_cast<Index>(shuffler.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const Index n_val = std::max<Index>(1, total / 5);
  const Index n_train = total - n_val;
  TrainValSplit split;
  const auto take = [&](Index begin, Index end) {
    Dataset out;
    out.features = Matrix(end - begin, all.dim());
    out.labels.reserve(static_cast<std::size_t>(end - begin));
    out.n_classes = all.n_classes;
    for (Index i = begin; i < end; ++i) {
      const Index src = order[static_cast<std::size_t>(i)];
      out.features.row(i - begin) = all.features.row(src);
      out.labels.push_back(all.labels[static_cast<std::size_t>(src)]);
    }
    return out;
  };
  split.train = take(0, n_train);
  split.val = take(n_train, total);
  return split;
}

Head build_head(const ExperimentConfig& config, Index n_features, Index n_classes) {
  switch (config.head_mode) {
    case HeadMode::Learned:
      return make_learned_head(n_features, n_classes);
    case HeadMode::Orthonormal: {
      const std::uint64_t proj_seed = derive_seed(config.seed, kStreamProjection);
      const FixedProjection p =
          n_classes <= n_features
              ? random_orthonormal(n_features, n_classes, proj_seed)
              : unit_rows(n_features, n_classes, proj_seed, /*warn_if_strict_available=*/false);
      return make_orthonormal_head(p, config.alpha_value, config.alpha_trainable);
    }
    case HeadMode::Hadamard:
      return make_hadamard_head(n_features, n_classes, config.alpha_value,
                                config.alpha_trainable);
  }
  throw std::logic_error("build_head: unreachable");
}

Index predict(Mlp& mlp, const Vector& z) {
  const ForwardResult fr = forward(mlp, z);
  Index best = 0;
  for (Index i = 1; i < fr.logits.size(); ++i)
    if (fr.logits[i] > fr.logits[best]) best = i;
  return best;
}

// Runs `jobs` on up to max_worker_threads() workers; exceptions re-thrown in
// job order so failures are deterministic.
void run_jobs(std::vector<std::function<void()>> jobs) {
  const int workers = std::min<int>(max_worker_threads(), static_cast<int>(jobs.size()));
  std::vector<std::exception_ptr> errors(jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
          try {
            jobs[i]();
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

DivergenceError::DivergenceError(Index epoch, const std::string& detail)
    : std::runtime_error("diverged at epoch " + std::to_string(epoch) + ": " + detail),
      epoch_(epoch) {}

int max_worker_threads() {
  const char* env = std::getenv("FIXHEAD_THREADS");
  if (env == nullptr) return 1;
  const int v = std::atoi(env);
  return v >= 1 ? v : 1;
}

double evaluate_error(Mlp& mlp, const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  Index wrong = 0;
  for (Index i = 0; i < ds.size(); ++i) {
    const Vector z = ds.features.row(i).transpose();
    if (predict(mlp, z) != ds.labels[static_cast<std::size_t>(i)]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

RunResult run(const ExperimentConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("run: epochs must be >= 1");
  if (config.batch_size < 1) throw std::invalid_argument("run: batch_size must be >= 1");
  if (config.hidden_widths.empty())
    throw std::invalid_argument("run: need at least one hidden layer");
  if (is_fixed_mode(config.head_mode) && config.alpha_value <= 0.0)
    throw std::invalid_argument("run: alpha must be > 0");

  const TrainValSplit data = load_data(config);
  const Index n_train = data.train.size();
  if (n_train == 0) throw std::runtime_error("run: empty training set");

  Head head = build_head(config, config.hidden_widths.back(), data.train.n_classes);
  Mlp mlp = make_mlp(data.train.dim(), config.hidden_widths, std::move(head), config.loss);
  init_params(mlp, derive_seed(config.seed, kStreamInit));
  if (is_fixed_mode(mlp.head.mode)) mlp.head.alpha = config.alpha_value;

  RunResult result;
  result.initial_head_checksum = head_weight_checksum(mlp.head);
  const bool fixed = is_fixed_mode(mlp.head.mode);

  const std::uint64_t shuffle_root = derive_seed(config.seed, kStreamShuffle);
  std::uint64_t shuffle_digest = 0xcbf29ce484222325ULL;

  std::vector<Index> perm(static_cast<std::size_t>(n_train));
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    SgdConfig step_cfg = config.sgd;
    step_cfg.learning_rate = scheduled_lr(config.sgd, epoch);

    for (Index i = 0; i < n_train; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng shuffler(derive_seed(shuffle_root, static_cast<std::uint64_t>(epoch)));
    for (Index i = n_train - 1; i > 0; --i) {
      const Index j = static_cast<Index>(shuffler.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    for (Index i = 0; i < n_train; ++i) {
      const auto u = static_cast<std::uint64_t>(perm[static_cast<std::size_t>(i)]);
      shuffle_digest = fnv1a64(&u, sizeof(u), shuffle_digest);
    }

    double loss_sum = 0.0;
    Index train_wrong = 0;
    for (Index start = 0; start < n_train; start += config.batch_size) {
      const Index stop = std::min<Index>(start + config.batch_size, n_train);
      zero_grads(mlp);
      for (Index i = start; i < stop; ++i) {
        const Index row = perm[static_cast<std::size_t>(i)];
        const Vector z = data.train.features.row(row).transpose();
        const Index target = data.train.labels[static_cast<std::size_t>(row)];
        const ForwardResult fr = forward(mlp, z);
        Index best = 0;
        for (Index k = 1; k < fr.logits.size(); ++k)
          if (fr.logits[k] > fr.logits[best]) best = k;
        if (best != target) ++train_wrong;
        loss_sum += backward(mlp, target);
      }
      sgd_step(mlp, step_cfg, stop - start);

      if (fixed) {
        if (head_weight_checksum(mlp.head) != result.initial_head_checksum)
          throw std::logic_error("run: fixed head weights changed during training");
        if (mlp.head.alpha_trainable && mlp.head.alpha <= 0.0)
          throw std::runtime_error("run: alpha became non-positive at epoch " +
                                   std::to_string(epoch));
      }
    }

    const double train_loss = loss_sum / static_cast<double>(n_train);
    if (!std::isfinite(train_loss)) throw DivergenceError(epoch, "train loss is not finite");

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = train_loss;
    row.train_error = static_cast<double>(train_wrong) / static_cast<double>(n_train);
    row.val_error = evaluate_error(mlp, data.val);
    row.alpha = mlp.head.alpha;
    result.history.push_back(row);
  }

  result.shuffle_checksum = shuffle_digest;
  result.final_head_checksum = head_weight_checksum(mlp.head);
  result.final_val_error = result.history.back().val_error;
  result.final_train_error = result.history.back().train_error;
  if (!config.checkpoint_path.empty()) save_checkpoint(mlp, config.checkpoint_path);
  result.model = std::move(mlp);
  return result;
}

ComparisonReport compare_fixed_vs_learned(const ExperimentConfig& base) {
  ExperimentConfig learned_cfg = base;
  learned_cfg.head_mode = HeadMode::Learned;
  learned_cfg.checkpoint_path.clear();
  ExperimentConfig fixed_cfg = base;
  fixed_cfg.head_mode = is_fixed_mode(base.head_mode) ? base.head_mode : HeadMode::Orthonormal;
  fixed_cfg.checkpoint_path.clear();

  ComparisonReport report;
  std::vector<std::function<void()>> jobs;
  jobs.emplace_back([&] { report.learned = run(learned_cfg); });
  jobs.emplace_back([&] { report.fixed = run(fixed_cfg); });
  run_jobs(std::move(jobs));

  if (report.learned.shuffle_checksum != report.fixed.shuffle_checksum)
    throw std::logic_error("compare: arms consumed different sample orderings");

  for (std::size_t e = 0; e < report.learned.history.size(); ++e)
    report.val_error_delta.push_back(report.fixed.history[e].val_error -
                                     report.learned.history[e].val_error);
  return report;
}

std::vector<AlphaArm> sweep_alpha(const ExperimentConfig& base, const std::vector<double>& values) {
  if (!is_fixed_mode(base.head_mode))
    throw std::invalid_argument("sweep_alpha: needs a fixed head mode");

  std::vector<AlphaArm> arms;
  for (double v : values) {
    AlphaArm arm;
    arm.trainable = false;
    arm.alpha = v;
    arms.push_back(arm);
  }
  AlphaArm trainable;
  trainable.trainable = true;
  trainable.alpha = 1.0;
  arms.push_back(trainable);

  std::vector<std::function<void()>> jobs;
  for (auto& arm : arms) {
    jobs.emplace_back([&arm, &base] {
      ExperimentConfig cfg = base;
      cfg.alpha_trainable = arm.trainable;
      cfg.alpha_value = arm.alpha;
      cfg.checkpoint_path.clear();
      arm.result = run(cfg);
    });
  }
  run_jobs(std::move(jobs));
  return arms;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);  // binary: no newline translation
  if (!os) throw std::runtime_error("write_metrics_csv: cannot open " + path.string());
  os << "epoch,train_loss,train_error,val_error,alpha\n";
  char buf[160];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(r.epoch), r.train_loss, r.train_error, r.val_error,
                  r.alpha);
    os << buf;
  }
  if (!os) throw std::runtime_error("write_metrics_csv: write failed for " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_metrics_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "epoch,train_loss,train_error,val_error,alpha")
    throw std::runtime_error("read_metrics_csv: bad header in " + path.string());
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    long long epoch = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf", &epoch, &r.train_loss, &r.train_error,
                    &r.val_error, &r.alpha) != 5)
      throw std::runtime_error("read_metrics_csv: bad row in " + path.string() + ": " + line);
    r.epoch = static_cast<Index>(epoch);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace fixhead
