// fixhead CLI: synthetic data generation, training runs, head comparisons,
// alpha sweeps, gradient checking, and the FWHT-vs-dense microbenchmark.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fixhead/bench.hpp"
#include "fixhead/data.hpp"
#include "fixhead/experiment.hpp"
#include "fixhead/gradcheck.hpp"

namespace fs = std::filesystem;

namespace {

using namespace fixhead;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest exact decimal form, so config files round-trip doubles bitwise.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_fraction(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<Index> parse_widths(const std::string& s) {
  std::vector<Index> widths;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || tok.empty() || v < 1)
      throw UsageError("--widths: expected comma-separated positive integers, got '" + s + "'");
    widths.push_back(static_cast<Index>(v));
  }
  if (widths.empty()) throw UsageError("--widths: at least one layer width required");
  return widths;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> values;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || tok.empty() || v <= 0.0)
      throw UsageError("--values: expected comma-separated positive numbers, got '" + s + "'");
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("--values: at least one alpha value required");
  return values;
}

HeadMode parse_head(const std::string& s) {
  if (s == "learned") return HeadMode::Learned;
  if (s == "orthonormal") return HeadMode::Orthonormal;
  if (s == "hadamard") return HeadMode::Hadamard;
  throw UsageError("--head: expected learned|orthonormal|hadamard, got '" + s + "'");
}

LossKind parse_loss(const std::string& s) {
  if (s == "ce") return LossKind::SoftmaxCrossEntropy;
  if (s == "cosine") return LossKind::Cosine;
  throw UsageError("--loss: expected ce|cosine, got '" + s + "'");
}

struct AlphaFlag {
  bool trainable = true;
  double value = 1.0;
};

AlphaFlag parse_alpha(const std::string& s) {
  AlphaFlag a;
  if (s == "train") return a;
  std::size_t pos = 0;
  try {
    a.value = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || a.value <= 0.0)
    throw UsageError("--alpha: expected 'train' or a positive number, got '" + s + "'");
  a.trainable = false;
  return a;
}

struct TrainFlags {
  std::string head = "orthonormal";
  std::string alpha = "train";
  std::string loss = "ce";
  std::uint64_t seed = 1;
  long long epochs = 30;
  double lr = 0.05;
  double momentum = 0.9;
  double wd = 1e-4;
  std::string widths = "64,64";
  long long batch_size = 32;
  std::string data = "blobs";
  long long classes = 10;
  long long dim = 32;
  long long per_class = 100;
  double sigma = 0.3;
  std::string images;
  std::string labels;
  long long limit = -1;
  std::string out = "out";
  std::string config;
};

void add_train_options(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--head", f.head, "head mode: learned|orthonormal|hadamard")
      ->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "softmax scale: 'train' or a frozen positive value")
      ->capture_default_str();
  cmd->add_option("--loss", f.loss, "loss: ce|cosine")->capture_default_str();
  cmd->add_option("--seed", f.seed, "experiment seed")->capture_default_str();
  cmd->add_option("--epochs", f.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--lr", f.lr, "learning rate")->capture_default_str();
  cmd->add_option("--momentum", f.momentum, "SGD momentum")->capture_default_str();
  cmd->add_option("--wd", f.wd, "weight decay")->capture_default_str();
  cmd->add_option("--widths", f.widths, "hidden layer widths, comma separated")
      ->capture_default_str();
  cmd->add_option("--batch-size", f.batch_size, "minibatch size")->capture_default_str();
  cmd->add_option("--data", f.data, "data source: blobs|idx")->capture_default_str();
  cmd->add_option("--classes", f.classes, "blobs: number of classes")->capture_default_str();
  cmd->add_option("--dim", f.dim, "blobs: feature dimension")->capture_default_str();
  cmd->add_option("--per-class", f.per_class, "blobs: samples per class")->capture_default_str();
  cmd->add_option("--sigma", f.sigma, "blobs: noise sigma")->capture_default_str();
  cmd->add_option("--images", f.images, "idx: images file");
  cmd->add_option("--labels", f.labels, "idx: labels file");
  cmd->add_option("--limit", f.limit, "idx: keep only the first N samples (-1 = all)")
      ->capture_default_str();
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--config", f.config, "key=value config file; flags override it");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long long config_ll(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw UsageError("config: expected an integer for '" + key + "', got '" + value + "'");
  return v;
}

std::uint64_t config_u64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw UsageError("config: expected an unsigned integer for '" + key + "', got '" + value +
                     "'");
  return v;
}

double config_f64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw UsageError("config: expected a number for '" + key + "', got '" + value + "'");
  return v;
}

// CLI11 only reads config files on the top-level app, so subcommands apply
// the key=value overlay themselves: keys must name an option of the
// subcommand, and options given on the command line keep precedence.
void apply_config_overlay(
    const CLI::App* cmd, const std::string& path,
    const std::function<void(const std::string&, const std::string&)>& assign) {
  if (path.empty()) return;
  std::ifstream is(path);
  if (!is) throw UsageError("--config: cannot open '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw UsageError("--config: expected key=value at " + where + ", got '" + text + "'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config")
      throw UsageError("--config: unknown key '" + key + "' at " + where);
    if (opt->count() > 0) continue;
    assign(key, value);
  }
}

void assign_train_key(TrainFlags& f, const std::string& key, const std::string& value) {
  if (key == "head") f.head = value;
  else if (key == "alpha") f.alpha = value;
  else if (key == "loss") f.loss = value;
  else if (key == "seed") f.seed = config_u64(key, value);
  else if (key == "epochs") f.epochs = config_ll(key, value);
  else if (key == "lr") f.lr = config_f64(key, value);
  else if (key == "momentum") f.momentum = config_f64(key, value);
  else if (key == "wd") f.wd = config_f64(key, value);
  else if (key == "widths") f.widths = value;
  else if (key == "batch-size") f.batch_size = config_ll(key, value);
  else if (key == "data") f.data = value;
  else if (key == "classes") f.classes = config_ll(key, value);
  else if (key == "dim") f.dim = config_ll(key, value);
  else if (key == "per-class") f.per_class = config_ll(key, value);
  else if (key == "sigma") f.sigma = config_f64(key, value);
  else if (key == "images") f.images = value;
  else if (key == "labels") f.labels = value;
  else if (key == "limit") f.limit = config_ll(key, value);
  else if (key == "out") f.out = value;
  else throw UsageError("--config: key '" + key + "' cannot be set from a file");
}

ExperimentConfig to_config(const TrainFlags& f) {
  ExperimentConfig cfg;
  cfg.head_mode = parse_head(f.head);
  const AlphaFlag alpha = parse_alpha(f.alpha);
  cfg.alpha_trainable = alpha.trainable;
  cfg.alpha_value = alpha.value;
  cfg.loss = parse_loss(f.loss);
  cfg.hidden_widths = parse_widths(f.widths);
  if (f.lr <= 0.0) throw UsageError("--lr must be > 0");
  if (f.momentum < 0.0 || f.momentum >= 1.0) throw UsageError("--momentum must be in [0,1)");
  if (f.wd < 0.0) throw UsageError("--wd must be >= 0");
  if (f.epochs < 1) throw UsageError("--epochs must be >= 1");
  if (f.batch_size < 1) throw UsageError("--batch-size must be >= 1");
  cfg.sgd.learning_rate = f.lr;
  cfg.sgd.momentum = f.momentum;
  cfg.sgd.weight_decay = f.wd;
  cfg.epochs = static_cast<Index>(f.epochs);
  cfg.batch_size = static_cast<Index>(f.batch_size);
  cfg.seed = f.seed;
  if (f.data == "blobs") {
    cfg.data.kind = DataSpec::Kind::Blobs;
    if (f.classes < 2) throw UsageError("--classes must be >= 2");
    if (f.dim < 2) throw UsageError("--dim must be >= 2");
    if (f.per_class < 1) throw UsageError("--per-class must be >= 1");
    if (f.sigma < 0.0) throw UsageError("--sigma must be >= 0");
    cfg.data.blobs.n_classes = static_cast<Index>(f.classes);
    cfg.data.blobs.dim = static_cast<Index>(f.dim);
    cfg.data.blobs.per_class = static_cast<Index>(f.per_class);
    cfg.data.blobs.noise_sigma = f.sigma;
  } else if (f.data == "idx") {
    cfg.data.kind = DataSpec::Kind::Idx;
    if (f.images.empty() || f.labels.empty())
      throw UsageError("--data idx requires --images and --labels");
    cfg.data.idx.images = f.images;
    cfg.data.idx.labels = f.labels;
    cfg.data.idx.limit = static_cast<Index>(f.limit);
  } else {
    throw UsageError("--data: expected blobs|idx, got '" + f.data + "'");
  }
  return cfg;
}

std::string resolved_config_text(const TrainFlags& f, const std::string& extra = "") {
  std::ostringstream os;
  os << "head=" << f.head << "\n";
  os << "alpha=" << (f.alpha == "train" ? std::string("train") : fmt_double(parse_alpha(f.alpha).value))
     << "\n";
  os << "loss=" << f.loss << "\n";
  os << "seed=" << f.seed << "\n";
  os << "epochs=" << f.epochs << "\n";
  os << "lr=" << fmt_double(f.lr) << "\n";
  os << "momentum=" << fmt_double(f.momentum) << "\n";
  os << "wd=" << fmt_double(f.wd) << "\n";
  os << "widths=" << f.widths << "\n";
  os << "batch-size=" << f.batch_size << "\n";
  os << "data=" << f.data << "\n";
  if (f.data == "blobs") {
    os << "classes=" << f.classes << "\n";
    os << "dim=" << f.dim << "\n";
    os << "per-class=" << f.per_class << "\n";
    os << "sigma=" << fmt_double(f.sigma) << "\n";
  } else {
    os << "images=" << f.images << "\n";
    os << "labels=" << f.labels << "\n";
    os << "limit=" << f.limit << "\n";
  }
  if (!extra.empty()) os << extra;
  os << "out=" << f.out << "\n";
  return os.str();
}

// Every artifact-producing run prints its resolved config and writes the same
// text next to its outputs.
void emit_config(const std::string& text, const fs::path& out_dir) {
  std::cout << text;
  fs::create_directories(out_dir);
  std::ofstream os(out_dir / "config.txt", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (out_dir / "config.txt").string());
  os << text;
}

int run_train(const TrainFlags& f) {
  ExperimentConfig cfg = to_config(f);
  const fs::path out(f.out);
  emit_config(resolved_config_text(f), out);
  cfg.checkpoint_path = out / "model.ckpt";
  const RunResult result = run(cfg);
  write_metrics_csv(result.history, out / "metrics.csv");
  std::cout << "final train_error=" << fmt_fraction(result.final_train_error)
            << " val_error=" << fmt_fraction(result.final_val_error)
            << " alpha=" << fmt_fraction(result.history.back().alpha) << "\n";
  std::cout << "wrote " << (out / "metrics.csv").string() << " and "
            << (out / "model.ckpt").string() << "\n";
  return 0;
}

int run_compare(const TrainFlags& f) {
  const ExperimentConfig cfg = to_config(f);
  const fs::path out(f.out);
  emit_config(resolved_config_text(f), out);
  const ComparisonReport report = compare_fixed_vs_learned(cfg);
  write_metrics_csv(report.learned.history, out / "metrics_learned.csv");
  write_metrics_csv(report.fixed.history, out / "metrics_fixed.csv");

  std::ostringstream summary;
  summary << "final_val_error_learned=" << fmt_fraction(report.learned.final_val_error) << "\n";
  summary << "final_val_error_fixed=" << fmt_fraction(report.fixed.final_val_error) << "\n";
  summary << "final_val_error_delta="
          << fmt_fraction(report.fixed.final_val_error - report.learned.final_val_error) << "\n";
  summary << "final_train_error_learned=" << fmt_fraction(report.learned.final_train_error)
          << "\n";
  summary << "final_train_error_fixed=" << fmt_fraction(report.fixed.final_train_error) << "\n";
  char digest[32];
  std::snprintf(digest, sizeof(digest), "0x%016llx",
                static_cast<unsigned long long>(report.learned.shuffle_checksum));
  summary << "shuffle_checksum=" << digest << "\n";
  std::cout << summary.str();
  std::ofstream os(out / "summary.txt", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (out / "summary.txt").string());
  os << summary.str();
  return 0;
}

int run_sweep(const TrainFlags& f, const std::string& values_str) {
  if (parse_head(f.head) == HeadMode::Learned)
    throw UsageError("sweep-alpha requires a fixed head mode (orthonormal or hadamard)");
  const std::vector<double> values = parse_values(values_str);
  const ExperimentConfig cfg = to_config(f);
  const fs::path out(f.out);
  emit_config(resolved_config_text(f, "values=" + values_str + "\n"), out);

  const std::vector<AlphaArm> arms = sweep_alpha(cfg, values);
  std::ostringstream summary;
  for (const AlphaArm& arm : arms) {
    std::string name;
    if (arm.trainable) {
      name = "trainable";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", arm.alpha);
      name = buf;
    }
    write_metrics_csv(arm.result.history, out / ("metrics_alpha_" + name + ".csv"));
    summary << "alpha=" << name << " val_error=" << fmt_fraction(arm.result.final_val_error)
            << " final_alpha=" << fmt_fraction(arm.result.history.back().alpha) << "\n";
  }
  std::cout << summary.str();
  std::ofstream os(out / "summary.txt", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (out / "summary.txt").string());
  os << summary.str();
  return 0;
}

int run_gen_data(const TrainFlags& f) {
  if (f.data != "blobs") throw UsageError("gen-data only generates blobs");
  const ExperimentConfig cfg = to_config(f);
  const fs::path out(f.out);
  emit_config(resolved_config_text(f), out);
  const BlobsSpec& b = cfg.data.blobs;
  const TrainValSplit split = make_blobs(b.n_classes, b.dim, b.per_class, b.noise_sigma, cfg.seed);
  save_idx(split.train, out / "train-images.idx", out / "train-labels.idx");
  save_idx(split.val, out / "val-images.idx", out / "val-labels.idx");
  std::cout << "wrote " << split.train.size() << " train and " << split.val.size()
            << " val samples to " << out.string() << "\n";
  return 0;
}

int run_check_grad(std::uint64_t seed) {
  const GradCheckReport report = run_gradient_checks(seed);
  std::printf("max relative error = %.3g over %lld gradient checks (tolerance %g)\n",
              report.max_rel_error, static_cast<long long>(report.num_checks),
              kGradCheckTolerance);
  if (report.max_rel_error < kGradCheckTolerance) return 0;
  std::cerr << "gradient check failed\n";
  return 2;
}

struct BenchFlags {
  long long n = 1024;
  long long c = 0;  // 0 = same as n
  long long reps = 101;
  std::uint64_t seed = 42;
  std::string out = "out";
  std::string config;
};

void assign_bench_key(BenchFlags& f, const std::string& key, const std::string& value) {
  if (key == "n") f.n = config_ll(key, value);
  else if (key == "c") f.c = config_ll(key, value);
  else if (key == "reps") f.reps = config_ll(key, value);
  else if (key == "seed") f.seed = config_u64(key, value);
  else if (key == "out") f.out = value;
  else throw UsageError("--config: key '" + key + "' cannot be set from a file");
}

int run_bench(const BenchFlags& f) {
  if (f.n < 1 || (f.n & (f.n - 1)) != 0) throw UsageError("--n must be a power of two");
  if (f.c < 0 || f.c > f.n) throw UsageError("--c must be in [1, --n] (or 0 for --c = --n)");
  if (f.reps < 30) throw UsageError("--reps must be >= 30");
  const Index c = f.c > 0 ? static_cast<Index>(f.c) : static_cast<Index>(f.n);
  const fs::path out(f.out);
  std::ostringstream cfg;
  cfg << "n=" << f.n << "\n"
      << "c=" << c << "\n"
      << "reps=" << f.reps << "\n"
      << "seed=" << f.seed << "\n"
      << "out=" << f.out << "\n";
  emit_config(cfg.str(), out);
  const BenchReport report = bench_head(static_cast<Index>(f.n), c, static_cast<Index>(f.reps),
                                        f.seed);
  write_bench_csv(report, out / "bench.csv");
  write_bench_samples_csv(report, out / "bench_samples.csv");
  std::printf("n=%lld c=%lld dense=%.0f ns fwht=%.0f ns speedup=%.2fx (reps=%lld)\n",
              static_cast<long long>(report.n), static_cast<long long>(report.c),
              report.median_ns_dense, report.median_ns_fwht, report.speedup,
              static_cast<long long>(report.reps));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixhead: fixed classifier heads (orthonormal and truncated-Hadamard) with a "
               "learned softmax scale, vs the learned baseline"};
  app.require_subcommand(1);

  TrainFlags gen_flags;
  CLI::App* gen = app.add_subcommand("gen-data", "generate Gaussian blobs as IDX file pairs");
  gen->add_option("--classes", gen_flags.classes, "number of classes")->capture_default_str();
  gen->add_option("--dim", gen_flags.dim, "feature dimension")->capture_default_str();
  gen->add_option("--per-class", gen_flags.per_class, "samples per class")->capture_default_str();
  gen->add_option("--sigma", gen_flags.sigma, "noise sigma")->capture_default_str();
  gen->add_option("--seed", gen_flags.seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_flags.out, "output directory")->capture_default_str();
  gen->add_option("--config", gen_flags.config, "key=value config file; flags override it");

  TrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "single training run -> metrics CSV + checkpoint");
  add_train_options(train, train_flags);

  TrainFlags compare_flags;
  CLI::App* compare =
      app.add_subcommand("compare", "fixed vs learned head on one config -> paired CSVs");
  add_train_options(compare, compare_flags);

  TrainFlags sweep_flags;
  std::string sweep_values = "0.1,1,10";
  CLI::App* sweep =
      app.add_subcommand("sweep-alpha", "frozen-alpha runs plus a trainable-alpha run");
  add_train_options(sweep, sweep_flags);
  sweep->add_option("--values", sweep_values, "comma-separated frozen alpha values")
      ->capture_default_str();

  std::uint64_t check_seed = 1;
  CLI::App* check = app.add_subcommand("check-grad", "finite-difference gradient suite");
  check->add_option("--seed", check_seed, "suite seed")->capture_default_str();

  BenchFlags bench_flags;
  CLI::App* bench = app.add_subcommand("bench", "FWHT vs dense classification microbenchmark");
  bench->add_option("--n", bench_flags.n, "feature width (power of two)")->capture_default_str();
  bench->add_option("--c", bench_flags.c, "class count (default: n)")->capture_default_str();
  bench->add_option("--reps", bench_flags.reps, "timed repetitions (>= 30)")
      ->capture_default_str();
  bench->add_option("--seed", bench_flags.seed, "input seed")->capture_default_str();
  bench->add_option("--out", bench_flags.out, "output directory")->capture_default_str();
  bench->add_option("--config", bench_flags.config, "key=value config file; flags override it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  const auto train_overlay = [](const CLI::App* cmd, TrainFlags& f) {
    apply_config_overlay(cmd, f.config, [&f](const std::string& k, const std::string& v) {
      assign_train_key(f, k, v);
    });
  };

  try {
    if (gen->parsed()) {
      train_overlay(gen, gen_flags);
      return run_gen_data(gen_flags);
    }
    if (train->parsed()) {
      train_overlay(train, train_flags);
      return run_train(train_flags);
    }
    if (compare->parsed()) {
      train_overlay(compare, compare_flags);
      return run_compare(compare_flags);
    }
    if (sweep->parsed()) {
      apply_config_overlay(sweep, sweep_flags.config,
                           [&](const std::string& k, const std::string& v) {
                             if (k == "values")
                               sweep_values = v;
                             else
                               assign_train_key(sweep_flags, k, v);
                           });
      return run_sweep(sweep_flags, sweep_values);
    }
    if (check->parsed()) return run_check_grad(check_seed);
    if (bench->parsed()) {
      apply_config_overlay(bench, bench_flags.config,
                           [&](const std::string& k, const std::string& v) {
                             assign_bench_key(bench_flags, k, v);
                           });
      return run_bench(bench_flags);
    }
    std::cerr << app.help() << std::flush;
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
