#include "fixhead/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fixhead/io.hpp"
#include "fixhead/linalg.hpp"
#include "fixhead/rng.hpp"
#include "fixhead/util.hpp"

namespace fixhead {

namespace {

constexpr char kCheckpointMagic[4] = {'F', 'H', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void fill_he_normal(Matrix& w, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(w.cols()));
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = stddev * rng.next_normal();
}

void write_matrix(std::ostream& os, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) write_f64_le(os, m(i, j));
}

void read_matrix(std::istream& is, Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = read_f64_le(is);
}

void write_vector(std::ostream& os, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) write_f64_le(os, v[i]);
}

void read_vector(std::istream& is, Vector& v) {
  for (Index i = 0; i < v.size(); ++i) v[i] = read_f64_le(is);
}

}  // namespace

double scheduled_lr(const SgdConfig& cfg, Index epoch) {
  double mult = 1.0;
  for (const auto& [e, m] : cfg.lr_schedule) {
    if (e <= epoch) mult = m;
  }
  return cfg.learning_rate * mult;
}

Mlp make_mlp(Index input_dim, const std::vector<Index>& hidden_widths, Head head, LossKind loss) {
  if (input_dim < 1) throw std::invalid_argument("make_mlp: input_dim must be >= 1");
  if (hidden_widths.empty()) throw std::invalid_argument("make_mlp: need at least one layer");
  if (hidden_widths.back() != head.n_features) {
    std::ostringstream os;
    os << "make_mlp: last hidden width " << hidden_widths.back()
       << " does not match head n_features " << head.n_features;
    throw std::invalid_argument(os.str());
  }
  Mlp mlp;
  Index in = input_dim;
  for (Index out : hidden_widths) {
    if (out < 1) throw std::invalid_argument("make_mlp: widths must be >= 1");
    DenseLayer layer;
    layer.w = Matrix::Zero(out, in);
    layer.b = Vector::Zero(out);
    layer.grad_w = Matrix::Zero(out, in);
    layer.grad_b = Vector::Zero(out);
    layer.vel_w = Matrix::Zero(out, in);
    layer.vel_b = Vector::Zero(out);
    mlp.layers.push_back(std::move(layer));
    in = out;
  }
  mlp.head = std::move(head);
  mlp.loss = loss;
  mlp.grad_bias = Vector::Zero(mlp.head.n_classes);
  mlp.vel_bias = Vector::Zero(mlp.head.n_classes);
  if (mlp.head.mode == HeadMode::Learned) {
    mlp.grad_head_w = Matrix::Zero(mlp.head.n_features, mlp.head.n_classes);
    mlp.vel_head_w = Matrix::Zero(mlp.head.n_features, mlp.head.n_classes);
  }
  mlp.pre.resize(mlp.layers.size());
  mlp.act.resize(mlp.layers.size() + 1);
  return mlp;
}

ForwardResult forward(Mlp& mlp, const Vector& z) {
  if (z.size() != mlp.layers.front().w.cols()) {
    std::ostringstream os;
    os << "forward: expected input length " << mlp.layers.front().w.cols() << ", got " << z.size();
    throw std::invalid_argument(os.str());
  }
  mlp.act[0] = z;
  const Index num_layers = static_cast<Index>(mlp.layers.size());
  for (Index i = 0; i < num_layers; ++i) {
    Vector p = gemv(mlp.layers[i].w, mlp.act[i]);
    p += mlp.layers[i].b;
    mlp.pre[i] = p;
    if (i + 1 < num_layers) p = p.cwiseMax(0.0);
    mlp.act[i + 1] = std::move(p);
  }
  mlp.forward_valid = true;
  ForwardResult out;
  out.representation = mlp.act.back();
  out.logits = logits(mlp.head, out.representation, &mlp.normalize_guard_hits);
  return out;
}

double backward(Mlp& mlp, Index target) {
  if (!mlp.forward_valid) throw std::logic_error("backward: no forward pass cached");
  const Vector& x = mlp.act.back();

  double sample_loss = 0.0;
  Vector d_x;
  if (mlp.loss == LossKind::SoftmaxCrossEntropy) {
    HeadLoss hl = loss_and_grads(mlp.head, x, target, &mlp.normalize_guard_hits);
    sample_loss = hl.loss;
    mlp.grad_bias += hl.grads.d_bias;
    mlp.grad_alpha += hl.grads.d_alpha;
    if (mlp.head.mode == HeadMode::Learned) mlp.grad_head_w += hl.grads.d_weights;
    d_x = std::move(hl.grads.d_input);
  } else {
    CosineLoss cl = cosine_loss_and_grads(mlp.head, x, target, &mlp.normalize_guard_hits);
    sample_loss = cl.loss;
    d_x = std::move(cl.d_input);  // alpha and bias take no gradient under this loss
  }

  Vector g = std::move(d_x);
  for (Index i = static_cast<Index>(mlp.layers.size()) - 1; i >= 0; --i) {
    if (i + 1 < static_cast<Index>(mlp.layers.size())) {
      // ReLU mask; dead units (pre <= 0) pass exactly zero gradient
      for (Index k = 0; k < g.size(); ++k)
        if (mlp.pre[i][k] <= 0.0) g[k] = 0.0;
    }
    mlp.layers[i].grad_w += g * mlp.act[i].transpose();
    mlp.layers[i].grad_b += g;
    if (i > 0) g = gemv_transposed(mlp.layers[i].w, g);
  }
  return sample_loss;
}

void zero_grads(Mlp& mlp) {
  for (auto& layer : mlp.layers) {
    layer.grad_w.setZero();
    layer.grad_b.setZero();
  }
  mlp.grad_alpha = 0.0;
  mlp.grad_bias.setZero();
  if (mlp.head.mode == HeadMode::Learned) mlp.grad_head_w.setZero();
}

void sgd_step(Mlp& mlp, const SgdConfig& cfg, Index batch_size) {
  if (batch_size < 1) throw std::invalid_argument("sgd_step: batch_size must be >= 1");
  const double inv_batch = 1.0 / static_cast<double>(batch_size);
  const double lr = cfg.learning_rate;
  const double mu = cfg.momentum;
  const double wd = cfg.weight_decay;

  const auto update_matrix = [&](Matrix& p, const Matrix& grad, Matrix& vel) {
    vel = mu * vel + (inv_batch * grad + wd * p);
    p -= lr * vel;
  };
  const auto update_vector = [&](Vector& p, const Vector& grad, Vector& vel) {
    vel = mu * vel + (inv_batch * grad + wd * p);
    p -= lr * vel;
  };

  for (auto& layer : mlp.layers) {
    update_matrix(layer.w, layer.grad_w, layer.vel_w);
    update_vector(layer.b, layer.grad_b, layer.vel_b);
  }
  if (mlp.head.mode == HeadMode::Learned) {
    update_matrix(mlp.head.weights, mlp.grad_head_w, mlp.vel_head_w);
  } else if (mlp.head.alpha_trainable) {
    mlp.vel_alpha = mu * mlp.vel_alpha + (inv_batch * mlp.grad_alpha + wd * mlp.head.alpha);
    mlp.head.alpha -= lr * mlp.vel_alpha;
  }
  update_vector(mlp.head.bias, mlp.grad_bias, mlp.vel_bias);
}

void init_params(Mlp& mlp, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : mlp.layers) {
    fill_he_normal(layer.w, rng);
    layer.b.setZero();
    layer.vel_w.setZero();
    layer.vel_b.setZero();
  }
  if (mlp.head.mode == HeadMode::Learned) {
    fill_he_normal(mlp.head.weights, rng);
    mlp.vel_head_w.setZero();
  } else if (mlp.head.alpha_trainable) {
    mlp.head.alpha = 1.0;  // frozen alpha keeps its constructed value
  }
  mlp.head.bias.setZero();
  mlp.vel_alpha = 0.0;
  mlp.vel_bias.setZero();
  zero_grads(mlp);
  mlp.normalize_guard_hits = 0;
  mlp.forward_valid = false;
}

std::uint64_t parameter_checksum(const Mlp& mlp) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& layer : mlp.layers) {
    h = fnv1a64(layer.w, h);
    h = fnv1a64(layer.b, h);
  }
  if (mlp.head.mode != HeadMode::Hadamard) h = fnv1a64(mlp.head.weights, h);
  h = fnv1a64(&mlp.head.alpha, sizeof(double), h);
  h = fnv1a64(mlp.head.bias, h);
  return h;
}

void save_checkpoint(const Mlp& mlp, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  os.write(kCheckpointMagic, 4);
  write_u32_le(os, kCheckpointVersion);
  write_u32_le(os, static_cast<std::uint32_t>(mlp.head.mode));
  write_u32_le(os, static_cast<std::uint32_t>(mlp.loss));
  write_u32_le(os, static_cast<std::uint32_t>(mlp.head.n_features));
  write_u32_le(os, static_cast<std::uint32_t>(mlp.head.n_classes));
  write_u32_le(os, mlp.head.alpha_trainable ? 1 : 0);
  write_u32_le(os, static_cast<std::uint32_t>(mlp.layers.size()));
  for (const auto& layer : mlp.layers) {
    write_u32_le(os, static_cast<std::uint32_t>(layer.w.rows()));
    write_u32_le(os, static_cast<std::uint32_t>(layer.w.cols()));
  }
  for (const auto& layer : mlp.layers) {
    write_matrix(os, layer.w);
    write_vector(os, layer.b);
  }
  if (mlp.head.mode != HeadMode::Hadamard) write_matrix(os, mlp.head.weights);
  write_f64_le(os, mlp.head.alpha);
  write_vector(os, mlp.head.bias);
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[4] = {0};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  if (read_u32_le(is) != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path.string());
  const auto mode = static_cast<HeadMode>(read_u32_le(is));
  const auto loss = static_cast<LossKind>(read_u32_le(is));
  const auto n_features = static_cast<Index>(read_u32_le(is));
  const auto n_classes = static_cast<Index>(read_u32_le(is));
  const bool alpha_trainable = read_u32_le(is) != 0;
  const auto num_layers = static_cast<Index>(read_u32_le(is));
  if (!is || num_layers < 1) throw std::runtime_error("load_checkpoint: corrupt header in " + path.string());

  std::vector<std::pair<Index, Index>> dims(num_layers);
  for (auto& [rows, cols] : dims) {
    rows = static_cast<Index>(read_u32_le(is));
    cols = static_cast<Index>(read_u32_le(is));
  }

  Head head;
  head.mode = mode;
  head.n_features = n_features;
  head.n_classes = n_classes;
  head.alpha_trainable = alpha_trainable;
  head.bias = Vector::Zero(n_classes);
  if (mode == HeadMode::Hadamard) {
    head.geom =
        make_hadamard_geometry(next_power_of_two(std::max(n_features, n_classes)), n_classes);
  } else {
    head.weights = Matrix::Zero(n_features, n_classes);
  }

  std::vector<Index> widths;
  for (const auto& [rows, cols] : dims) widths.push_back(rows);
  Mlp mlp = make_mlp(dims.front().second, widths, std::move(head), loss);
  for (Index i = 0; i < num_layers; ++i) {
    read_matrix(is, mlp.layers[i].w);
    read_vector(is, mlp.layers[i].b);
  }
  if (mlp.head.mode != HeadMode::Hadamard) read_matrix(is, mlp.head.weights);
  mlp.head.alpha = read_f64_le(is);
  read_vector(is, mlp.head.bias);
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  return mlp;
}

}  // namespace fixhead
