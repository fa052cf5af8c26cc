#include "fixhead/head.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fixhead/linalg.hpp"
#include "fixhead/util.hpp"

namespace fixhead {

namespace {

constexpr double kNormEps = 1e-12;

void require_input_dim(const Head& head, const Vector& x) {
  if (x.size() != head.n_features) {
    std::ostringstream os;
    os << "head: expected input length " << head.n_features << ", got " << x.size();
    throw std::invalid_argument(os.str());
  }
}

void require_target(const Head& head, Index target) {
  if (target < 0 || target >= head.n_classes) {
    std::ostringstream os;
    os << "head: target " << target << " out of range [0, " << head.n_classes << ")";
    throw std::out_of_range(os.str());
  }
}

void require_positive_alpha(double alpha) {
  if (!(alpha > 0.0)) {
    std::ostringstream os;
    os << "head: alpha must be positive, got " << alpha;
    throw std::invalid_argument(os.str());
  }
}

Vector pad_to(const Vector& x, Index n) {
  Vector p = Vector::Zero(n);
  p.head(x.size()) = x;
  return p;
}

// Cosine scores s_i = q_i . x_hat of a fixed head.
Vector class_scores(const Head& head, const Vector& x_hat) {
  if (head.mode == HeadMode::Orthonormal) return gemv_transposed(head.weights, x_hat);
  return hadamard_logits(head.geom, pad_to(x_hat, head.geom.n), 1.0,
                         Vector::Zero(head.n_classes));
}

// Pull a gradient on x_hat back to x through the sphere projection of the
// forward pass: d_input = (I - x_hat x_hat^T) d_xhat / max(||x||, eps).
Vector chain_through_normalization(const Vector& x, const Vector& x_hat, const Vector& d_xhat) {
  const double r = std::max(l2_norm(x), kNormEps);
  return (d_xhat - x_hat.dot(d_xhat) * x_hat) / r;
}

Vector d_xhat_from_score_grad(const Head& head, const Vector& g, double scale) {
  if (head.mode == HeadMode::Orthonormal) return scale * gemv(head.weights, g);
  return hadamard_backward(head.geom, g, scale).head(head.n_features);
}

}  // namespace

const char* head_mode_name(HeadMode mode) {
  switch (mode) {
    case HeadMode::Learned: return "learned";
    case HeadMode::Orthonormal: return "orthonormal";
    case HeadMode::Hadamard: return "hadamard";
  }
  return "?";
}

Head make_learned_head(Index n_features, Index n_classes) {
  if (n_features < 1 || n_classes < 1)
    throw std::invalid_argument("make_learned_head: dimensions must be >= 1");
  Head head;
  head.mode = HeadMode::Learned;
  head.n_features = n_features;
  head.n_classes = n_classes;
  head.weights = Matrix::Zero(n_features, n_classes);  // filled by init_params
  head.bias = Vector::Zero(n_classes);
  return head;
}

Head make_orthonormal_head(const FixedProjection& projection, double alpha, bool alpha_trainable) {
  require_positive_alpha(alpha);
  Head head;
  head.mode = HeadMode::Orthonormal;
  head.n_features = projection.n_features;
  head.n_classes = projection.n_classes;
  head.weights = projection.q;
  head.alpha = alpha;
  head.alpha_trainable = alpha_trainable;
  head.bias = Vector::Zero(projection.n_classes);
  return head;
}

Head make_hadamard_head(Index n_features, Index n_classes, double alpha, bool alpha_trainable) {
  if (n_features < 1 || n_classes < 1)
    throw std::invalid_argument("make_hadamard_head: dimensions must be >= 1");
  require_positive_alpha(alpha);
  Head head;
  head.mode = HeadMode::Hadamard;
  head.n_features = n_features;
  head.n_classes = n_classes;
  head.geom = make_hadamard_geometry(next_power_of_two(std::max(n_features, n_classes)), n_classes);
  head.alpha = alpha;
  head.alpha_trainable = alpha_trainable;
  head.bias = Vector::Zero(n_classes);
  return head;
}

Vector normalize(const Vector& x, std::uint64_t* guard_hits) {
  if (x.size() < 1) throw std::invalid_argument("normalize: empty vector");
  const double norm = l2_norm(x);
  if (norm < kNormEps && guard_hits != nullptr) ++*guard_hits;
  return x / std::max(norm, kNormEps);
}

Vector logits(const Head& head, const Vector& x, std::uint64_t* guard_hits) {
  require_input_dim(head, x);
  if (head.mode == HeadMode::Learned) {
    Vector y = gemv_transposed(head.weights, x);
    y += head.bias;
    return y;
  }
  const Vector x_hat = normalize(x, guard_hits);
  const Vector s = class_scores(head, x_hat);
  Vector y(head.n_classes);
  for (Index i = 0; i < head.n_classes; ++i) y[i] = head.alpha * s[i] + head.bias[i];
  return y;
}

Vector softmax(const Vector& y) {
  if (y.size() < 1) throw std::invalid_argument("softmax: empty vector");
  const double m = y.maxCoeff();
  Vector v = (y.array() - m).exp();
  v /= v.sum();
  return v;
}

double nll_loss(const Vector& y, Index target) {
  if (target < 0 || target >= y.size()) {
    std::ostringstream os;
    os << "nll_loss: target " << target << " out of range [0, " << y.size() << ")";
    throw std::out_of_range(os.str());
  }
  const double m = y.maxCoeff();
  double sum = 0.0;
  for (Index i = 0; i < y.size(); ++i) sum += std::exp(y[i] - m);
  return m + std::log(sum) - y[target];
}

HeadLoss loss_and_grads(const Head& head, const Vector& x, Index target,
                        std::uint64_t* guard_hits) {
  require_input_dim(head, x);
  require_target(head, target);

  HeadLoss out;
  if (head.mode == HeadMode::Learned) {
    Vector y = gemv_transposed(head.weights, x);
    y += head.bias;
    out.loss = nll_loss(y, target);
    Vector g = softmax(y);
    g[target] -= 1.0;
    out.grads.d_bias = g;
    out.grads.d_weights = x * g.transpose();
    out.grads.d_input = gemv(head.weights, g);
    return out;
  }

  const Vector x_hat = normalize(x, guard_hits);
  const Vector s = class_scores(head, x_hat);
  Vector y(head.n_classes);
  for (Index i = 0; i < head.n_classes; ++i) y[i] = head.alpha * s[i] + head.bias[i];
  out.loss = nll_loss(y, target);
  Vector g = softmax(y);
  g[target] -= 1.0;
  out.grads.d_bias = g;
  out.grads.d_alpha = g.dot(s);
  const Vector d_xhat = d_xhat_from_score_grad(head, g, head.alpha);
  out.grads.d_input = chain_through_normalization(x, x_hat, d_xhat);
  return out;
}

CosineLoss cosine_loss_and_grads(const Head& head, const Vector& x, Index target,
                                 std::uint64_t* guard_hits) {
  if (!is_fixed_mode(head.mode))
    throw std::invalid_argument("cosine_loss_and_grads: requires a fixed head mode");
  require_input_dim(head, x);
  require_target(head, target);

  const Vector x_hat = normalize(x, guard_hits);
  const Vector s = class_scores(head, x_hat);
  CosineLoss out;
  out.loss = 1.0 - s[target];
  for (Index i = 0; i < head.n_classes; ++i)
    if (i != target) out.loss += 1.0 + s[i];
  Vector u = Vector::Ones(head.n_classes);
  u[target] = -1.0;
  const Vector d_xhat = d_xhat_from_score_grad(head, u, 1.0);
  out.d_input = chain_through_normalization(x, x_hat, d_xhat);
  return out;
}

std::uint64_t head_weight_checksum(const Head& head) {
  if (head.mode == HeadMode::Hadamard) {
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(head.geom.n),
                                   static_cast<std::uint64_t>(head.geom.c)};
    return fnv1a64(dims, sizeof(dims));
  }
  return fnv1a64(head.weights);
}

}  // namespace fixhead
