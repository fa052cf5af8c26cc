#include "fixhead/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fixhead/rng.hpp"
#include "fixhead/util.hpp"

namespace fixhead {

namespace {

double head_loss_value(const Head& head, const Vector& x, Index target, LossKind loss) {
  if (loss == LossKind::SoftmaxCrossEntropy) return nll_loss(logits(head, x), target);
  return cosine_loss_and_grads(head, x, target).loss;
}

// f evaluated at param +/- step around its current value; param is restored.
template <typename F>
double central_difference(double& param, const F& f) {
  const double saved = param;
  param = saved + kGradCheckStep;
  const double plus = f();
  param = saved - kGradCheckStep;
  const double minus = f();
  param = saved;
  return (plus - minus) / (2.0 * kGradCheckStep);
}

double mlp_loss_value(Mlp& mlp, const Vector& z, Index target) {
  const ForwardResult fr = forward(mlp, z);
  if (mlp.loss == LossKind::SoftmaxCrossEntropy) return nll_loss(fr.logits, target);
  return cosine_loss_and_grads(mlp.head, fr.representation, target).loss;
}

Vector random_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.next_normal();
  return v;
}

// Random bias keeps the check away from symmetric points where gradients
// vanish identically.
void break_bias(Head& head, Rng& rng) {
  for (Index i = 0; i < head.bias.size(); ++i) head.bias[i] = 0.1 * rng.next_normal();
}

// Central differences are only meaningful where the loss is smooth. Two
// hazards are screened out: a hidden pre-activation within reach of the step
// would straddle the ReLU kink, and a representation near the origin puts a
// fixed head's normalization in its ill-conditioned region (at exactly zero
// the clamped norm makes the analytic gradient blow up by 1/step).
bool smooth_margin_ok(const Mlp& mlp) {
  for (std::size_t i = 0; i + 1 < mlp.layers.size(); ++i)
    for (Index k = 0; k < mlp.pre[i].size(); ++k)
      if (std::abs(mlp.pre[i][k]) < 100.0 * kGradCheckStep) return false;
  if (is_fixed_mode(mlp.head.mode) && mlp.pre.back().norm() < 1e4 * kGradCheckStep) return false;
  return true;
}

Head random_head(HeadMode mode, Index n, Index c, Rng& rng) {
  switch (mode) {
    case HeadMode::Learned: {
      Head head = make_learned_head(n, c);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < c; ++j) head.weights(i, j) = 0.5 * rng.next_normal();
      break_bias(head, rng);
      return head;
    }
    case HeadMode::Orthonormal: {
      Head head = make_orthonormal_head(random_orthonormal(n, c, rng.next_u64()),
                                        0.5 + rng.next_unit(), /*alpha_trainable=*/true);
      break_bias(head, rng);
      return head;
    }
    case HeadMode::Hadamard: {
      Head head =
          make_hadamard_head(n, c, 0.5 + rng.next_unit(), /*alpha_trainable=*/true);
      break_bias(head, rng);
      return head;
    }
  }
  throw std::logic_error("random_head: unreachable");
}

}  // namespace

void GradCheckReport::absorb(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  max_rel_error = std::max(max_rel_error, std::abs(analytic - numeric) / denom);
  ++num_checks;
}

void GradCheckReport::merge(const GradCheckReport& other) {
  max_rel_error = std::max(max_rel_error, other.max_rel_error);
  num_checks += other.num_checks;
}

GradCheckReport check_head_gradients(const Head& head, const Vector& x, Index target,
                                     LossKind loss) {
  GradCheckReport report;
  Head h = head;  // local copy so parameter nudges stay private
  Vector xp = x;

  double analytic_alpha = 0.0;
  Vector analytic_bias;
  Vector analytic_input;
  Matrix analytic_weights;
  bool has_alpha_bias_weights = false;
  if (loss == LossKind::SoftmaxCrossEntropy) {
    const HeadLoss hl = loss_and_grads(h, xp, target);
    analytic_alpha = hl.grads.d_alpha;
    analytic_bias = hl.grads.d_bias;
    analytic_input = hl.grads.d_input;
    analytic_weights = hl.grads.d_weights;
    has_alpha_bias_weights = true;
  } else {
    analytic_input = cosine_loss_and_grads(h, xp, target).d_input;
  }

  const auto loss_now = [&] { return head_loss_value(h, xp, target, loss); };

  for (Index j = 0; j < xp.size(); ++j)
    report.absorb(analytic_input[j], central_difference(xp[j], loss_now));

  if (has_alpha_bias_weights) {
    for (Index i = 0; i < h.bias.size(); ++i)
      report.absorb(analytic_bias[i], central_difference(h.bias[i], loss_now));
    if (is_fixed_mode(h.mode)) {
      report.absorb(analytic_alpha, central_difference(h.alpha, loss_now));
    } else {
      for (Index i = 0; i < h.weights.rows(); ++i)
        for (Index j = 0; j < h.weights.cols(); ++j)
          report.absorb(analytic_weights(i, j), central_difference(h.weights(i, j), loss_now));
    }
  }
  return report;
}

GradCheckReport check_mlp_gradients(Mlp& mlp, const Vector& z, Index target) {
  GradCheckReport report;

  zero_grads(mlp);
  forward(mlp, z);
  backward(mlp, target);

  const auto loss_now = [&] { return mlp_loss_value(mlp, z, target); };
  const bool cosine = mlp.loss == LossKind::Cosine;

  for (auto& layer : mlp.layers) {
    for (Index i = 0; i < layer.w.rows(); ++i)
      for (Index j = 0; j < layer.w.cols(); ++j)
        report.absorb(layer.grad_w(i, j), central_difference(layer.w(i, j), loss_now));
    for (Index i = 0; i < layer.b.size(); ++i)
      report.absorb(layer.grad_b[i], central_difference(layer.b[i], loss_now));
  }
  if (!cosine) {
    for (Index i = 0; i < mlp.head.bias.size(); ++i)
      report.absorb(mlp.grad_bias[i], central_difference(mlp.head.bias[i], loss_now));
    if (mlp.head.mode == HeadMode::Learned) {
      for (Index i = 0; i < mlp.head.weights.rows(); ++i)
        for (Index j = 0; j < mlp.head.weights.cols(); ++j)
          report.absorb(mlp.grad_head_w(i, j),
                        central_difference(mlp.head.weights(i, j), loss_now));
    } else if (mlp.head.alpha_trainable) {
      report.absorb(mlp.grad_alpha, central_difference(mlp.head.alpha, loss_now));
    }
  }
  return report;
}

GradCheckReport run_gradient_checks(std::uint64_t seed) {
  GradCheckReport report;
  Rng rng(seed);

  struct Combo {
    HeadMode mode;
    LossKind loss;
  };
  const std::vector<Combo> combos = {
      {HeadMode::Learned, LossKind::SoftmaxCrossEntropy},
      {HeadMode::Orthonormal, LossKind::SoftmaxCrossEntropy},
      {HeadMode::Orthonormal, LossKind::Cosine},
      {HeadMode::Hadamard, LossKind::SoftmaxCrossEntropy},
      {HeadMode::Hadamard, LossKind::Cosine},
  };

  // 5 head configurations per (mode, loss) pair: 25 total.
  for (const Combo& combo : combos) {
    for (int rep = 0; rep < 5; ++rep) {
      const Index c = 2 + static_cast<Index>(rng.next_u64() % 3);  // 2..4
      const Index n = c + 2 + static_cast<Index>(rng.next_u64() % 5);
      const Head head = random_head(combo.mode, n, c, rng);
      const Vector x = random_vector(rng, n);
      const Index target = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(c));
      report.merge(check_head_gradients(head, x, target, combo.loss));
    }
  }

  // End-to-end MLP checks, one per combo, 2 hidden layers of width <= 16.
  for (const Combo& combo : combos) {
    const Index c = 3;
    const Index n = 8;
    const Index input_dim = 6;
    Head head = random_head(combo.mode, n, c, rng);
    Mlp mlp = make_mlp(input_dim, {12, n}, std::move(head), combo.loss);
    init_params(mlp, rng.next_u64());
    Vector z = random_vector(rng, input_dim);
    forward(mlp, z);
    for (int tries = 0; tries < 32 && !smooth_margin_ok(mlp); ++tries) {
      z = random_vector(rng, input_dim);
      forward(mlp, z);
    }
    const Index target = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(c));
    report.merge(check_mlp_gradients(mlp, z, target));
  }
  return report;
}

}  // namespace fixhead
