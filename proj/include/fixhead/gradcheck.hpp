#pragma once

#include <cstdint>

#include "fixhead/net.hpp"
#include "fixhead/types.hpp"

namespace fixhead {

// Central finite differences (step 1e-6) against the analytic gradients.
// Relative error uses max(|analytic|, |numeric|, 1e-4) as the denominator so
// near-zero pairs do not explode.
struct GradCheckReport {
  double max_rel_error = 0.0;
  Index num_checks = 0;

  void absorb(double analytic, double numeric);
  void merge(const GradCheckReport& other);
};

constexpr double kGradCheckStep = 1e-6;
constexpr double kGradCheckTolerance = 1e-4;

// Every gradient the head produces for (x, target): d_input, d_bias, d_alpha,
// and d_weights in learned mode. Cosine loss checks d_input only (nothing
// else participates).
GradCheckReport check_head_gradients(const Head& head, const Vector& x, Index target,
                                     LossKind loss);

// Every MLP parameter end to end: layer weights and biases, head bias, alpha
// when trainable, learned head weights.
GradCheckReport check_mlp_gradients(Mlp& mlp, const Vector& z, Index target);

// The full battery: >= 20 random head configurations across all three modes
// and both losses, plus end-to-end MLP checks per mode. Deterministic per
// seed.
GradCheckReport run_gradient_checks(std::uint64_t seed);

}  // namespace fixhead
