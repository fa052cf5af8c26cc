#pragma once

#include <cstdint>

#include "fixhead/hadamard.hpp"
#include "fixhead/projection.hpp"
#include "fixhead/types.hpp"

namespace fixhead {

enum class HeadMode { Learned, Orthonormal, Hadamard };

inline bool is_fixed_mode(HeadMode mode) { return mode != HeadMode::Learned; }
const char* head_mode_name(HeadMode mode);

// Classification head.
//
// Learned mode is the plain affine baseline y = W^T x + b, trained end to
// end, no feature normalization and no scale.
//
// Fixed modes normalize the representation onto the unit sphere and compute
// y_i = alpha * q_i . x_hat + b_i, where the class directions q_i are frozen
// at construction (an explicit orthonormal matrix, or the implicit scaled
// rows of a Sylvester Hadamard matrix). Only alpha and the bias train.
struct Head {
  HeadMode mode = HeadMode::Learned;
  Index n_features = 0;
  Index n_classes = 0;
  Matrix weights;             // n_features x n_classes; empty in hadamard mode
  HadamardHeadGeometry geom;  // hadamard mode only
  double alpha = 1.0;
  bool alpha_trainable = false;
  Vector bias;  // n_classes, zero at construction
};

Head make_learned_head(Index n_features, Index n_classes);
Head make_orthonormal_head(const FixedProjection& projection, double alpha = 1.0,
                           bool alpha_trainable = true);
// Features are zero-padded to the Hadamard order internally; n_features does
// not have to be a power of two.
Head make_hadamard_head(Index n_features, Index n_classes, double alpha = 1.0,
                        bool alpha_trainable = true);

// x / max(||x||, 1e-12). The epsilon keeps degenerate (near-zero)
// representations defined; `guard_hits`, when given, counts how often it was
// needed.
Vector normalize(const Vector& x, std::uint64_t* guard_hits = nullptr);

Vector logits(const Head& head, const Vector& x, std::uint64_t* guard_hits = nullptr);

// Numerically stable: invariant to adding a constant to all inputs, no
// overflow for entries up to ~1e6.
Vector softmax(const Vector& y);

// -log softmax(y)[target], computed as logsumexp(y) - y[target].
double nll_loss(const Vector& y, Index target);

struct HeadGradients {
  double d_alpha = 0.0;
  Vector d_bias;
  Vector d_input;
  Matrix d_weights;  // learned mode only, n_features x n_classes
};

struct HeadLoss {
  double loss = 0.0;
  HeadGradients grads;
};

// Softmax cross-entropy through the head, with analytic gradients for every
// trainable quantity and the input.
HeadLoss loss_and_grads(const Head& head, const Vector& x, Index target,
                        std::uint64_t* guard_hits = nullptr);

struct CosineLoss {
  double loss = 0.0;
  Vector d_input;
};

// Softmax-free margin loss on the cosine scores: (1 - q_t.x_hat) for the true
// class plus sum of (1 + q_i.x_hat) over the rest. Fixed modes only; neither
// alpha nor the bias participates.
CosineLoss cosine_loss_and_grads(const Head& head, const Vector& x, Index target,
                                 std::uint64_t* guard_hits = nullptr);

// Digest of the class directions. Constant across training steps in fixed
// modes; changes when a learned head trains.
std::uint64_t head_weight_checksum(const Head& head);

}  // namespace fixhead
