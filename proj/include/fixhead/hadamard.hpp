#pragma once

#include "fixhead/types.hpp"

namespace fixhead {

// Sylvester Hadamard matrix of order n (n a power of two): entries are +-1
// and H H^T = n I.
Matrix sylvester(Index n);

// x <- H x with H = sylvester(x.size()), computed by log2(n) butterfly
// passes. Unnormalized; applying it twice gives n * x.
void fwht_in_place(Vector& x);

// Truncated Hadamard classifier geometry: the first c rows of a Sylvester
// matrix of order n, each scaled by 1/sqrt(n) so every class direction has
// unit norm.
struct HadamardHeadGeometry {
  Index n = 0;
  Index c = 0;
  double row_scale = 0.0;
};

HadamardHeadGeometry make_hadamard_geometry(Index n, Index c);

// logits[i] = alpha * (h_i . x_hat) / sqrt(n) + b[i] for i < c, via a single
// FWHT on a copy of x_hat. The n x n matrix is never materialized; auxiliary
// storage is one length-n buffer.
Vector hadamard_logits(const HadamardHeadGeometry& geom, const Vector& x_hat, double alpha,
                       const Vector& b);

// Adjoint of hadamard_logits with respect to x_hat:
//   dL/dx_hat = alpha/sqrt(n) * H * pad(g, n)
// where pad zero-extends g from c to n. Valid because Sylvester H is
// symmetric.
Vector hadamard_backward(const HadamardHeadGeometry& geom, const Vector& g_logits, double alpha);

}  // namespace fixhead
