#pragma once

#include "fixhead/types.hpp"

namespace fixhead {

// y = M x. Plain loops with fixed left-to-right accumulation; reproduces a
// scalar oracle bit for bit on any platform.
Vector gemv(const Matrix& m, const Vector& x);

// y = M^T g without forming the transpose; same accumulation order per output
// element as the scalar oracle.
Vector gemv_transposed(const Matrix& m, const Vector& g);

double l2_norm(const Vector& x);

}  // namespace fixhead
