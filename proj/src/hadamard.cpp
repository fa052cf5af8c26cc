#include "fixhead/hadamard.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fixhead/util.hpp"

namespace fixhead {

namespace {

void require_power_of_two(const char* op, Index n) {
  if (!is_power_of_two(n)) {
    std::ostringstream os;
    os << op << ": size must be a power of two, got " << n;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

Matrix sylvester(Index n) {
  require_power_of_two("sylvester", n);
  Matrix h(1, 1);
  h(0, 0) = 1.0;
  for (Index m = 1; m < n; m *= 2) {
    Matrix next(2 * m, 2 * m);
    next.topLeftCorner(m, m) = h;
    next.topRightCorner(m, m) = h;
    next.bottomLeftCorner(m, m) = h;
    next.bottomRightCorner(m, m) = -h;
    h = std::move(next);
  }
  return h;
}

void fwht_in_place(Vector& x) {
  const Index n = x.size();
  require_power_of_two("fwht_in_place", n);
  for (Index half = 1; half < n; half *= 2) {
    for (Index block = 0; block < n; block += 2 * half) {
      for (Index j = block; j < block + half; ++j) {
        const double a = x[j];
        const double b = x[j + half];
        x[j] = a + b;
        x[j + half] = a - b;
      }
    }
  }
}

HadamardHeadGeometry make_hadamard_geometry(Index n, Index c) {
  require_power_of_two("make_hadamard_geometry", n);
  if (c < 1 || c > n) {
    std::ostringstream os;
    os << "make_hadamard_geometry: need 1 <= c <= n, got c=" << c << " n=" << n;
    throw std::invalid_argument(os.str());
  }
  return HadamardHeadGeometry{n, c, 1.0 / std::sqrt(static_cast<double>(n))};
}

Vector hadamard_logits(const HadamardHeadGeometry& geom, const Vector& x_hat, double alpha,
                       const Vector& b) {
  if (x_hat.size() != geom.n || b.size() != geom.c) {
    std::ostringstream os;
    os << "hadamard_logits: expected x_hat length " << geom.n << " and bias length " << geom.c
       << ", got " << x_hat.size() << " and " << b.size();
    throw std::invalid_argument(os.str());
  }
  Vector t = x_hat;
  fwht_in_place(t);
  Vector y(geom.c);
  for (Index i = 0; i < geom.c; ++i) y[i] = alpha * (geom.row_scale * t[i]) + b[i];
  return y;
}

Vector hadamard_backward(const HadamardHeadGeometry& geom, const Vector& g_logits, double alpha) {
  if (g_logits.size() != geom.c) {
    std::ostringstream os;
    os << "hadamard_backward: expected gradient length " << geom.c << ", got " << g_logits.size();
    throw std::invalid_argument(os.str());
  }
  Vector t = Vector::Zero(geom.n);
  t.head(geom.c) = g_logits;
  fwht_in_place(t);
  return (alpha * geom.row_scale) * t;
}

}  // namespace fixhead
