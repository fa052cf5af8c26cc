#include "fixhead/linalg.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fixhead {

namespace {

[[noreturn]] void throw_shape_mismatch(const char* op, Index rows, Index cols, Index len) {
  std::ostringstream os;
  os << op << ": dimension mismatch, matrix is " << rows << "x" << cols
     << " but vector has length " << len;
  throw std::invalid_argument(os.str());
}

}  // namespace

Vector gemv(const Matrix& m, const Vector& x) {
  if (m.cols() != x.size()) throw_shape_mismatch("gemv", m.rows(), m.cols(), x.size());
  Vector y(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (Index j = 0; j < m.cols(); ++j) acc += m(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

Vector gemv_transposed(const Matrix& m, const Vector& g) {
  if (m.rows() != g.size()) throw_shape_mismatch("gemv_transposed", m.rows(), m.cols(), g.size());
  // Row-major friendly order; each y[j] still accumulates over i ascending.
  Vector y = Vector::Zero(m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const double gi = g[i];
    for (Index j = 0; j < m.cols(); ++j) y[j] += m(i, j) * gi;
  }
  return y;
}

double l2_norm(const Vector& x) {
  double acc = 0.0;
  for (Index i = 0; i < x.size(); ++i) acc += x[i] * x[i];
  return std::sqrt(acc);
}

}  // namespace fixhead
