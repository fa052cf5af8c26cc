#pragma once

#include <Eigen/Core>

namespace fixhead {

using Index = Eigen::Index;

// Row-major storage throughout: the binary file formats are row-major and the
// deterministic kernels walk rows outermost.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace fixhead
