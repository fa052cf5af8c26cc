#include "fixhead/projection.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "fixhead/io.hpp"
#include "fixhead/linalg.hpp"
#include "fixhead/rng.hpp"

namespace fixhead {

namespace {

constexpr char kMagic[4] = {'F', 'I', 'X', 'Q'};
constexpr double kBreakdownNorm = 1e-8;
constexpr int kMaxRedraws = 16;

void require_positive(Index n_features, Index n_classes) {
  if (n_features < 1 || n_classes < 1) {
    std::ostringstream os;
    os << "projection: n_features and n_classes must be >= 1, got " << n_features << " and "
       << n_classes;
    throw std::invalid_argument(os.str());
  }
}

// Deterministic sign convention: flip the column so its first nonzero entry
// is positive.
void pin_sign(Matrix& q, Index j) {
  for (Index i = 0; i < q.rows(); ++i) {
    if (q(i, j) != 0.0) {
      if (q(i, j) < 0.0) q.col(j) = -q.col(j);
      return;
    }
  }
}

}  // namespace

FixedProjection random_orthonormal(Index n_features, Index n_classes, std::uint64_t seed) {
  require_positive(n_features, n_classes);
  if (n_classes > n_features) {
    std::ostringstream os;
    os << "random_orthonormal: n_classes (" << n_classes << ") exceeds n_features (" << n_features
       << "); use unit_rows for the C > N regime";
    throw std::invalid_argument(os.str());
  }
  Rng rng(seed);
  Matrix q(n_features, n_classes);
  for (Index j = 0; j < n_classes; ++j) {
    int redraws = 0;
    for (;;) {
      Vector v = rng_normal(rng, n_features);
      for (Index i = 0; i < j; ++i) v -= q.col(i).dot(v) * q.col(i);
      const double norm = l2_norm(v);
      if (norm >= kBreakdownNorm) {
        q.col(j) = v / norm;
        break;
      }
      if (++redraws > kMaxRedraws) {
        throw std::runtime_error("random_orthonormal: Gram-Schmidt breakdown, column redraw limit reached");
      }
    }
    pin_sign(q, j);
  }
  return FixedProjection{std::move(q), n_features, n_classes, seed,
                         ProjectionMode::StrictOrthonormal};
}

FixedProjection unit_rows(Index n_features, Index n_classes, std::uint64_t seed,
                          bool warn_if_strict_available) {
  require_positive(n_features, n_classes);
  if (warn_if_strict_available && n_classes <= n_features) {
    std::cerr << "unit_rows: n_classes <= n_features, strict orthonormal mode is available\n";
  }
  Rng rng(seed);
  Matrix q(n_features, n_classes);
  for (Index j = 0; j < n_classes; ++j) {
    for (;;) {
      Vector v = rng_normal(rng, n_features);
      const double norm = l2_norm(v);
      if (norm >= kBreakdownNorm) {
        q.col(j) = v / norm;
        break;
      }
    }
  }
  return FixedProjection{std::move(q), n_features, n_classes, seed, ProjectionMode::UnitRows};
}

void save_projection(const FixedProjection& p, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_projection: cannot open " + path.string());
  os.write(kMagic, 4);
  write_u32_le(os, static_cast<std::uint32_t>(p.n_features));
  write_u32_le(os, static_cast<std::uint32_t>(p.n_classes));
  write_u32_le(os, static_cast<std::uint32_t>(p.mode));
  for (Index i = 0; i < p.q.rows(); ++i)
    for (Index j = 0; j < p.q.cols(); ++j) write_f64_le(os, p.q(i, j));
  if (!os) throw std::runtime_error("save_projection: write failed for " + path.string());
}

FixedProjection load_projection(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_projection: cannot open " + path.string());
  char magic[4] = {0};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("load_projection: bad magic in " + path.string());
  }
  const auto n = static_cast<Index>(read_u32_le(is));
  const auto c = static_cast<Index>(read_u32_le(is));
  const auto mode = read_u32_le(is);
  if (!is || n < 1 || c < 1 || mode > 1) {
    throw std::runtime_error("load_projection: corrupt header in " + path.string());
  }
  FixedProjection p;
  p.n_features = n;
  p.n_classes = c;
  p.mode = static_cast<ProjectionMode>(mode);
  p.q.resize(n, c);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < c; ++j) p.q(i, j) = read_f64_le(is);
  if (!is) throw std::runtime_error("load_projection: truncated file " + path.string());
  return p;
}

}  // namespace fixhead
