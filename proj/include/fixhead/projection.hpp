#pragma once

#include <cstdint>
#include <filesystem>

#include "fixhead/types.hpp"

namespace fixhead {

enum class ProjectionMode : std::uint32_t {
  StrictOrthonormal = 0,  // unit columns, mutually orthogonal (needs c <= n)
  UnitRows = 1,           // unit columns only; supports c > n
};

// Fixed classifier directions: column j of q is the unit vector assigned to
// class j.
struct FixedProjection {
  Matrix q;  // n_features x n_classes
  Index n_features = 0;
  Index n_classes = 0;
  std::uint64_t seed = 0;
  ProjectionMode mode = ProjectionMode::StrictOrthonormal;
};

// Modified Gram-Schmidt over i.i.d. standard-normal columns. Column signs are
// pinned (first nonzero entry positive) so the result is unique per seed.
FixedProjection random_orthonormal(Index n_features, Index n_classes, std::uint64_t seed);

// Independent normalized Gaussian columns: unit norm, not mutually
// orthogonal. The mode that stays available when n_classes > n_features.
FixedProjection unit_rows(Index n_features, Index n_classes, std::uint64_t seed,
                          bool warn_if_strict_available = true);

// Flat binary format: 16-byte header (magic "FIXQ", u32 n, u32 c, u32 mode),
// then the matrix row-major as 64-bit little-endian floats.
void save_projection(const FixedProjection& p, const std::filesystem::path& path);
FixedProjection load_projection(const std::filesystem::path& path);

}  // namespace fixhead
