#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fixhead/types.hpp"

namespace fixhead {

struct Dataset {
  Matrix features;            // num_samples x dim
  std::vector<Index> labels;  // each in [0, n_classes)
  Index n_classes = 0;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

struct TrainValSplit {
  Dataset train;
  Dataset val;
};

// Seeded Gaussian blobs: class means are unit vectors on the sphere, noise is
// isotropic with total standard deviation noise_sigma (per-coordinate
// noise_sigma/sqrt(dim), so difficulty tracks the sigma-to-mean-separation
// ratio independent of dim). Deterministic 80/20 split.
TrainValSplit make_blobs(Index n_classes, Index dim, Index per_class, double noise_sigma,
                         std::uint64_t seed);

// IDX parse failures carry which file broke, how, and where.
class IdxError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, Truncated, LengthMismatch };

  IdxError(Kind kind, std::filesystem::path path, std::uint64_t offset, const std::string& detail);

  Kind kind() const { return kind_; }
  const std::filesystem::path& path() const { return path_; }
  std::uint64_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::filesystem::path path_;
  std::uint64_t offset_;
};

// MNIST-style IDX pair: u8 images (magic 0x00000803, dims count x rows x
// cols) and u8 labels (magic 0x00000801). Pixels land in [0,1] via /255;
// images are flattened row-major. n_classes = max label + 1.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, Index limit = -1);

// Writes the dataset back out as an IDX pair with image dims (n, 1, dim);
// features are clamped to [0,1] and quantized to u8.
void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

}  // namespace fixhead
