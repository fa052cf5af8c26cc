#include "fixhead/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "fixhead/io.hpp"
#include "fixhead/projection.hpp"
#include "fixhead/rng.hpp"
#include "fixhead/util.hpp"

namespace fixhead {

namespace {

// Seed streams hung off the user seed; keep disjoint from the experiment
// streams (10+) in experiment.cpp.
constexpr std::uint64_t kStreamMeans = 1;
constexpr std::uint64_t kStreamNoise = 2;
constexpr std::uint64_t kStreamSplit = 3;

Dataset take_rows(const Matrix& features, const std::vector<Index>& labels,
                  const std::vector<Index>& order, Index begin, Index end, Index n_classes) {
  Dataset out;
  out.features = Matrix(end - begin, features.cols());
  out.labels.reserve(static_cast<std::size_t>(end - begin));
  out.n_classes = n_classes;
  for (Index i = begin; i < end; ++i) {
    out.features.row(i - begin) = features.row(order[static_cast<std::size_t>(i)]);
    out.labels.push_back(labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  return out;
}

std::string kind_name(IdxError::Kind kind) {
  switch (kind) {
    case IdxError::Kind::BadMagic:
      return "bad magic";
    case IdxError::Kind::Truncated:
      return "truncated file";
    case IdxError::Kind::LengthMismatch:
      return "length mismatch";
  }
  return "unknown";
}

std::string format_idx_error(IdxError::Kind kind, const std::filesystem::path& path,
                             std::uint64_t offset, const std::string& detail) {
  std::ostringstream os;
  os << "idx: " << kind_name(kind) << " in " << path.string() << " at byte " << offset << ": "
     << detail;
  return os.str();
}

// Whole-file reader with a cursor; every failure knows its offset.
class IdxReader {
 public:
  explicit IdxReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IdxError(IdxError::Kind::Truncated, path, 0, "cannot open file");
    bytes_.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  }

  std::uint32_t read_u32_be() {
    require(4, "expected 4-byte big-endian integer");
    const auto* b = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 4;
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
  }

  const unsigned char* read_bytes(std::uint64_t n, const char* what) {
    require(n, what);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += n;
    return p;
  }

  std::uint64_t pos() const { return pos_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  void require(std::uint64_t n, const char* what) {
    if (pos_ + n > bytes_.size()) throw IdxError(IdxError::Kind::Truncated, path_, pos_, what);
  }

  std::filesystem::path path_;
  std::string bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace

IdxError::IdxError(Kind kind, std::filesystem::path path, std::uint64_t offset,
                   const std::string& detail)
    : std::runtime_error(format_idx_error(kind, path, offset, detail)),
      kind_(kind),
      path_(std::move(path)),
      offset_(offset) {}

TrainValSplit make_blobs(Index n_classes, Index dim, Index per_class, double noise_sigma,
                         std::uint64_t seed) {
  if (n_classes < 2) throw std::invalid_argument("make_blobs: n_classes must be >= 2");
  if (dim < 2) throw std::invalid_argument("make_blobs: dim must be >= 2");
  if (per_class < 1) throw std::invalid_argument("make_blobs: per_class must be >= 1");
  if (noise_sigma < 0.0) throw std::invalid_argument("make_blobs: noise_sigma must be >= 0");

  // Class means: unit vectors on the sphere (column j of the projection).
  const FixedProjection means =
      unit_rows(dim, n_classes, derive_seed(seed, kStreamMeans), /*warn_if_strict_available=*/false);

  const Index total = n_classes * per_class;
  Matrix features(total, dim);
  std::vector<Index> labels(static_cast<std::size_t>(total));

  // Per-coordinate sigma/sqrt(dim) makes the expected noise norm ~ sigma,
  // commensurate with the unit-length means regardless of dim.
  const double coord_sigma = noise_sigma / std::sqrt(static_cast<double>(dim));
  Rng noise(derive_seed(seed, kStreamNoise));
  for (Index k = 0; k < n_classes; ++k) {
    for (Index s = 0; s < per_class; ++s) {
      const Index row = k * per_class + s;
      labels[static_cast<std::size_t>(row)] = k;
      for (Index j = 0; j < dim; ++j)
        features(row, j) = means.q(j, k) + coord_sigma * noise.next_normal();
    }
  }

  // Seeded Fisher-Yates, then 80/20 by position.
  std::vector<Index> order(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng shuffler(derive_seed(seed, kStreamSplit));
  for (Index i = total - 1; i > 0; --i) {
    const Index j = static_cast<Index>(shuffler.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  const Index n_val = total / 5;
  const Index n_train = total - n_val;
  TrainValSplit split;
  split.train = take_rows(features, labels, order, 0, n_train, n_classes);
  split.val = take_rows(features, labels, order, n_train, total, n_classes);
  return split;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, Index limit) {
  constexpr std::uint32_t kImagesMagic = 0x00000803;
  constexpr std::uint32_t kLabelsMagic = 0x00000801;

  IdxReader images(images_path);
  {
    const std::uint64_t at = images.pos();
    const std::uint32_t magic = images.read_u32_be();
    if (magic != kImagesMagic) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "expected 0x%08x, found 0x%08x", kImagesMagic, magic);
      throw IdxError(IdxError::Kind::BadMagic, images_path, at, buf);
    }
  }
  const std::uint32_t count = images.read_u32_be();
  const std::uint32_t rows = images.read_u32_be();
  const std::uint32_t cols = images.read_u32_be();

  IdxReader labels(labels_path);
  {
    const std::uint64_t at = labels.pos();
    const std::uint32_t magic = labels.read_u32_be();
    if (magic != kLabelsMagic) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "expected 0x%08x, found 0x%08x", kLabelsMagic, magic);
      throw IdxError(IdxError::Kind::BadMagic, labels_path, at, buf);
    }
  }
  const std::uint32_t label_count = labels.read_u32_be();
  if (label_count != count) {
    std::ostringstream os;
    os << label_count << " labels vs " << count << " images in " << images_path.string();
    throw IdxError(IdxError::Kind::LengthMismatch, labels_path, labels.pos() - 4, os.str());
  }

  Index take = static_cast<Index>(count);
  if (limit >= 0) take = std::min(take, limit);
  const Index pixel_dim = static_cast<Index>(rows) * static_cast<Index>(cols);

  Dataset ds;
  ds.features = Matrix(take, pixel_dim);
  ds.labels.reserve(static_cast<std::size_t>(take));
  const unsigned char* pixels =
      images.read_bytes(static_cast<std::uint64_t>(take) * static_cast<std::uint64_t>(pixel_dim),
                        "pixel data shorter than header promises");
  for (Index i = 0; i < take; ++i)
    for (Index j = 0; j < pixel_dim; ++j)
      ds.features(i, j) = static_cast<double>(pixels[i * pixel_dim + j]) / 255.0;

  const unsigned char* raw_labels =
      labels.read_bytes(static_cast<std::uint64_t>(take), "label data shorter than header promises");
  Index max_label = 0;
  for (Index i = 0; i < take; ++i) {
    const Index l = static_cast<Index>(raw_labels[i]);
    max_label = std::max(max_label, l);
    ds.labels.push_back(l);
  }
  ds.n_classes = take > 0 ? max_label + 1 : 0;
  return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  const auto quantize = [](double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
  };

  {
    std::ofstream os(images_path, std::ios::binary);
    if (!os) throw std::runtime_error("save_idx: cannot open " + images_path.string());
    write_u32_be(os, 0x00000803);
    write_u32_be(os, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(os, 1);
    write_u32_be(os, static_cast<std::uint32_t>(ds.dim()));
    for (Index i = 0; i < ds.size(); ++i)
      for (Index j = 0; j < ds.dim(); ++j) {
        const unsigned char b = quantize(ds.features(i, j));
        os.write(reinterpret_cast<const char*>(&b), 1);
      }
    if (!os) throw std::runtime_error("save_idx: write failed for " + images_path.string());
  }
  {
    std::ofstream os(labels_path, std::ios::binary);
    if (!os) throw std::runtime_error("save_idx: cannot open " + labels_path.string());
    write_u32_be(os, 0x00000801);
    write_u32_be(os, static_cast<std::uint32_t>(ds.size()));
    for (Index label : ds.labels) {
      const auto b = static_cast<unsigned char>(label);
      os.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!os) throw std::runtime_error("save_idx: write failed for " + labels_path.string());
  }
}

}  // namespace fixhead
