#include "sdprop/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "sdprop/error.hpp"
#include "sdprop/rng.hpp"

namespace sdprop {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;  // 2051
constexpr std::uint32_t kLabelsMagic = 0x00000801;  // 2049

std::uint32_t read_u32_be(std::istream& in, const std::string& path,
                          const char* field) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) {
    throw FormatError(path, std::string("4-byte big-endian ") + field,
                      "end of file");
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>(v & 0xff)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::vector<unsigned char> read_payload(std::istream& in,
                                        const std::string& path,
                                        std::uint64_t expected,
                                        const char* what) {
  std::vector<unsigned char> bytes(expected);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(expected));
  const auto got = static_cast<std::uint64_t>(in.gcount());
  if (got != expected) {
    throw FormatError(path,
                      std::to_string(expected) + " " + what + " bytes",
                      "only " + std::to_string(got));
  }
  return bytes;
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(path, "a readable IDX file", "no readable file");
  }
  return in;
}

// Unbiased bounded draw; feeds the hand-rolled Fisher-Yates below so the
// permutation stream is pinned to the engine, not to a library distribution.
std::uint64_t bounded(RngEngine& eng, std::uint64_t bound) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % bound;  // multiple of bound
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream images = open_binary(images_path);
  const std::uint32_t img_magic = read_u32_be(images, images_path, "magic");
  if (img_magic != kImagesMagic) {
    throw FormatError(images_path,
                      "image magic " + std::to_string(kImagesMagic),
                      "magic " + std::to_string(img_magic));
  }
  const std::uint32_t count = read_u32_be(images, images_path, "image count");
  const std::uint32_t rows = read_u32_be(images, images_path, "row count");
  const std::uint32_t cols = read_u32_be(images, images_path, "column count");
  if (rows == 0 || cols == 0) {
    throw FormatError(images_path, "nonzero image dimensions",
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::uint64_t dim = std::uint64_t(rows) * cols;
  const std::vector<unsigned char> pixels =
      read_payload(images, images_path, std::uint64_t(count) * dim, "pixel");

  std::ifstream labels_in = open_binary(labels_path);
  const std::uint32_t lbl_magic = read_u32_be(labels_in, labels_path, "magic");
  if (lbl_magic != kLabelsMagic) {
    throw FormatError(labels_path,
                      "label magic " + std::to_string(kLabelsMagic),
                      "magic " + std::to_string(lbl_magic));
  }
  const std::uint32_t lbl_count = read_u32_be(labels_in, labels_path, "label count");
  if (lbl_count != count) {
    throw FormatError(labels_path,
                      std::to_string(count) + " labels to match the images",
                      std::to_string(lbl_count));
  }
  const std::vector<unsigned char> raw_labels =
      read_payload(labels_in, labels_path, lbl_count, "label");

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(count),
                       static_cast<Eigen::Index>(dim));
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint64_t j = 0; j < dim; ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          pixels[i * dim + j] / 255.0;
    }
  }
  data.labels.assign(raw_labels.begin(), raw_labels.end());
  int max_label = -1;
  for (int y : data.labels) max_label = std::max(max_label, y);
  data.num_classes = max_label + 1;
  return data;
}

void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path, int image_rows) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  Eigen::Index rows = 1, cols = d;
  if (image_rows > 0) {
    if (d % image_rows != 0) {
      throw DimensionError("save_idx: feature width " + std::to_string(d) +
                           " is not divisible by " + std::to_string(image_rows) +
                           " image rows");
    }
    rows = image_rows;
    cols = d / image_rows;
  }
  if (static_cast<Eigen::Index>(data.labels.size()) != n) {
    throw DimensionError("save_idx: " + std::to_string(data.labels.size()) +
                         " labels for " + std::to_string(n) + " examples");
  }

  std::ofstream images(images_path, std::ios::binary);
  if (!images) throw FormatError(images_path, "a writable file", "open failure");
  write_u32_be(images, kImagesMagic);
  write_u32_be(images, static_cast<std::uint32_t>(n));
  write_u32_be(images, static_cast<std::uint32_t>(rows));
  write_u32_be(images, static_cast<std::uint32_t>(cols));
  std::vector<unsigned char> pixel_row(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const long q = std::lround(data.features(i, j) * 255.0);
      pixel_row[static_cast<std::size_t>(j)] =
          static_cast<unsigned char>(std::clamp(q, 0L, 255L));
    }
    images.write(reinterpret_cast<const char*>(pixel_row.data()),
                 static_cast<std::streamsize>(pixel_row.size()));
  }

  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw FormatError(labels_path, "a writable file", "open failure");
  write_u32_be(labels, kLabelsMagic);
  write_u32_be(labels, static_cast<std::uint32_t>(n));
  for (int y : data.labels) {
    if (y < 0 || y > 255) {
      throw ConfigError("save_idx: label " + std::to_string(y) +
                        " does not fit in one byte");
    }
    const unsigned char b = static_cast<unsigned char>(y);
    labels.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Dataset synthetic_classification(int n, int d, int k, double separation,
                                 std::uint64_t seed) {
  if (n < 1 || d < 1 || k < 1) {
    throw ConfigError("synthetic_classification: n, d, k must all be >= 1");
  }
  if (!(separation >= 0.0)) {
    throw ConfigError("synthetic_classification: separation must be >= 0");
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  RngEngine mean_rng = make_engine(seed, 1);
  Tensor means(k, d);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < d; ++j) means(c, j) = normal(mean_rng);
    const double norm = means.row(c).norm();
    if (norm > 0.0) {
      means.row(c) *= separation / norm;
    }
  }

  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(static_cast<std::size_t>(n));
  data.num_classes = k;
  RngEngine noise_rng = make_engine(seed, 2);
  for (int i = 0; i < n; ++i) {
    const int y = i % k;
    data.labels[static_cast<std::size_t>(i)] = y;
    for (int j = 0; j < d; ++j) {
      data.features(i, j) = means(y, j) + normal(noise_rng);
    }
  }

  // One global affine squash into [0, 1]: keeps relative geometry, satisfies
  // the feature-range contract shared with the byte-based loaders.
  const double lo = data.features.minCoeff();
  const double hi = data.features.maxCoeff();
  if (hi > lo) {
    data.features = (data.features.array() - lo) / (hi - lo);
  } else {
    data.features.setConstant(0.5);
  }
  return data;
}

Dataset take_prefix(const Dataset& data, Eigen::Index n) {
  const Eigen::Index m = std::min(n, data.rows());
  Dataset out;
  out.features = data.features.topRows(m);
  out.labels.assign(data.labels.begin(), data.labels.begin() + m);
  out.num_classes = data.num_classes;
  return out;
}

BatchSampler::BatchSampler(int batch_size, std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

Eigen::Index BatchSampler::num_batches(Eigen::Index n) const {
  return (n + batch_size_ - 1) / batch_size_;
}

std::vector<int> BatchSampler::epoch_permutation(Eigen::Index n,
                                                 std::int64_t epoch) const {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  RngEngine eng = make_engine(seed_, static_cast<std::uint64_t>(epoch));
  for (std::size_t i = perm.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(bounded(eng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<int> BatchSampler::batch_indices(Eigen::Index n, std::int64_t epoch,
                                             Eigen::Index step) const {
  if (batch_size_ > n) {
    throw ConfigError("batch size " + std::to_string(batch_size_) +
                      " exceeds the dataset size " + std::to_string(n));
  }
  const Eigen::Index nb = num_batches(n);
  if (step < 0 || step >= nb) {
    throw ConfigError("batch " + std::to_string(step) + " out of range, epoch has " +
                      std::to_string(nb) + " batches");
  }
  const std::vector<int> perm = epoch_permutation(n, epoch);
  const Eigen::Index begin = step * batch_size_;
  const Eigen::Index end = std::min(n, begin + batch_size_);
  return std::vector<int>(perm.begin() + begin, perm.begin() + end);
}

}  // namespace sdprop
