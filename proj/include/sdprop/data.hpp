#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdprop/autodiff.hpp"

namespace sdprop {

// An in-memory classification dataset. Features live in [0, 1] (loaders scale
// raw bytes by 1/255; the synthetic generator squashes to the same range), one
// row per example.
struct Dataset {
  Tensor features;          // n x d
  std::vector<int> labels;  // n entries in [0, num_classes)
  int num_classes = 0;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }
};

// Reads an images/labels file pair in the classic big-endian IDX layout:
// images carry magic 0x00000803 and dimensions [count, rows, cols], labels
// carry magic 0x00000801 and [count]. Pixels are unsigned bytes, scaled here
// to [0, 1]. The class count is inferred as 1 + max label. Malformed headers,
// truncated payloads, and count mismatches raise FormatError.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes the dataset back out in the same IDX layout, quantizing features to
// bytes via round(value * 255). A dataset produced by load_idx round-trips
// byte-identically. `image_rows` fixes the stored height; it must divide the
// feature width. Pass 0 to store each example as a single 1 x d row.
void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path, int image_rows = 0);

// Draws a k-cluster Gaussian mixture: cluster means are random unit vectors
// scaled by `separation`, points get unit-variance noise, and labels cycle
// round-robin so every class has (nearly) equal counts. The whole feature
// block is then min-max squashed into [0, 1], which preserves the geometry up
// to one global affine map. Same seed, same dataset.
Dataset synthetic_classification(int n, int d, int k, double separation,
                                 std::uint64_t seed);

// First n examples, unshuffled. n larger than the dataset just copies it all.
Dataset take_prefix(const Dataset& data, Eigen::Index n);

// Deterministic epoch shuffling: each epoch reshuffles [0, n) with a
// Fisher-Yates pass keyed by (seed, epoch), then batches are consecutive
// slices of that permutation. The final short batch of an epoch is kept.
class BatchSampler {
 public:
  BatchSampler(int batch_size, std::uint64_t seed);

  int batch_size() const { return batch_size_; }
  // Batches per epoch for a dataset of n examples (ceil division).
  Eigen::Index num_batches(Eigen::Index n) const;
  // The full permutation used for this epoch.
  std::vector<int> epoch_permutation(Eigen::Index n, std::int64_t epoch) const;
  // Indices of batch `step` (0-based) within `epoch`.
  std::vector<int> batch_indices(Eigen::Index n, std::int64_t epoch,
                                 Eigen::Index step) const;

 private:
  int batch_size_;
  std::uint64_t seed_;
};

}  // namespace sdprop
