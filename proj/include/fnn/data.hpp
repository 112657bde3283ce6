#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fnn/rng.hpp"
#include "fnn/tensor.hpp"

namespace fnn {

/// Images N×H×W×C with pixels in [0, 1] and integer labels in [0, class_count).
struct LabeledImageSet {
  Tensor images;
  std::vector<int> labels;
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t height() const { return images.dim(1); }
  std::size_t width() const { return images.dim(2); }
  std::size_t channels() const { return images.dim(3); }

  /// Samples [begin, end) as a new set.
  LabeledImageSet slice(std::size_t begin, std::size_t end) const;
  /// Samples at the given indices, in order.
  LabeledImageSet gather(const std::vector<std::size_t>& indices) const;
};

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPixels = kCifarSide * kCifarSide * 3;

LabeledImageSet read_cifar10(const std::filesystem::path& path);
/// Uses the fine label of each record.
LabeledImageSet read_cifar100(const std::filesystem::path& path);
LabeledImageSet read_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes 32×32×3 images in the CIFAR-10 record layout. Pixels are rounded to bytes.
void write_cifar10(const LabeledImageSet& set, const std::filesystem::path& path);
/// Writes single-channel images as an IDX image/label file pair.
void write_mnist_idx(const LabeledImageSet& set, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

struct SynthFsdParams {
  std::size_t classes = 2;
  std::size_t per_class = 100;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t states = 2;
  double separation = 1.0;
};

/// Synthetic finite-state data. Each class owns a factorized pattern with one
/// preferred state per pixel; every pixel is drawn from
/// (1 - separation) * uniform + separation * one_hot(preferred state).
/// Pixels are single-channel with state k stored as k / (states - 1).
/// Labels are interleaved: sample i has label i % classes.
LabeledImageSet synth_fsd(const SynthFsdParams& params, Rng& rng);

/// Fisher-Yates permutation of [0, n) drawn from Rng(seed).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

struct Batch {
  std::vector<std::size_t> indices;
  Tensor images;
  std::vector<int> labels;
};

/// Walks a dataset in a seeded shuffled order; the last partial batch is kept.
class BatchIterator {
 public:
  BatchIterator(const LabeledImageSet& set, std::size_t batch_size, std::uint64_t seed);

  std::optional<Batch> next();
  std::size_t batch_count() const;

 private:
  const LabeledImageSet* set_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

inline BatchIterator shuffle_batches(const LabeledImageSet& set, std::size_t batch_size, std::uint64_t seed) {
  return BatchIterator(set, batch_size, seed);
}

}  // namespace fnn
