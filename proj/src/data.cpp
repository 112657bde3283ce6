#include "fnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "fnn/errors.hpp"

namespace fnn {

LabeledImageSet LabeledImageSet::slice(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = begin; i < std::min(end, size()); ++i) idx.push_back(i);
  return gather(idx);
}

LabeledImageSet LabeledImageSet::gather(const std::vector<std::size_t>& indices) const {
  const std::size_t per = size() ? images.size() / size() : 0;
  Shape shape = images.shape();
  shape[0] = indices.size();
  LabeledImageSet out{Tensor(shape), {}, class_count};
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw DimensionError("sample index " + std::to_string(i) + " out of range");
    std::copy_n(&images[i * per], per, &out.images[k * per]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LabeledImageSet read_cifar(const std::filesystem::path& path, std::size_t label_bytes, std::size_t classes) {
  const auto bytes = read_bytes(path);
  const std::size_t record = label_bytes + kCifarPixels;
  if (bytes.size() % record != 0) {
    throw FormatError(path.string() + ": truncated record at byte offset " +
                      std::to_string(bytes.size() / record * record) + " (file length " +
                      std::to_string(bytes.size()) + " is not a multiple of " + std::to_string(record) + ")");
  }
  const std::size_t n = bytes.size() / record;
  constexpr std::size_t plane = kCifarSide * kCifarSide;
  LabeledImageSet set{Tensor({n, kCifarSide, kCifarSide, 3}), std::vector<int>(n), classes};
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = &bytes[i * record];
    const int label = rec[label_bytes - 1];
    if (static_cast<std::size_t>(label) >= classes) {
      throw FormatError(path.string() + ": label " + std::to_string(label) + " at byte offset " +
                        std::to_string(i * record + label_bytes - 1) + " exceeds " + std::to_string(classes) +
                        " classes");
    }
    set.labels[i] = label;
    const unsigned char* px = rec + label_bytes;
    double* out = &set.images[i * kCifarPixels];
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c) out[p * 3 + c] = px[c * plane + p] / 255.0;
  }
  return set;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::filesystem::path& path) {
  if (off + 4 > b.size()) throw FormatError(path.string() + ": header truncated at byte offset " + std::to_string(off));
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) | (std::uint32_t(b[off + 2]) << 8) |
         std::uint32_t(b[off + 3]);
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(bytes, 4);
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

LabeledImageSet read_cifar10(const std::filesystem::path& path) { return read_cifar(path, 1, 10); }
LabeledImageSet read_cifar100(const std::filesystem::path& path) { return read_cifar(path, 2, 100); }

LabeledImageSet read_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  constexpr std::uint32_t kImageMagic = 2051, kLabelMagic = 2049;
  const auto img = read_bytes(images_path);
  const auto lab = read_bytes(labels_path);
  if (const auto m = read_be32(img, 0, images_path); m != kImageMagic) {
    throw FormatError(images_path.string() + ": magic mismatch, expected " + std::to_string(kImageMagic) + ", found " +
                      std::to_string(m));
  }
  if (const auto m = read_be32(lab, 0, labels_path); m != kLabelMagic) {
    throw FormatError(labels_path.string() + ": magic mismatch, expected " + std::to_string(kLabelMagic) + ", found " +
                      std::to_string(m));
  }
  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (n != n_labels) {
    throw FormatError("image count " + std::to_string(n) + " does not match label count " + std::to_string(n_labels));
  }
  if (img.size() != 16 + n * rows * cols) {
    throw FormatError(images_path.string() + ": expected " + std::to_string(16 + n * rows * cols) + " bytes, found " +
                      std::to_string(img.size()));
  }
  if (lab.size() != 8 + n) {
    throw FormatError(labels_path.string() + ": expected " + std::to_string(8 + n) + " bytes, found " +
                      std::to_string(lab.size()));
  }
  LabeledImageSet set{Tensor({n, rows, cols, 1}), std::vector<int>(n), 10};
  for (std::size_t i = 0; i < n * rows * cols; ++i) set.images[i] = img[16 + i] / 255.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lab[8 + i] > 9) {
      throw FormatError(labels_path.string() + ": label " + std::to_string(lab[8 + i]) + " at byte offset " +
                        std::to_string(8 + i));
    }
    set.labels[i] = lab[8 + i];
  }
  return set;
}

void write_cifar10(const LabeledImageSet& set, const std::filesystem::path& path) {
  if (set.images.rank() != 4 || set.height() != kCifarSide || set.width() != kCifarSide || set.channels() != 3) {
    throw DimensionError("CIFAR-10 layout needs N×32×32×3 images, got " + shape_str(set.images.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  constexpr std::size_t plane = kCifarSide * kCifarSide;
  std::vector<char> rec(1 + kCifarPixels);
  for (std::size_t i = 0; i < set.size(); ++i) {
    rec[0] = static_cast<char>(set.labels[i]);
    const double* px = &set.images[i * kCifarPixels];
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c) rec[1 + c * plane + p] = static_cast<char>(to_byte(px[p * 3 + c]));
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
}

void write_mnist_idx(const LabeledImageSet& set, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  if (set.images.rank() != 4 || set.channels() != 1) {
    throw DimensionError("IDX layout needs N×H×W×1 images, got " + shape_str(set.images.shape()));
  }
  std::ofstream img(images_path, std::ios::binary), lab(labels_path, std::ios::binary);
  if (!img || !lab) throw FormatError("cannot write IDX files");
  put_be32(img, 2051);
  put_be32(img, static_cast<std::uint32_t>(set.size()));
  put_be32(img, static_cast<std::uint32_t>(set.height()));
  put_be32(img, static_cast<std::uint32_t>(set.width()));
  for (double v : set.images.data()) img.put(static_cast<char>(to_byte(v)));
  put_be32(lab, 2049);
  put_be32(lab, static_cast<std::uint32_t>(set.size()));
  for (int l : set.labels) lab.put(static_cast<char>(l));
}

LabeledImageSet synth_fsd(const SynthFsdParams& p, Rng& rng) {
  if (!(p.separation >= 0.0 && p.separation <= 1.0)) throw ContractError("separation must lie in [0, 1]");
  if (p.classes < 1 || p.states < 2) throw ContractError("synth_fsd needs classes >= 1 and states >= 2");
  const std::size_t pixels = p.height * p.width;
  std::vector<std::size_t> pattern(p.classes * pixels);
  for (auto& state : pattern) state = rng.below(p.states);

  const std::size_t n = p.classes * p.per_class;
  LabeledImageSet set{Tensor({n, p.height, p.width, 1}), std::vector<int>(n), p.classes};
  const double scale = 1.0 / static_cast<double>(p.states - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % p.classes;
    set.labels[i] = static_cast<int>(c);
    for (std::size_t px = 0; px < pixels; ++px) {
      // Mixture draw: the class state with probability s, otherwise uniform.
      std::size_t state = rng.uniform() < p.separation ? pattern[c * pixels + px] : rng.below(p.states);
      set.images[i * pixels + px] = static_cast<double>(state) * scale;
    }
  }
  return set;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

BatchIterator::BatchIterator(const LabeledImageSet& set, std::size_t batch_size, std::uint64_t seed)
    : set_(&set), batch_size_(batch_size), order_(shuffled_indices(set.size(), seed)) {
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
}

std::optional<Batch> BatchIterator::next() {
  if (pos_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(pos_ + batch_size_, order_.size());
  Batch batch;
  batch.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                       order_.begin() + static_cast<std::ptrdiff_t>(end));
  pos_ = end;
  LabeledImageSet sub = set_->gather(batch.indices);
  batch.images = std::move(sub.images);
  batch.labels = std::move(sub.labels);
  return batch;
}

std::size_t BatchIterator::batch_count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

}  // namespace fnn
