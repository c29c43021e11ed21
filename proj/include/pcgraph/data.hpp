// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcgraph/tensor.hpp"

namespace pcg {

enum class DatasetKind { image_classification, name_classification, char_lm, synthetic };
std::string to_string(DatasetKind kind);

/// Byte alphabet for the text datasets. Symbols are kept in ascending byte
/// order, so the encoding depends only on which bytes occur.
class Alphabet {
 public:
  Alphabet() { index_.fill(-1); }
  explicit Alphabet(std::string_view observed);

  std::size_t size() const noexcept { return symbols_.size(); }
  bool contains(unsigned char c) const noexcept { return index_[c] >= 0; }
  /// Throws LookupError for bytes outside the alphabet.
  std::size_t encode(unsigned char c) const;
  unsigned char decode(std::size_t code) const;
  Tensor one_hot(unsigned char c) const;
  /// [text.size(), size()] one-hot rows.
  Tensor one_hot(std::string_view text) const;
  const std::vector<unsigned char>& symbols() const noexcept { return symbols_; }

 private:
  std::vector<unsigned char> symbols_;
  std::array<int, 256> index_{};
};

/// Every element carries its model input and its target. Classification
/// targets are one-hot class rows; char-lm targets are the one-hot next
/// characters, flattened in time order.
struct DatasetHandle {
  DatasetKind kind = DatasetKind::synthetic;
  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;
  /// Class index per element; empty for char-lm.
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  /// Category names in first-seen order (names datasets).
  std::vector<std::string> class_names;
  Alphabet alphabet;

  std::size_t size() const noexcept { return inputs.size(); }
  /// Index of a category name; throws LookupError when unknown.
  std::size_t category(const std::string& name) const;
};

struct Batch {
  Tensor inputs;   // [size, ...]
  Tensor targets;  // [size, ...]
  std::size_t size = 0;
};

Tensor one_hot(std::size_t index, std::size_t classes);

// PCIM images: "PCIM", u32 version (1), u32 count, u32 height, u32 width,
// u32 channels, count·channels·height·width u8 pixels (each image stored
// channel-major), then count u32 labels. Integers are little-endian.
struct ImageFile {
  std::uint32_t count = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint32_t> labels;
};

/// Throws ParseError with the byte offset of the first problem.
ImageFile parse_pcim(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pcim(const ImageFile& images);
void write_pcim(const std::string& path, const ImageFile& images);
std::vector<std::uint8_t> read_file(const std::string& path);

/// Images as [channels, height, width] tensors; pixels divided by 255 when
/// `normalize` is set. The class count is one more than the largest label.
DatasetHandle load_images(const std::string& path, bool normalize = true);
DatasetHandle images_dataset(const ImageFile& images, bool normalize = true);

/// Splits a corpus into consecutive windows of `window` characters. Each
/// window's target is the same span shifted one character ahead, so there
/// are floor((length − 1) / window) sequences. Inputs are [window, alphabet].
DatasetHandle load_text(const std::string& path, std::size_t window);
DatasetHandle text_dataset(std::string_view corpus, std::size_t window);

/// One `name<TAB>category` record per line. Inputs are [length, alphabet]
/// one-hot rows, so names of different lengths have different shapes.
DatasetHandle load_names(const std::string& path);
DatasetHandle names_dataset(std::string_view text);

/// Encodes one name for an existing names dataset. Unknown categories and
/// characters raise LookupError.
Tensor encode_name(const DatasetHandle& names, const std::string& name);

struct SyntheticSpec {
  std::size_t channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t classes = 4;
  double noise = 0.05;
};

/// Class-conditional Gaussian blobs: class k places a bright blob at its own
/// position on a circle around the image centre, plus pixel noise, clipped to
/// [0, 1]. Same seed, same data.
DatasetHandle synthetic_classification(std::uint64_t seed, std::size_t n,
                                       const SyntheticSpec& spec);

/// Quantizes a [C,H,W] image dataset with values in [0, 1] to PCIM.
ImageFile to_image_file(const DatasetHandle& images);

/// Converts the CIFAR-10 binary layout (one label byte, then 3·32·32 pixel
/// bytes, per record) to PCIM.
ImageFile parse_cifar10_binary(std::span<const std::uint8_t> bytes);

/// Index lists of consecutive batches. With `shuffle` the order is a seeded
/// permutation. The final short batch is dropped.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t items, std::size_t size,
                                                    std::uint64_t seed, bool shuffle);
std::vector<Batch> batches(const DatasetHandle& data, std::size_t size, std::uint64_t seed,
                           bool shuffle);
/// Stacks the chosen elements; their shapes must agree.
Batch make_batch(const DatasetHandle& data, std::span<const std::size_t> indices);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
/// FNV-1a over the shape and the little-endian bit patterns of the values.
std::uint64_t tensor_checksum(const Tensor& t);

}  // namespace pcg
