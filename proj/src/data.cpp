// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "pcgraph/errors.hpp"
#include "pcgraph/random.hpp"

namespace pcg {

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::image_classification:
      return "image-classification";
    case DatasetKind::name_classification:
      return "name-classification";
    case DatasetKind::char_lm:
      return "char-lm";
    case DatasetKind::synthetic:
      return "synthetic";
  }
  return "unknown";
}

Alphabet::Alphabet(std::string_view observed) {
  index_.fill(-1);
  std::array<bool, 256> seen{};
  for (char c : observed) seen[static_cast<unsigned char>(c)] = true;
  for (std::size_t b = 0; b < 256; ++b) {
    if (!seen[b]) continue;
    index_[b] = static_cast<int>(symbols_.size());
    symbols_.push_back(static_cast<unsigned char>(b));
  }
}

std::size_t Alphabet::encode(unsigned char c) const {
  if (index_[c] < 0) throw LookupError("byte " + std::to_string(c) + " is not in the alphabet");
  return static_cast<std::size_t>(index_[c]);
}

unsigned char Alphabet::decode(std::size_t code) const {
  if (code >= symbols_.size()) throw LookupError("code " + std::to_string(code) + " out of range");
  return symbols_[code];
}

Tensor Alphabet::one_hot(unsigned char c) const { return pcg::one_hot(encode(c), size()); }

Tensor Alphabet::one_hot(std::string_view text) const {
  Tensor out(Shape{text.size(), size()});
  for (std::size_t t = 0; t < text.size(); ++t) {
    out[t * size() + encode(static_cast<unsigned char>(text[t]))] = 1.0;
  }
  return out;
}

std::size_t DatasetHandle::category(const std::string& name) const {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end()) throw LookupError("unknown category '" + name + "'");
  return static_cast<std::size_t>(it - class_names.begin());
}

Tensor one_hot(std::size_t index, std::size_t classes) {
  if (index >= classes) {
    throw LookupError("class " + std::to_string(index) + " out of range for " +
                      std::to_string(classes) + " classes");
  }
  Tensor t(Shape{classes});
  t[index] = 1.0;
  return t;
}

// ---------------------------------------------------------------------------
// PCIM

namespace {

constexpr std::uint32_t kPcimVersion = 1;

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t at, const char* what) {
  if (at + 4 > bytes.size()) throw ParseError(std::string("truncated ") + what, bytes.size());
  return static_cast<std::uint32_t>(bytes[at]) | static_cast<std::uint32_t>(bytes[at + 1]) << 8 |
         static_cast<std::uint32_t>(bytes[at + 2]) << 16 |
         static_cast<std::uint32_t>(bytes[at + 3]) << 24;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

ImageFile parse_pcim(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw ParseError("empty image file", 0);
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "PCIM")) {
    throw ParseError("bad magic, expected PCIM", 0);
  }
  const std::uint32_t version = read_u32(bytes, 4, "header");
  if (version != kPcimVersion) {
    throw ParseError("unsupported PCIM version " + std::to_string(version), 4);
  }
  ImageFile f;
  f.count = read_u32(bytes, 8, "header");
  f.height = read_u32(bytes, 12, "header");
  f.width = read_u32(bytes, 16, "header");
  f.channels = read_u32(bytes, 20, "header");
  if (f.height == 0 || f.width == 0 || f.channels == 0) {
    throw ParseError("image dimensions must be positive", 12);
  }
  const std::size_t header = 24;
  const std::size_t pixels = static_cast<std::size_t>(f.count) * f.height * f.width * f.channels;
  if (bytes.size() - header < pixels) throw ParseError("truncated pixel data", bytes.size());
  f.pixels.assign(bytes.begin() + header, bytes.begin() + static_cast<std::ptrdiff_t>(header + pixels));
  std::size_t at = header + pixels;
  for (std::uint32_t i = 0; i < f.count; ++i, at += 4) f.labels.push_back(read_u32(bytes, at, "labels"));
  if (at != bytes.size()) throw ParseError("trailing bytes after labels", at);
  return f;
}

std::vector<std::uint8_t> encode_pcim(const ImageFile& f) {
  const std::size_t pixels = static_cast<std::size_t>(f.count) * f.height * f.width * f.channels;
  if (f.pixels.size() != pixels || f.labels.size() != f.count) {
    throw StructuralError("image file fields disagree with its header");
  }
  std::vector<std::uint8_t> out{'P', 'C', 'I', 'M'};
  put_u32(out, kPcimVersion);
  put_u32(out, f.count);
  put_u32(out, f.height);
  put_u32(out, f.width);
  put_u32(out, f.channels);
  out.insert(out.end(), f.pixels.begin(), f.pixels.end());
  for (std::uint32_t l : f.labels) put_u32(out, l);
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_pcim(const std::string& path, const ImageFile& images) {
  const std::vector<std::uint8_t> bytes = encode_pcim(images);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LookupError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DatasetHandle images_dataset(const ImageFile& f, bool normalize) {
  DatasetHandle d;
  d.kind = DatasetKind::image_classification;
  const std::size_t per = static_cast<std::size_t>(f.height) * f.width * f.channels;
  std::uint32_t max_label = 0;
  for (std::uint32_t l : f.labels) max_label = std::max(max_label, l);
  d.classes = f.count ? static_cast<std::size_t>(max_label) + 1 : 0;
  for (std::size_t i = 0; i < f.count; ++i) {
    Tensor img(Shape{f.channels, f.height, f.width});
    for (std::size_t p = 0; p < per; ++p) {
      const double v = f.pixels[i * per + p];
      img[p] = normalize ? v / 255.0 : v;
    }
    d.inputs.push_back(std::move(img));
    d.labels.push_back(f.labels[i]);
    d.targets.push_back(one_hot(f.labels[i], d.classes));
  }
  return d;
}

DatasetHandle load_images(const std::string& path, bool normalize) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return images_dataset(parse_pcim(bytes), normalize);
}

// ---------------------------------------------------------------------------
// Text

DatasetHandle text_dataset(std::string_view corpus, std::size_t window) {
  if (corpus.empty()) throw StructuralError("text corpus is empty");
  if (window == 0 || window >= corpus.size()) {
    throw StructuralError("window of " + std::to_string(window) +
                          " does not fit a corpus of " + std::to_string(corpus.size()) +
                          " characters with a one-character target shift");
  }
  DatasetHandle d;
  d.kind = DatasetKind::char_lm;
  d.alphabet = Alphabet(corpus);
  d.classes = d.alphabet.size();
  const std::size_t count = (corpus.size() - 1) / window;
  for (std::size_t s = 0; s < count; ++s) {
    d.inputs.push_back(d.alphabet.one_hot(corpus.substr(s * window, window)));
    d.targets.push_back(d.alphabet.one_hot(corpus.substr(s * window + 1, window)).flatten());
  }
  return d;
}

DatasetHandle load_text(const std::string& path, std::size_t window) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return text_dataset(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      window);
}

DatasetHandle names_dataset(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> records;
  std::string all_chars;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      const std::size_t tab = line.find('\t');
      if (tab == std::string_view::npos || tab == 0 || tab + 1 == line.size()) {
        throw ParseError("expected name<TAB>category", pos);
      }
      records.emplace_back(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
      all_chars += records.back().first;
    }
    pos = end + 1;
  }
  if (records.empty()) throw ParseError("names file has no records", 0);
  DatasetHandle d;
  d.kind = DatasetKind::name_classification;
  d.alphabet = Alphabet(all_chars);
  for (const auto& [name, cat] : records) {
    if (std::find(d.class_names.begin(), d.class_names.end(), cat) == d.class_names.end()) {
      d.class_names.push_back(cat);
    }
  }
  d.classes = d.class_names.size();
  for (const auto& [name, cat] : records) {
    const std::size_t label = d.category(cat);
    d.inputs.push_back(d.alphabet.one_hot(name));
    d.labels.push_back(label);
    d.targets.push_back(one_hot(label, d.classes));
  }
  return d;
}

DatasetHandle load_names(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return names_dataset(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Tensor encode_name(const DatasetHandle& names, const std::string& name) {
  return names.alphabet.one_hot(name);
}

// ---------------------------------------------------------------------------
// Synthetic images

DatasetHandle synthetic_classification(std::uint64_t seed, std::size_t n,
                                       const SyntheticSpec& spec) {
  if (n == 0 || spec.classes == 0) throw StructuralError("synthetic data needs n and classes >= 1");
  if (spec.channels == 0 || spec.height == 0 || spec.width == 0) {
    throw StructuralError("synthetic image dimensions must be positive");
  }
  DatasetHandle d;
  d.kind = DatasetKind::synthetic;
  d.classes = spec.classes;
  Rng rng(seed);
  const double h = static_cast<double>(spec.height);
  const double w = static_cast<double>(spec.width);
  const double radius = 0.25 * std::min(h, w);
  const double sigma = 0.15 * std::min(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = static_cast<std::size_t>(rng.below(spec.classes));
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(label) /
                         static_cast<double>(spec.classes);
    const double cy = 0.5 * (h - 1.0) + (spec.classes > 1 ? radius * std::sin(angle) : 0.0);
    const double cx = 0.5 * (w - 1.0) + (spec.classes > 1 ? radius * std::cos(angle) : 0.0);
    Tensor img(Shape{spec.channels, spec.height, spec.width});
    for (std::size_t c = 0; c < spec.channels; ++c) {
      for (std::size_t y = 0; y < spec.height; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) {
          const double dy = static_cast<double>(y) - cy;
          const double dx = static_cast<double>(x) - cx;
          const double blob = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          const double v = blob + spec.noise * rng.normal();
          img[(c * spec.height + y) * spec.width + x] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    d.inputs.push_back(std::move(img));
    d.labels.push_back(label);
    d.targets.push_back(one_hot(label, spec.classes));
  }
  return d;
}

ImageFile to_image_file(const DatasetHandle& images) {
  ImageFile f;
  if (images.inputs.empty()) return f;
  const Shape& s = images.inputs.front().shape();
  if (s.size() != 3 || images.labels.size() != images.inputs.size()) {
    throw StructuralError("expected labelled [C,H,W] images");
  }
  f.count = static_cast<std::uint32_t>(images.size());
  f.channels = static_cast<std::uint32_t>(s[0]);
  f.height = static_cast<std::uint32_t>(s[1]);
  f.width = static_cast<std::uint32_t>(s[2]);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images.inputs[i].shape() != s) throw StructuralError("image shapes differ");
    for (double v : images.inputs[i].data()) {
      f.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
    f.labels.push_back(static_cast<std::uint32_t>(images.labels[i]));
  }
  return f;
}

ImageFile parse_cifar10_binary(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kPixels = 3 * 32 * 32;
  constexpr std::size_t kRecord = 1 + kPixels;
  if (bytes.empty() || bytes.size() % kRecord != 0) {
    throw ParseError("CIFAR-10 binary size is not a whole number of records",
                     bytes.size() - bytes.size() % kRecord);
  }
  ImageFile f;
  f.count = static_cast<std::uint32_t>(bytes.size() / kRecord);
  f.channels = 3;
  f.height = 32;
  f.width = 32;
  for (std::size_t r = 0; r < f.count; ++r) {
    const std::size_t at = r * kRecord;
    if (bytes[at] > 9) throw ParseError("CIFAR-10 label out of range", at);
    f.labels.push_back(bytes[at]);
    f.pixels.insert(f.pixels.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at + 1),
                    bytes.begin() + static_cast<std::ptrdiff_t>(at + kRecord));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Batching

std::vector<std::vector<std::size_t>> batch_indices(std::size_t items, std::size_t size,
                                                    std::uint64_t seed, bool shuffle) {
  if (size == 0) throw StructuralError("batch size must be at least 1");
  std::vector<std::size_t> order;
  if (shuffle) {
    Rng rng(seed);
    order = rng.permutation(items);
  } else {
    for (std::size_t i = 0; i < items; ++i) order.push_back(i);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t at = 0; at + size <= items; at += size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                     order.begin() + static_cast<std::ptrdiff_t>(at + size));
  }
  return out;
}

Batch make_batch(const DatasetHandle& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw StructuralError("empty batch");
  std::vector<Tensor> xs;
  std::vector<Tensor> ts;
  for (std::size_t i : indices) {
    if (i >= data.size()) throw StructuralError("batch index out of range");
    xs.push_back(data.inputs[i]);
    ts.push_back(data.targets[i]);
  }
  return Batch{stack(xs), stack(ts), indices.size()};
}

std::vector<Batch> batches(const DatasetHandle& data, std::size_t size, std::uint64_t seed,
                           bool shuffle) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(data.size(), size, seed, shuffle)) {
    out.push_back(make_batch(data, idx));
  }
  return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t tensor_checksum(const Tensor& t) {
  std::vector<std::uint8_t> bytes;
  auto put = [&](std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) bytes.push_back(static_cast<std::uint8_t>(v >> s));
  };
  for (std::size_t e : t.shape()) put(e);
  for (double v : t.data()) put(std::bit_cast<std::uint64_t>(v));
  return fnv1a64(bytes);
}

}  // namespace pcg
