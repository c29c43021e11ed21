// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "pcgraph/errors.hpp"

namespace pcg {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - at_ < n) {
      throw FormatError(std::string("checkpoint truncated in ") + what + " at byte " +
                        std::to_string(at_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[at_ + k]) << (8 * k);
    at_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[at_ + k]) << (8 * k);
    at_ += 8;
    return v;
  }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + at_), n);
    at_ += n;
    return s;
  }
  bool done() const { return at_ == bytes_.size(); }
  std::size_t offset() const { return at_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t at_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors) {
  std::vector<std::uint8_t> out{'P', 'C', 'C', 'K'};
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t e : t.value.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.text(4, "magic") != "PCCK") throw FormatError("bad checkpoint magic");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.text(r.u32("name length"), "name");
    const std::uint32_t rank = r.u32("rank");
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.u32("extents"));
    const std::size_t n = shape_numel(shape);
    r.need(n * 8, "tensor data");
    std::vector<double> values(n);
    for (double& v : values) v = std::bit_cast<double>(r.u64("tensor data"));
    t.value = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(t));
  }
  if (!r.done()) {
    throw FormatError("trailing bytes after checkpoint at byte " + std::to_string(r.offset()));
  }
  return out;
}

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing checkpoint '" + path + "'");
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  return decode_checkpoint(bytes);
}

std::vector<NamedTensor> named_params(const ComputationGraph& g, const ParamSet& params) {
  require_params(g, params);
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < params.size(); ++k) out.push_back({g.params()[k].name, params[k]});
  return out;
}

ParamSet params_from_checkpoint(const ComputationGraph& g,
                                std::span<const NamedTensor> tensors) {
  ParamSet params;
  for (const ParamDecl& decl : g.params()) {
    const NamedTensor* found = nullptr;
    for (const NamedTensor& t : tensors) {
      if (t.name == decl.name) found = &t;
    }
    if (!found) throw FormatError("checkpoint has no tensor '" + decl.name + "'");
    if (found->value.shape() != decl.shape) {
      throw FormatError("checkpoint tensor '" + decl.name + "' has shape " +
                        shape_to_string(found->value.shape()) + ", expected " +
                        shape_to_string(decl.shape));
    }
    params.push_back(found->value);
  }
  return params;
}

}  // namespace pcg
