// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcgraph/graph.hpp"
#include "pcgraph/tensor.hpp"

namespace pcg {

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// PCCK layout: "PCCK", u32 version (1), u32 tensor count; per tensor u32
// name length, UTF-8 name, u32 rank, rank × u32 extents, then the values as
// little-endian IEEE-754 doubles in row-major order.
std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
/// Throws FormatError on bad magic, version or truncation.
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

/// Parameters labelled with the graph's declared names.
std::vector<NamedTensor> named_params(const ComputationGraph& g, const ParamSet& params);
/// Picks the graph's parameters out of a checkpoint by name; extra entries
/// are ignored. Missing names or wrong shapes raise FormatError.
ParamSet params_from_checkpoint(const ComputationGraph& g,
                                std::span<const NamedTensor> tensors);

}  // namespace pcg
