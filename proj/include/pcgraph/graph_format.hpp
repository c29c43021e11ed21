// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <string>
#include <string_view>

#include "pcgraph/graph.hpp"

namespace pcg {

/// Parses the line-oriented graph description format (docs/graph_format.md).
/// Syntax errors raise ParseError with the byte offset of the offending
/// token; the returned graph is validated with require_valid.
ComputationGraph parse_graph(std::string_view text);
ComputationGraph load_graph(const std::string& path);

/// Writes `g` in the same format; parse_graph(format_graph(g)) reproduces it.
std::string format_graph(const ComputationGraph& g);

}  // namespace pcg
