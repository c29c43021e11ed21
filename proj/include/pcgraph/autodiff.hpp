// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <span>
#include <variant>
#include <vector>

#include "pcgraph/graph.hpp"
#include "pcgraph/tensor.hpp"

namespace pcg {

/// Gradients of the loss.
///
/// by_vertex[i] is batched: row b holds ∂ℓ_b/∂v̂ᵢ for sample b's own loss.
/// by_param[k] is the gradient of the batch-mean loss.
struct GradientSet {
  std::vector<Tensor> by_vertex;
  std::vector<Tensor> by_param;
};

/// Reverse-mode differentiation. Contributions from several children are
/// summed in ascending child order, so the result does not depend on the
/// order in which vertices are visited.
GradientSet reverse_ad(const ComputationGraph& g, const ParamSet& params,
                       std::span<const Tensor> inputs, const Tensor& targets);

/// Same, reusing predictions from an earlier forward_sweep.
GradientSet reverse_ad_from(const ComputationGraph& g, const ParamSet& params,
                            std::span<const Tensor> predictions,
                            const Tensor& targets);

using Wrt = std::variant<VertexId, ParamId>;

/// Central differences (L(x+h) − L(x−h)) / 2h, one coordinate at a time.
///
/// For a vertex the perturbation replaces v̂ᵢ and everything downstream is
/// re-evaluated; the result is batched like GradientSet::by_vertex. For a
/// parameter the batch-mean loss is differentiated.
Tensor finite_diff(const ComputationGraph& g, const ParamSet& params,
                   std::span<const Tensor> inputs, const Tensor& targets, Wrt wrt,
                   double step = 1e-6);

/// ‖a − b‖∞ / max(‖b‖∞, 1e-12).
double relative_error(const Tensor& a, const Tensor& b);

}  // namespace pcg
