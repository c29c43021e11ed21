// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <span>
#include <vector>

#include "pcgraph/graph.hpp"
#include "pcgraph/tensor.hpp"

namespace pcg {

Tensor activate(Activation act, const Tensor& pre);
/// f'(pre), elementwise. relu'(0) is taken as 0.
Tensor activation_derivative(Activation act, const Tensor& pre);

/// Evaluates one edge on a single sample. Parent and parameter tensors are
/// passed in the edge's declared order.
Tensor edge_forward(const EdgeFunction& edge,
                    std::span<const Tensor* const> parents,
                    std::span<const Tensor* const> params);

struct VjpResult {
  /// (∂v̂/∂parent_k)ᵀ · upstream, shaped like parent k.
  std::vector<Tensor> parents;
  /// (∂v̂/∂θ_k)ᵀ · upstream, shaped like parameter k. Empty when not
  /// requested.
  std::vector<Tensor> params;
};

/// Exact local vector–Jacobian products of one edge on a single sample,
/// evaluated at the given parent values. For the parameter-linear kinds the
/// parameter part is the outer product (upstream ⊙ f′(θx)) · xᵀ.
VjpResult vjp(const EdgeFunction& edge, std::span<const Tensor* const> parents,
              std::span<const Tensor* const> params, const Tensor& upstream,
              bool want_params = true);

}  // namespace pcg
