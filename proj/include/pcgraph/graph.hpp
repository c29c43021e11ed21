// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcgraph/tensor.hpp"

namespace pcg {

struct VertexId {
  std::size_t index = 0;
  friend auto operator<=>(const VertexId&, const VertexId&) = default;
};

struct ParamId {
  std::size_t index = 0;
  friend auto operator<=>(const ParamId&, const ParamId&) = default;
};

enum class EdgeKind {
  dense,         // act(sum_k theta_k * flatten(parent_k))
  conv2d,        // act(valid cross-correlation), parent [C,H,W], theta [F,C,k,k]
  maxpool2x2,    // [C,H,W] -> [C,H/2,W/2]
  nonlinearity,  // act(parent)
  add,
  hadamard,
  concat,        // flattened parents joined end to end
  slice,         // flattened parent [offset, offset + length)
  scalar_fn,     // elementwise tan/sin/sqrt/square/scale
};

enum class Activation { identity, tanh, sigmoid, relu };
enum class ScalarFn { tan, sin, sqrt, square, scale };
enum class Loss { mse, cross_entropy };

std::string to_string(EdgeKind kind);
std::string to_string(Activation act);
std::string to_string(ScalarFn fn);
std::string to_string(Loss loss);
std::optional<EdgeKind> parse_edge_kind(const std::string& s);
std::optional<Activation> parse_activation(const std::string& s);
std::optional<ScalarFn> parse_scalar_fn(const std::string& s);
std::optional<Loss> parse_loss(const std::string& s);

struct EdgeFunction {
  EdgeKind kind = EdgeKind::nonlinearity;
  std::vector<VertexId> parents;
  /// dense: one parameter per parent; conv2d: exactly one; otherwise none.
  std::vector<ParamId> params;
  Activation activation = Activation::identity;
  ScalarFn fn = ScalarFn::scale;
  double scale = 1.0;
  std::size_t offset = 0;
  std::size_t length = 0;

  /// Affine in its parameters followed by an elementwise nonlinearity.
  bool parameter_linear() const noexcept {
    return kind == EdgeKind::dense || kind == EdgeKind::conv2d;
  }
};

struct Vertex {
  std::string name;
  Shape shape;
  /// Empty for input vertices.
  std::optional<EdgeFunction> edge;

  bool is_input() const noexcept { return !edge.has_value(); }
};

struct ParamDecl {
  std::string name;
  Shape shape;
};

/// One (child, parent-slot) pair: `child`'s edge reads this vertex as its
/// `slot`-th parent.
struct ChildSlot {
  VertexId child;
  std::size_t slot = 0;
};

using ParamSet = std::vector<Tensor>;

/// Directed acyclic computation graph with one output vertex and a loss.
///
/// Vertex indices are expected to be a topological order; `validate` reports
/// graphs that break this or any other structural rule. Parameter values are
/// not part of the graph: they travel separately as a ParamSet aligned with
/// `params()`.
class ComputationGraph {
 public:
  ComputationGraph() = default;
  /// `loss_block` > 0 applies the loss to consecutive blocks of that many
  /// output elements independently (one softmax per timestep, for example).
  ComputationGraph(std::vector<Vertex> vertices, std::vector<ParamDecl> params,
                   std::optional<VertexId> output, Loss loss,
                   std::size_t loss_block = 0);

  std::size_t size() const noexcept { return vertices_.size(); }
  const Vertex& vertex(VertexId id) const { return vertices_.at(id.index); }
  std::span<const Vertex> vertices() const noexcept { return vertices_; }
  std::span<const ParamDecl> params() const noexcept { return params_; }
  const ParamDecl& param(ParamId id) const { return params_.at(id.index); }
  std::optional<VertexId> output() const noexcept { return output_; }
  VertexId output_vertex() const;
  Loss loss() const noexcept { return loss_; }
  std::size_t loss_block() const noexcept { return loss_block_; }

  /// Input vertices in index order; forward_sweep takes inputs in this order.
  std::span<const VertexId> inputs() const noexcept { return inputs_; }
  /// Children of `id`, sorted by child index then slot.
  std::span<const ChildSlot> children(VertexId id) const {
    return children_.at(id.index);
  }

  std::optional<VertexId> find_vertex(const std::string& name) const;
  std::optional<ParamId> find_param(const std::string& name) const;

 private:
  std::vector<Vertex> vertices_;
  std::vector<ParamDecl> params_;
  std::optional<VertexId> output_;
  Loss loss_ = Loss::mse;
  std::size_t loss_block_ = 0;
  std::vector<VertexId> inputs_;
  std::vector<std::vector<ChildSlot>> children_;
};

/// Incremental construction helper. Output shapes are inferred from the
/// parents, so graphs built this way validate unless a parameter shape is
/// inconsistent.
class GraphBuilder {
 public:
  VertexId input(std::string name, Shape shape);
  ParamId param(std::string name, Shape shape);

  VertexId dense(std::string name, std::vector<VertexId> parents,
                 std::vector<ParamId> params, Activation act);
  VertexId conv2d(std::string name, VertexId parent, ParamId kernel,
                  Activation act);
  VertexId maxpool2x2(std::string name, VertexId parent);
  VertexId nonlinearity(std::string name, VertexId parent, Activation act);
  VertexId add(std::string name, std::vector<VertexId> parents);
  VertexId hadamard(std::string name, VertexId a, VertexId b);
  VertexId concat(std::string name, std::vector<VertexId> parents);
  VertexId slice(std::string name, VertexId parent, std::size_t offset,
                 std::size_t length);
  VertexId scalar_fn(std::string name, VertexId parent, ScalarFn fn,
                     double scale = 1.0);

  /// Adds a vertex with an explicit edge; the shape is inferred.
  VertexId add_vertex(std::string name, EdgeFunction edge);

  const Shape& shape(VertexId id) const { return vertices_.at(id.index).shape; }
  const Shape& param_shape(ParamId id) const {
    return params_.at(id.index).shape;
  }

  ComputationGraph build(VertexId output, Loss loss, std::size_t loss_block = 0) &&;

 private:
  std::vector<Vertex> vertices_;
  std::vector<ParamDecl> params_;
};

/// Output shape implied by an edge and its operand shapes, or nullopt plus
/// a reason when they are inconsistent.
struct ShapeInference {
  std::optional<Shape> shape;
  std::string problem;
};
ShapeInference infer_shape(const EdgeFunction& edge,
                           std::span<const Shape> parent_shapes,
                           std::span<const Shape> param_shapes);

struct ValidationReport {
  std::vector<std::string> problems;
  bool ok() const noexcept { return problems.empty(); }
  std::string summary() const;
};

/// Checks acyclicity, topological indexing, shape propagation, parameter
/// shapes, parent/child symmetry and the output rules. Never throws.
ValidationReport validate(const ComputationGraph& g);

/// Throws StructuralError with the report summary when validation fails.
void require_valid(const ComputationGraph& g);

/// Checks a ParamSet against the graph's declarations.
void require_params(const ComputationGraph& g, const ParamSet& params);

/// Feedforward sweep over a batch. `inputs` follows `g.inputs()` order and
/// each tensor carries a leading batch axis. Returns one batched prediction
/// per vertex; input vertices carry their given values.
std::vector<Tensor> forward_sweep(const ComputationGraph& g,
                                  const ParamSet& params,
                                  std::span<const Tensor> inputs);

/// As forward_sweep, but the listed vertices take the given batched values
/// instead of evaluating their edges. Used for perturbation studies.
std::vector<Tensor> forward_sweep_with_overrides(
    const ComputationGraph& g, const ParamSet& params,
    std::span<const Tensor> inputs, const std::map<std::size_t, Tensor>& overrides);

std::size_t batch_size_of(const ComputationGraph& g,
                          std::span<const Tensor> inputs);

/// Loss of a single sample: ½(T−ŷ)ᵀ(T−ŷ) for MSE, softmax cross-entropy
/// otherwise. With block > 0 the cross-entropy is summed over independent
/// blocks of `block` elements; MSE is unaffected by blocking.
double loss_value(const ComputationGraph& g, const Tensor& prediction,
                  const Tensor& target);
double loss_value(Loss loss, const Tensor& prediction, const Tensor& target,
                  std::size_t block = 0);

/// Per-sample losses of a batch.
std::vector<double> sample_losses(Loss loss, const Tensor& predictions,
                                  const Tensor& targets, std::size_t block = 0);
/// Mean of the per-sample losses.
double batch_loss(Loss loss, const Tensor& predictions, const Tensor& targets,
                  std::size_t block = 0);
double batch_loss(const ComputationGraph& g, const Tensor& predictions,
                  const Tensor& targets);

/// Negative loss gradient with respect to the prediction, per sample
/// (batched). For MSE this is T − ŷ; for cross-entropy T − softmax(ŷ)·ΣT
/// per block.
Tensor output_error(Loss loss, const Tensor& predictions, const Tensor& targets,
                    std::size_t block = 0);
Tensor output_error(const ComputationGraph& g, const Tensor& predictions,
                    const Tensor& targets);

Tensor softmax(const Tensor& logits);

}  // namespace pcg
