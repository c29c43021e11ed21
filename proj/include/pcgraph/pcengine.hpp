// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcgraph/autodiff.hpp"
#include "pcgraph/graph.hpp"
#include "pcgraph/tensor.hpp"

namespace pcg {

enum class VertexRole { input, internal, output };

/// A validated graph together with one error unit per vertex.
class AugmentedGraph {
 public:
  const ComputationGraph& graph() const noexcept { return *graph_; }
  VertexRole role(VertexId id) const { return roles_.at(id.index); }
  /// Shape of the error unit attached to each vertex.
  const Shape& error_shape(VertexId id) const { return graph_->vertex(id).shape; }
  std::size_t error_units() const noexcept { return roles_.size(); }

 private:
  friend AugmentedGraph augment(const ComputationGraph& g);
  const ComputationGraph* graph_ = nullptr;
  std::vector<VertexRole> roles_;
};

/// Validates `g` (throws StructuralError) and attaches error units. The graph
/// must outlive the handle and every state built from it.
AugmentedGraph augment(const ComputationGraph& g);

/// One inverse covariance per vertex, [n, n] with n the vertex element count.
using PrecisionSet = std::vector<Tensor>;
PrecisionSet identity_precisions(const ComputationGraph& g);

enum class Schedule { jacobi };

struct InferenceSettings {
  double eta_v = 0.1;
  std::size_t max_iters = 100;
  double tolerance = 1e-8;
  Schedule schedule = Schedule::jacobi;
};
void require_valid(const InferenceSettings& s);

/// Per-episode quadruple (v, v̂, ε, Σ⁻¹). All tensors carry a leading batch
/// axis except the precisions, which are shared by the batch.
struct AugmentedState {
  const AugmentedGraph* handle = nullptr;
  ParamSet params;
  std::vector<Tensor> values;
  std::vector<Tensor> predictions;
  std::vector<Tensor> errors;
  std::optional<PrecisionSet> precisions;
  Tensor targets;
  std::size_t batch = 0;
  std::size_t iteration = 0;
  bool converged = false;

  /// Frozen feedforward values split per sample, [sample][vertex]. Every
  /// local Jacobian is evaluated here.
  std::vector<std::vector<Tensor>> frozen;

  const ComputationGraph& graph() const { return handle->graph(); }
};

/// Runs the feedforward sweep, sets v = v̂ everywhere and clamps the output.
///
/// The output error unit holds −∂ℓ/∂v̂_L: T − v̂_L for MSE and
/// T − softmax(v̂_L)·ΣT for cross-entropy. Passing `precisions` enables the
/// precision-weighted free energy.
AugmentedState init_episode(const AugmentedGraph& handle, ParamSet params,
                            std::span<const Tensor> inputs, const Tensor& targets,
                            std::optional<PrecisionSet> precisions = std::nullopt);

/// F = ½ Σᵢ Σ_b εᵢᵀ Σᵢ⁻¹ εᵢ, minus ½·B·Σᵢ ln det Σᵢ⁻¹ when precisions are
/// enabled. Input vertices carry no error and do not contribute.
double free_energy(const AugmentedState& state);

/// Value change a Jacobi step would apply, per vertex (zero for clamped
/// vertices). Reads only the current iterate. `order`, when given, is the
/// sequence in which vertex updates are computed; it must list every vertex
/// once and cannot change the result.
std::vector<Tensor> proposed_step(const AugmentedState& state, double eta_v,
                                  std::span<const VertexId> order = {});

/// One synchronous step; returns the max-norm of the applied change.
double inference_step(AugmentedState& state, const InferenceSettings& settings,
                      std::span<const VertexId> order = {});

struct RelaxReport {
  std::size_t iterations = 0;
  double final_delta = 0.0;
  double final_free_energy = 0.0;
  bool converged = false;
};

/// Called after every applied step with the step's max-norm change.
using RelaxObserver = std::function<void(const AugmentedState&, double delta)>;

/// Steps until the proposed change is within tolerance (the step is then not
/// applied) or max_iters steps have been applied.
RelaxReport relax(AugmentedState& state, const InferenceSettings& settings,
                  const RelaxObserver& observer = nullptr);

/// Σⱼ (∂v̂ⱼ/∂vᵢ)ᵀ Σⱼ⁻¹εⱼ for every vertex, batched.
std::vector<Tensor> backward_messages(const AugmentedState& state);

/// The PC estimate of the loss gradients in the current state, without any
/// convergence requirement. Vertices: −εᵢ, except inputs, which carry no
/// error unit and report −(backward message). Parameters: the batch mean of
/// −(∂v̂ᵢ/∂θ)ᵀ Σᵢ⁻¹εᵢ, i.e. ∂F/∂θ.
GradientSet current_estimate(const AugmentedState& state);

/// current_estimate for a converged state; throws StateError otherwise.
GradientSet equilibrium_errors(const AugmentedState& state);

struct WeightUpdateSettings {
  double eta_theta = 1e-3;
  double clamp_lo = -50.0;
  double clamp_hi = 50.0;
  /// Fixed-budget training updates weights after max_iters whether or not
  /// the tolerance was met.
  bool require_converged = true;
};

/// θ ← θ − η_θ·clip(ĝ, lo, hi) with ĝ from current_estimate.
ParamSet weight_update(const AugmentedState& state, const WeightUpdateSettings& settings);

/// ∂F/∂Σ for one vertex: ½(B·Σ⁻¹ − Σ⁻¹(Σ_b ε_b ε_bᵀ)Σ⁻¹). `errors` is
/// [B, n] (or any batched shape, flattened per sample).
Tensor precision_gradient(const Tensor& sigma, const Tensor& errors);

/// Precision-weighted free energy of one vertex as a function of Σ:
/// ½Σ_b εᵀΣ⁻¹ε + ½·B·ln det Σ.
double precision_free_energy(const Tensor& sigma, const Tensor& errors);

/// ln det of a symmetric positive definite matrix; throws NumericError when
/// the matrix is not positive definite.
double log_det_spd(const Tensor& m);

struct PrecisionReport {
  PrecisionSet precisions;
  /// Vertices whose covariance needed eigenvalue clamping.
  std::vector<std::size_t> projected;
  std::vector<std::string> warnings;
};

/// One Euler step Σ ← Σ − η_Σ·∂F/∂Σ per non-input vertex, then
/// symmetrization and eigenvalues clamped to ≥ 1e-6. Returns the new
/// precisions Σ⁻¹; the state is left unchanged.
PrecisionReport precision_update(const AugmentedState& state, double eta_sigma);

struct DivergenceEntry {
  std::string name;
  bool is_param = false;
  double mean_abs = 0.0;
  double log_mean_abs = 0.0;  // −inf when mean_abs is 0
  double relative = 0.0;
};

struct DivergenceReport {
  std::vector<DivergenceEntry> entries;
  double mean_vertex = 0.0;
  double mean_param = 0.0;
  double max_relative_vertex = 0.0;
  double max_relative_param = 0.0;
};

struct DivergenceOptions {
  bool include_output = false;
  bool include_inputs = true;
};

/// Mean absolute difference per vertex and per parameter, with natural logs
/// and the global means over vertices and over parameters.
DivergenceReport divergence(const ComputationGraph& g, const GradientSet& pc,
                            const GradientSet& ad, const DivergenceOptions& options = {});

}  // namespace pcg
