// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcgraph/config.hpp"
#include "pcgraph/csv.hpp"
#include "pcgraph/data.hpp"
#include "pcgraph/graph.hpp"
#include "pcgraph/pcengine.hpp"

namespace pcg {

/// A command's metrics plus its verdict. `failures` names every check that
/// did not pass; the process exits nonzero iff it is nonempty.
struct RunResult {
  CsvTable table;
  std::vector<std::string> failures;
  bool passed() const noexcept { return failures.empty(); }
};

/// Columns: eta_v, iteration, status, mean_abs_divergence,
/// log_mean_abs_divergence, v0_pc_grad, v0_ad_grad, v0_rel_error,
/// free_energy[, wall_ms]. Each η_v runs exactly `iters` Jacobi steps on the
/// scalar test graph; iteration 0 is the initial state. A non-finite value
/// ends that η_v with a `non_finite` row.
RunResult run_scalar_test(const ExperimentConfig& cfg);

/// Columns: record, model, step, name, rel_error, mean_abs, log_mean_abs,
/// tolerance, pass[, wall_ms].
///
/// `vertex`/`param` records compare equilibrium errors and pre-clip weight
/// updates with reverse_ad per layer (step = inference iterations used).
/// The CNN gets a second set of records at the cnn_iters budget against
/// cnn_tolerance. `train` records follow the divergence of trend_model over
/// train_steps weight updates; the closing `trend` record holds the fitted
/// slope of log mean divergence (rel_error), its standard error (mean_abs)
/// and the band (tolerance). The trend passes iff slope − band·stderr ≤ 0.
RunResult run_gradcheck(const ExperimentConfig& cfg);

/// Columns: length, iterations, eta_v, mean_vertex_divergence,
/// mean_param_divergence, log_mean_param_divergence, max_relative_vertex,
/// max_relative_param, free_energy[, wall_ms].
///
/// One LSTM (cfg.model with kind lstm) and one parameter set are evaluated
/// at every length, on prefixes of one random sequence. Each length gets
/// `iters` Jacobi steps at eta_v; the longest length is repeated with twice
/// the budget.
RunResult run_seqlen_sweep(const ExperimentConfig& cfg);

struct TrainResult {
  RunResult run;
  ParamSet params;
  std::size_t steps = 0;
  /// Loss and accuracy over the whole training set after the last step.
  double final_loss = 0.0;
  double final_accuracy = 0.0;
};

/// Columns: record, step, epoch, method, loss, accuracy, inference_iters,
/// free_energy[, wall_ms]. `step` records carry the batch loss before that
/// step's update; the `final` record evaluates the whole training set.
///
/// Batches follow a seeded per-epoch permutation, so step k always sees the
/// same batch. Writes a checkpoint (parameters plus meta.step) when
/// cfg.checkpoint is set and continues from cfg.resume when that is set.
/// Throws NumericError naming the step on a non-finite loss.
TrainResult run_train(const ExperimentConfig& cfg);

/// The dataset run_train would use, and the model spec adjusted to it
/// (input and output sizes for text and names data).
struct TrainingData {
  DatasetHandle data;
  ModelSpec spec;
};
TrainingData training_data(const ExperimentConfig& cfg);

/// Loss gradient estimate for one batch: reverse_ad for backprop, the
/// relaxed PC state for pc. With `precisions` the episode is precision
/// weighted, and when cfg.eta_sigma > 0 and inference converged the updated
/// precisions are returned.
struct StepEstimate {
  std::vector<Tensor> param_grads;
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t inference_iters = 0;
  double free_energy = 0.0;
  std::optional<PrecisionSet> precisions;
};
StepEstimate estimate_step(const ExperimentConfig& cfg, const ComputationGraph& g,
                           const ModelSpec& spec, const ParamSet& params, const Batch& batch,
                           const std::optional<PrecisionSet>& precisions = std::nullopt);

/// θ − η·clip(g, lo, hi) per parameter.
ParamSet apply_update(const ParamSet& params, const std::vector<Tensor>& grads, double eta,
                      double lo, double hi);

/// Fraction of samples (or of loss blocks, for per-step outputs) whose
/// argmax matches the target's.
double accuracy(const Tensor& predictions, const Tensor& targets, std::size_t block = 0);

/// Least-squares slope of ys against 0, 1, 2, ... and its standard error.
struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
};
SlopeFit fit_slope(const std::vector<double>& ys);

/// `cifar10-bin` converts CIFAR-10 binary batches; `synthetic` writes the
/// seeded synthetic classification set described by cfg. Returns the file.
ImageFile convert_dataset(const std::string& format, const std::string& input,
                          const std::string& output, const ExperimentConfig& cfg);

}  // namespace pcg
