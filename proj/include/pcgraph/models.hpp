// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcgraph/graph.hpp"
#include "pcgraph/pcengine.hpp"
#include "pcgraph/tensor.hpp"

namespace pcg {

enum class ModelKind { mlp, cnn, rnn, lstm };
std::string to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(const std::string& s);

/// Which timesteps of a recurrent model feed the loss.
enum class SequenceOutput {
  every_step,  // outputs of all timesteps, concatenated in time order
  last,        // the final timestep only
};

/// One record covers every architecture; each builder reads its own fields.
struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  Loss loss = Loss::mse;

  // mlp: layer widths including input and output.
  std::vector<std::size_t> layers{4, 8, 8, 2};
  Activation hidden_activation = Activation::tanh;
  Activation output_activation = Activation::identity;

  // cnn: [channels, height, width] input, two conv layers with a 2x2 pool
  // between them, then dense layers ending at the class count.
  std::size_t channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t conv1_filters = 2;
  std::size_t conv1_kernel = 3;
  std::size_t conv2_filters = 4;
  std::size_t conv2_kernel = 2;
  std::vector<std::size_t> dense{32, 16, 4};

  // rnn / lstm
  std::size_t input_size = 4;
  std::size_t hidden_size = 8;
  std::size_t output_size = 4;
  std::size_t seq_len = 10;
  SequenceOutput sequence_output = SequenceOutput::every_step;
  /// LSTM readout y = head(θ_y v₁₀). Sigmoid is the printed cell; identity
  /// feeds a softmax cross-entropy loss during training.
  Activation lstm_head = Activation::sigmoid;
};

/// Throws StructuralError naming the offending field.
void require_valid(const ModelSpec& spec);

ComputationGraph build_mlp(const ModelSpec& spec);
ComputationGraph build_cnn(const ModelSpec& spec);
ComputationGraph unroll_rnn(const ModelSpec& spec);
ComputationGraph build_lstm(const ModelSpec& spec);
ComputationGraph build_model(const ModelSpec& spec);

/// Shape of one input sample ([features], [C,H,W] or [seq_len, input_size]).
Shape sample_shape(const ModelSpec& spec);
/// Element count of one target sample.
std::size_t target_size(const ModelSpec& spec);

/// Turns a batch of samples (leading batch axis, then sample_shape) into the
/// graph's input list. Recurrent models get zero initial states first.
std::vector<Tensor> model_inputs(const ModelSpec& spec, const Tensor& batch);

/// Glorot-uniform initialization. Parameter k draws from its own stream
/// derive_seed(seed, k), so graphs that declare the same leading parameters
/// (one LSTM unrolled to different lengths) share their values.
ParamSet init_params(const ComputationGraph& g, std::uint64_t seed);

/// v_L = tan(√(θ·v₀)) + sin(v₀²) with scalar input v₀ and parameter θ.
ComputationGraph build_scalar_test_graph();

/// Plain rolled-forward LSTM on one sequence [seq_len, input_size], written
/// directly against the parameter tensors of build_lstm. Returns the model
/// output in the graph's layout.
Tensor lstm_reference_forward(const ModelSpec& spec, const ParamSet& params,
                              const Tensor& sequence);

/// Layer-by-layer inference for graphs from build_cnn: each layer moves by
/// η(ε̂_{l+1} − ε_l), where ε̂_{l+1} is the error of the layer above carried
/// back through that layer's own backward operation (transposed weights,
/// backwards convolution, or unpooling).
double cnn_layerwise_step(AugmentedState& state, double eta_v);

}  // namespace pcg
