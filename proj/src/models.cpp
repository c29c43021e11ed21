// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/models.hpp"

#include <cmath>

#include "pcgraph/conv.hpp"
#include "pcgraph/edges.hpp"
#include "pcgraph/errors.hpp"
#include "pcgraph/random.hpp"

namespace pcg {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::mlp:
      return "mlp";
    case ModelKind::cnn:
      return "cnn";
    case ModelKind::rnn:
      return "rnn";
    case ModelKind::lstm:
      return "lstm";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(const std::string& s) {
  for (ModelKind k : {ModelKind::mlp, ModelKind::cnn, ModelKind::rnn, ModelKind::lstm}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

void require_positive(std::size_t v, const char* field) {
  if (v == 0) throw StructuralError(std::string("model field '") + field + "' must be positive");
}

std::string step_name(const char* base, std::size_t t) {
  return base + std::to_string(t);
}

std::size_t loss_block_for(const ModelSpec& spec) {
  return spec.loss == Loss::cross_entropy ? spec.output_size : 0;
}

}  // namespace

void require_valid(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::mlp:
      if (spec.layers.size() < 3) {
        throw StructuralError("model field 'layers' needs input, at least one hidden and an output width");
      }
      for (std::size_t w : spec.layers) require_positive(w, "layers");
      break;
    case ModelKind::cnn:
      require_positive(spec.channels, "channels");
      require_positive(spec.height, "height");
      require_positive(spec.width, "width");
      require_positive(spec.conv1_filters, "conv1_filters");
      require_positive(spec.conv1_kernel, "conv1_kernel");
      require_positive(spec.conv2_filters, "conv2_filters");
      require_positive(spec.conv2_kernel, "conv2_kernel");
      if (spec.dense.empty()) throw StructuralError("model field 'dense' must list at least one layer");
      for (std::size_t w : spec.dense) require_positive(w, "dense");
      break;
    case ModelKind::rnn:
    case ModelKind::lstm:
      require_positive(spec.input_size, "input_size");
      require_positive(spec.hidden_size, "hidden_size");
      require_positive(spec.output_size, "output_size");
      require_positive(spec.seq_len, "seq_len");
      break;
  }
}

ComputationGraph build_mlp(const ModelSpec& spec) {
  require_valid(spec);
  GraphBuilder b;
  VertexId v = b.input("x", Shape{spec.layers[0]});
  const std::size_t n = spec.layers.size() - 1;
  for (std::size_t l = 0; l < n; ++l) {
    const ParamId w = b.param(step_name("W", l + 1), Shape{spec.layers[l + 1], spec.layers[l]});
    const bool last = l + 1 == n;
    v = b.dense(last ? "out" : step_name("h", l + 1), {v}, {w},
                last ? spec.output_activation : spec.hidden_activation);
  }
  return std::move(b).build(v, spec.loss);
}

ComputationGraph build_cnn(const ModelSpec& spec) {
  require_valid(spec);
  GraphBuilder b;
  const VertexId image = b.input("image", Shape{spec.channels, spec.height, spec.width});
  const ParamId k1 = b.param("conv1", Shape{spec.conv1_filters, spec.channels,
                                            spec.conv1_kernel, spec.conv1_kernel});
  const VertexId c1 = b.conv2d("conv1", image, k1, spec.hidden_activation);
  const VertexId p1 = b.maxpool2x2("pool1", c1);
  const ParamId k2 = b.param("conv2", Shape{spec.conv2_filters, spec.conv1_filters,
                                            spec.conv2_kernel, spec.conv2_kernel});
  VertexId v = b.conv2d("conv2", p1, k2, spec.hidden_activation);
  for (std::size_t l = 0; l < spec.dense.size(); ++l) {
    const bool last = l + 1 == spec.dense.size();
    const ParamId w =
        b.param(step_name("fc", l + 1), Shape{spec.dense[l], shape_numel(b.shape(v))});
    v = b.dense(last ? "out" : step_name("fc", l + 1), {v}, {w},
                last ? spec.output_activation : spec.hidden_activation);
  }
  return std::move(b).build(v, spec.loss);
}

ComputationGraph unroll_rnn(const ModelSpec& spec) {
  require_valid(spec);
  GraphBuilder b;
  VertexId h = b.input("h0", Shape{spec.hidden_size});
  std::vector<VertexId> xs;
  for (std::size_t t = 1; t <= spec.seq_len; ++t) {
    xs.push_back(b.input(step_name("x", t), Shape{spec.input_size}));
  }
  const ParamId th = b.param("theta_h", Shape{spec.hidden_size, spec.hidden_size});
  const ParamId tx = b.param("theta_x", Shape{spec.hidden_size, spec.input_size});
  const ParamId ty = b.param("theta_y", Shape{spec.output_size, spec.hidden_size});
  std::vector<VertexId> ys;
  const bool every = spec.sequence_output == SequenceOutput::every_step;
  for (std::size_t t = 1; t <= spec.seq_len; ++t) {
    h = b.dense(step_name("h", t), {h, xs[t - 1]}, {th, tx}, Activation::tanh);
    if (every || t == spec.seq_len) {
      ys.push_back(b.dense(step_name("y", t), {h}, {ty}, Activation::identity));
    }
  }
  const VertexId out = every ? b.concat("y", ys) : ys.back();
  return std::move(b).build(out, spec.loss, loss_block_for(spec));
}

ComputationGraph build_lstm(const ModelSpec& spec) {
  require_valid(spec);
  const std::size_t hs = spec.hidden_size;
  const std::size_t cat = hs + spec.input_size;
  GraphBuilder b;
  VertexId h = b.input("h0", Shape{hs});
  VertexId c = b.input("c0", Shape{hs});
  std::vector<VertexId> xs;
  for (std::size_t t = 1; t <= spec.seq_len; ++t) {
    xs.push_back(b.input(step_name("x", t), Shape{spec.input_size}));
  }
  const ParamId tf = b.param("theta_f", Shape{hs, cat});
  const ParamId ti = b.param("theta_i", Shape{hs, cat});
  const ParamId tc = b.param("theta_c", Shape{hs, cat});
  const ParamId to = b.param("theta_o", Shape{hs, cat});
  const ParamId ty = b.param("theta_y", Shape{spec.output_size, hs});
  std::vector<VertexId> ys;
  const bool every = spec.sequence_output == SequenceOutput::every_step;
  for (std::size_t t = 1; t <= spec.seq_len; ++t) {
    const std::string p = step_name("t", t) + ".";
    const VertexId v1 = b.concat(p + "v1", {h, xs[t - 1]});
    const VertexId v2 = b.dense(p + "v2", {v1}, {tf}, Activation::sigmoid);
    const VertexId v3 = b.hadamard(p + "v3", c, v2);
    const VertexId v4 = b.dense(p + "v4", {v1}, {ti}, Activation::sigmoid);
    const VertexId v5 = b.dense(p + "v5", {v1}, {tc}, Activation::tanh);
    const VertexId v6 = b.hadamard(p + "v6", v4, v5);
    const VertexId v7 = b.add(p + "v7", {v3, v6});
    const VertexId v8 = b.dense(p + "v8", {v1}, {to}, Activation::sigmoid);
    const VertexId v9 = b.nonlinearity(p + "v9", v7, Activation::tanh);
    const VertexId v10 = b.hadamard(p + "v10", v8, v9);
    if (every || t == spec.seq_len) {
      ys.push_back(b.dense(p + "y", {v10}, {ty}, spec.lstm_head));
    }
    c = v7;
    h = v10;
  }
  const VertexId out = every ? b.concat("y", ys) : ys.back();
  return std::move(b).build(out, spec.loss, loss_block_for(spec));
}

ComputationGraph build_model(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::mlp:
      return build_mlp(spec);
    case ModelKind::cnn:
      return build_cnn(spec);
    case ModelKind::rnn:
      return unroll_rnn(spec);
    case ModelKind::lstm:
      return build_lstm(spec);
  }
  throw StructuralError("unknown model kind");
}

Shape sample_shape(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::mlp:
      return Shape{spec.layers.front()};
    case ModelKind::cnn:
      return Shape{spec.channels, spec.height, spec.width};
    case ModelKind::rnn:
    case ModelKind::lstm:
      return Shape{spec.seq_len, spec.input_size};
  }
  throw StructuralError("unknown model kind");
}

std::size_t target_size(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::mlp:
      return spec.layers.back();
    case ModelKind::cnn:
      return spec.dense.back();
    case ModelKind::rnn:
    case ModelKind::lstm:
      return spec.sequence_output == SequenceOutput::every_step
                 ? spec.seq_len * spec.output_size
                 : spec.output_size;
  }
  throw StructuralError("unknown model kind");
}

std::vector<Tensor> model_inputs(const ModelSpec& spec, const Tensor& batch) {
  const Shape item = sample_shape(spec);
  if (batch.rank() != item.size() + 1 ||
      !std::equal(item.begin(), item.end(), batch.shape().begin() + 1)) {
    throw StructuralError("model expects batches of " + shape_to_string(item) + ", got " +
                          shape_to_string(batch.shape()));
  }
  if (spec.kind == ModelKind::mlp || spec.kind == ModelKind::cnn) return {batch};

  const std::size_t n = batch.extent(0);
  std::vector<Tensor> inputs;
  inputs.emplace_back(Shape{n, spec.hidden_size});
  if (spec.kind == ModelKind::lstm) inputs.emplace_back(Shape{n, spec.hidden_size});
  for (std::size_t t = 0; t < spec.seq_len; ++t) {
    Tensor x(Shape{n, spec.input_size});
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < spec.input_size; ++i) {
        x[s * spec.input_size + i] =
            batch[(s * spec.seq_len + t) * spec.input_size + i];
      }
    }
    inputs.push_back(std::move(x));
  }
  return inputs;
}

ParamSet init_params(const ComputationGraph& g, std::uint64_t seed) {
  ParamSet params;
  for (std::size_t k = 0; k < g.params().size(); ++k) {
    const Shape& s = g.params()[k].shape;
    std::size_t fan_in = 1;
    std::size_t fan_out = 1;
    if (s.size() == 2) {
      fan_out = s[0];
      fan_in = s[1];
    } else if (s.size() == 4) {
      fan_out = s[0] * s[2] * s[3];
      fan_in = s[1] * s[2] * s[3];
    } else {
      fan_in = fan_out = shape_numel(s);
    }
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(derive_seed(seed, k));
    params.push_back(rng.uniform_tensor(s, -a, a));
  }
  return params;
}

ComputationGraph build_scalar_test_graph() {
  GraphBuilder b;
  const VertexId v0 = b.input("v0", Shape{1});
  const ParamId theta = b.param("theta", Shape{1, 1});
  const VertexId v1 = b.dense("v1", {v0}, {theta}, Activation::identity);
  const VertexId v2 = b.scalar_fn("v2", v1, ScalarFn::sqrt);
  const VertexId v3 = b.scalar_fn("v3", v2, ScalarFn::tan);
  const VertexId v4 = b.scalar_fn("v4", v0, ScalarFn::square);
  const VertexId v5 = b.scalar_fn("v5", v4, ScalarFn::sin);
  const VertexId out = b.add("vL", {v3, v5});
  return std::move(b).build(out, Loss::mse);
}

Tensor lstm_reference_forward(const ModelSpec& spec, const ParamSet& params,
                              const Tensor& sequence) {
  if (params.size() != 5) throw StructuralError("LSTM reference expects five parameters");
  const std::size_t hs = spec.hidden_size;
  const std::size_t in = spec.input_size;
  if (sequence.shape() != Shape{spec.seq_len, in}) {
    throw StructuralError("sequence must be " + shape_to_string(Shape{spec.seq_len, in}));
  }
  const Tensor& wf = params[0];
  const Tensor& wi = params[1];
  const Tensor& wc = params[2];
  const Tensor& wo = params[3];
  const Tensor& wy = params[4];
  Tensor h(Shape{hs});
  Tensor c(Shape{hs});
  std::vector<double> out;
  for (std::size_t t = 0; t < spec.seq_len; ++t) {
    std::vector<double> joined(h.values());
    for (std::size_t i = 0; i < in; ++i) joined.push_back(sequence[t * in + i]);
    const Tensor x(Shape{hs + in}, std::move(joined));
    const Tensor f = activate(Activation::sigmoid, matvec(wf, x));
    const Tensor ig = activate(Activation::sigmoid, matvec(wi, x));
    const Tensor cand = activate(Activation::tanh, matvec(wc, x));
    const Tensor og = activate(Activation::sigmoid, matvec(wo, x));
    c = c * f + ig * cand;
    h = og * activate(Activation::tanh, c);
    if (spec.sequence_output == SequenceOutput::every_step || t + 1 == spec.seq_len) {
      const Tensor y = activate(spec.lstm_head, matvec(wy, h));
      out.insert(out.end(), y.values().begin(), y.values().end());
    }
  }
  const std::size_t n = out.size();
  return Tensor(Shape{n}, std::move(out));
}

double cnn_layerwise_step(AugmentedState& s, double eta_v) {
  const ComputationGraph& g = s.graph();
  if (s.precisions) throw StateError("layerwise CNN inference assumes identity precisions");
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t nc = g.children(VertexId{i}).size();
    if (g.vertex(VertexId{i}).is_input() ? nc != 1 : (i + 1 < g.size() && nc != 1)) {
      throw StructuralError("layerwise inference needs a chain of layers");
    }
  }

  std::vector<Tensor> delta;
  for (const Tensor& v : s.values) delta.emplace_back(v.shape());
  for (std::size_t b = 0; b < s.batch; ++b) {
    const auto& frozen = s.frozen[b];
    for (std::size_t l = 0; l + 1 < g.size(); ++l) {
      if (s.handle->role(VertexId{l}) != VertexRole::internal) continue;
      const Vertex& above = g.vertex(VertexId{l + 1});
      const EdgeFunction& e = *above.edge;
      const Tensor& below = frozen[l];
      const Tensor err_above = batch_item(s.errors[l + 1], b);
      const Tensor err_here = batch_item(s.errors[l], b);

      // ε̂_{l+1}: the error of the layer above mapped back to this layer.
      Tensor carried;
      switch (e.kind) {
        case EdgeKind::conv2d: {
          const Tensor& kernels = s.params[e.params[0].index];
          const Tensor pre = conv_forward(below, kernels);
          const Tensor local = err_above.reshape(pre.shape()) *
                               activation_derivative(e.activation, pre);
          carried = conv_backward_error(local, kernels);
          break;
        }
        case EdgeKind::maxpool2x2: {
          const PoolResult pool = maxpool2x2_forward(below);
          carried = maxpool2x2_backward(err_above, pool.argmax, below.shape());
          break;
        }
        case EdgeKind::dense: {
          const Tensor& w = s.params[e.params[0].index];
          const Tensor pre = matvec(w, below);
          const Tensor local = err_above.flatten() * activation_derivative(e.activation, pre);
          carried = matvec_transposed(w, local).reshape(below.shape());
          break;
        }
        default:
          throw StructuralError("layerwise inference does not handle " + to_string(e.kind) +
                                " layers");
      }
      Tensor d = Tensor(below.shape()) + carried;
      d -= err_here;
      set_batch_item(delta[l], b, eta_v * d);
    }
  }

  double change = 0.0;
  for (std::size_t l = 0; l < g.size(); ++l) {
    if (s.handle->role(VertexId{l}) != VertexRole::internal) continue;
    s.values[l] += delta[l];
    s.errors[l] = s.values[l] - s.predictions[l];
    change = std::max(change, max_abs(delta[l]));
  }
  ++s.iteration;
  return change;
}

}  // namespace pcg
