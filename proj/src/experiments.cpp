// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "pcgraph/autodiff.hpp"
#include "pcgraph/checkpoint.hpp"
#include "pcgraph/errors.hpp"
#include "pcgraph/models.hpp"
#include "pcgraph/random.hpp"

namespace pcg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<std::string> with_timing(std::vector<std::string> header, bool timing) {
  if (timing) header.emplace_back("wall_ms");
  return header;
}

void add_row(CsvTable& table, std::vector<CsvCell> row, bool timing, Clock::time_point start) {
  if (timing) row.emplace_back(ms_since(start));
  table.add_row(std::move(row));
}

std::uint64_t seed_of(const ExperimentConfig& cfg) {
  if (!cfg.seed) throw ConfigError("seed", "a seed is required");
  return *cfg.seed;
}

std::string fmt_real(double v) { return format_cell(CsvCell{v}); }

// Random regression or one-hot targets, [batch, target_size].
Tensor random_targets(Rng& rng, const ModelSpec& spec, std::size_t batch, std::size_t size) {
  if (spec.loss == Loss::mse) return rng.normal_tensor(Shape{batch, size}, 1.0);
  const std::size_t block =
      (spec.kind == ModelKind::rnn || spec.kind == ModelKind::lstm) ? spec.output_size : size;
  Tensor t(Shape{batch, size});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t off = 0; off < size; off += block) {
      t[b * size + off + static_cast<std::size_t>(rng.below(block))] = 1.0;
    }
  }
  return t;
}

Tensor batched_input(Rng& rng, const ModelSpec& spec, std::size_t batch) {
  Shape s{batch};
  const Shape item = sample_shape(spec);
  s.insert(s.end(), item.begin(), item.end());
  return rng.normal_tensor(s, 1.0);
}

}  // namespace

RunResult run_scalar_test(const ExperimentConfig& cfg) {
  RunResult result{CsvTable(with_timing({"eta_v", "iteration", "status", "mean_abs_divergence",
                                         "log_mean_abs_divergence", "v0_pc_grad", "v0_ad_grad",
                                         "v0_rel_error", "free_energy"},
                                        cfg.timing)),
                   {}};
  const ComputationGraph g = build_scalar_test_graph();
  const AugmentedGraph handle = augment(g);
  const ParamSet params{Tensor(Shape{1, 1}, {cfg.theta})};
  const std::vector<Tensor> inputs{Tensor(Shape{1, 1}, {cfg.v0})};
  const Tensor targets(Shape{1, 1}, {cfg.target});
  const GradientSet ad = reverse_ad(g, params, inputs, targets);
  const VertexId v0 = g.inputs()[0];
  const double ad_v0 = ad.by_vertex[v0.index][0];

  for (double eta : cfg.eta_values) {
    const auto start = Clock::now();
    InferenceSettings settings;
    settings.eta_v = eta;
    settings.max_iters = cfg.iters;
    settings.tolerance = 0.0;
    require_valid(settings);
    AugmentedState state = init_episode(handle, params, inputs, targets);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    auto fail = [&](std::size_t it, const std::string& why) {
      add_row(result.table, {eta, it, std::string("non_finite"), nan, nan, nan, ad_v0, nan, nan},
              cfg.timing, start);
      result.failures.push_back("scalar-test eta_v=" + fmt_real(eta) + " iteration " +
                                std::to_string(it) + ": " + why);
    };
    auto emit = [&](std::size_t it) {
      const GradientSet pc = current_estimate(state);
      const DivergenceReport rep = divergence(g, pc, ad);
      const double pc_v0 = pc.by_vertex[v0.index][0];
      const double fe = free_energy(state);
      if (!std::isfinite(rep.mean_vertex) || !std::isfinite(pc_v0) || !std::isfinite(fe)) {
        fail(it, "non-finite value");
        return false;
      }
      add_row(result.table,
              {eta, it, std::string("ok"), rep.mean_vertex,
               rep.mean_vertex > 0.0 ? std::log(rep.mean_vertex)
                                     : -std::numeric_limits<double>::infinity(),
               pc_v0, ad_v0, relative_error(pc.by_vertex[v0.index], ad.by_vertex[v0.index]), fe},
              cfg.timing, start);
      return true;
    };

    if (!emit(0)) continue;
    for (std::size_t it = 1; it <= cfg.iters; ++it) {
      try {
        inference_step(state, settings);
      } catch (const NumericError& e) {
        fail(it, e.what());
        break;
      }
      if (!emit(it)) break;
    }
  }
  return result;
}

namespace {

void equilibrium_records(RunResult& result, const ExperimentConfig& cfg, const std::string& model,
                         const ComputationGraph& g, const ParamSet& params,
                         std::span<const Tensor> inputs, const Tensor& targets, std::size_t iters,
                         double tolerance, Clock::time_point start) {
  const AugmentedGraph handle = augment(g);
  AugmentedState state = init_episode(handle, params, inputs, targets);
  InferenceSettings settings;
  settings.eta_v = cfg.eta_v;
  settings.max_iters = iters;
  settings.tolerance = cfg.tolerance;
  const RelaxReport rep = relax(state, settings);
  const GradientSet pc = current_estimate(state);
  const GradientSet ad = reverse_ad(g, params, inputs, targets);
  const DivergenceReport div = divergence(g, pc, ad);
  for (const DivergenceEntry& e : div.entries) {
    const bool pass = e.relative <= tolerance;
    add_row(result.table,
            {std::string(e.is_param ? "param" : "vertex"), model, rep.iterations, e.name,
             e.relative, e.mean_abs, e.log_mean_abs, tolerance, pass},
            cfg.timing, start);
    if (!pass) {
      result.failures.push_back(model + " " + e.name + " after " + std::to_string(rep.iterations) +
                                " iterations: relative error " + fmt_real(e.relative) + " > " +
                                fmt_real(tolerance));
    }
  }
}

}  // namespace

RunResult run_gradcheck(const ExperimentConfig& cfg) {
  RunResult result{CsvTable(with_timing({"record", "model", "step", "name", "rel_error",
                                         "mean_abs", "log_mean_abs", "tolerance", "pass"},
                                        cfg.timing)),
                   {}};
  const std::uint64_t seed = seed_of(cfg);
  const auto start = Clock::now();
  const std::size_t batch = 2;

  for (std::size_t k = 0; k < cfg.models.size(); ++k) {
    ModelSpec spec = cfg.model;
    spec.kind = cfg.models[k];
    require_valid(spec);
    const ComputationGraph g = build_model(spec);
    const ParamSet params = init_params(g, derive_seed(seed, 10 + k));
    Rng rng(derive_seed(seed, 100 + k));
    const std::vector<Tensor> inputs = model_inputs(spec, batched_input(rng, spec, batch));
    const Tensor targets = random_targets(rng, spec, batch, target_size(spec));
    const std::string name = to_string(spec.kind);
    equilibrium_records(result, cfg, name, g, params, inputs, targets, cfg.gradcheck_iters,
                        cfg.gradcheck_tolerance, start);
    if (spec.kind == ModelKind::cnn) {
      equilibrium_records(result, cfg, name, g, params, inputs, targets, cfg.cnn_iters,
                          cfg.cnn_tolerance, start);
    }
  }

  if (cfg.train_steps == 0) return result;

  // Divergence over a short fixed-budget training run.
  ModelSpec spec = cfg.model;
  spec.kind = cfg.trend_model;
  require_valid(spec);
  const ComputationGraph g = build_model(spec);
  const AugmentedGraph handle = augment(g);
  ParamSet params = init_params(g, derive_seed(seed, 200));
  Rng rng(derive_seed(seed, 201));
  const std::size_t bs = std::max<std::size_t>(cfg.batch_size, 1);
  const std::size_t pool = std::max<std::size_t>(1, std::min<std::size_t>(cfg.samples / bs, 16));
  std::vector<Tensor> pool_inputs;
  std::vector<Tensor> pool_targets;
  for (std::size_t i = 0; i < pool; ++i) {
    pool_inputs.push_back(batched_input(rng, spec, bs));
    pool_targets.push_back(random_targets(rng, spec, bs, target_size(spec)));
  }
  InferenceSettings settings;
  settings.eta_v = cfg.eta_v;
  settings.max_iters = cfg.iters;
  settings.tolerance = cfg.tolerance;
  const std::string model = to_string(spec.kind);
  std::vector<double> series;
  for (std::size_t step = 0; step < cfg.train_steps; ++step) {
    const std::vector<Tensor> inputs = model_inputs(spec, pool_inputs[step % pool]);
    const Tensor& targets = pool_targets[step % pool];
    AugmentedState state = init_episode(handle, params, inputs, targets);
    relax(state, settings);
    const GradientSet pc = current_estimate(state);
    const GradientSet ad = reverse_ad_from(g, params, state.predictions, targets);
    const DivergenceReport div = divergence(g, pc, ad);
    for (const DivergenceEntry& e : div.entries) {
      if (!e.is_param) continue;
      add_row(result.table,
              {std::string("train"), model, step, e.name, e.relative, e.mean_abs, e.log_mean_abs,
               std::string(), std::string()},
              cfg.timing, start);
    }
    series.push_back(div.mean_param > 0.0 ? std::log(div.mean_param)
                                          : -std::numeric_limits<double>::infinity());
    params = apply_update(params, pc.by_param, cfg.eta_theta, cfg.clamp_lo, cfg.clamp_hi);
  }
  const SlopeFit fit = fit_slope(series);
  const double bound = fit.slope - cfg.slope_band * fit.stderr_slope;
  const bool pass = bound <= 0.0;
  add_row(result.table,
          {std::string("trend"), model, cfg.train_steps, std::string("log_mean_param_divergence"),
           fit.slope, fit.stderr_slope, bound, cfg.slope_band, pass},
          cfg.timing, start);
  if (!pass) {
    result.failures.push_back(model + " divergence trend: slope " + fmt_real(fit.slope) +
                              " exceeds " + fmt_real(cfg.slope_band) + " standard errors (" +
                              fmt_real(fit.stderr_slope) + ")");
  }
  return result;
}

RunResult run_seqlen_sweep(const ExperimentConfig& cfg) {
  RunResult result{
      CsvTable(with_timing({"length", "iterations", "eta_v", "mean_vertex_divergence",
                            "mean_param_divergence", "log_mean_param_divergence",
                            "max_relative_vertex", "max_relative_param", "free_energy"},
                           cfg.timing)),
      {}};
  if (cfg.lengths.empty()) throw ConfigError("lengths", "no sequence lengths given");
  const std::uint64_t seed = seed_of(cfg);
  ModelSpec base = cfg.model;
  base.kind = ModelKind::lstm;
  const std::size_t longest = *std::max_element(cfg.lengths.begin(), cfg.lengths.end());
  base.seq_len = longest;
  require_valid(base);
  const std::size_t bs = std::max<std::size_t>(cfg.batch_size, 1);

  const ParamSet params = init_params(build_model(base), derive_seed(seed, 300));
  Rng rng(derive_seed(seed, 301));
  const Tensor sequence = rng.normal_tensor(Shape{bs, longest, base.input_size}, 1.0);
  ModelSpec per_step = base;
  per_step.sequence_output = SequenceOutput::every_step;
  const Tensor all_targets = random_targets(rng, per_step, bs, longest * base.output_size);

  auto run = [&](std::size_t length, std::size_t iters) {
    const auto start = Clock::now();
    ModelSpec spec = base;
    spec.seq_len = length;
    const ComputationGraph g = build_model(spec);
    Tensor seq(Shape{bs, length, spec.input_size});
    const std::size_t out = spec.output_size;
    const std::size_t tsize = target_size(spec);
    Tensor targets(Shape{bs, tsize});
    for (std::size_t b = 0; b < bs; ++b) {
      for (std::size_t i = 0; i < length * spec.input_size; ++i) {
        seq[b * length * spec.input_size + i] = sequence[b * longest * spec.input_size + i];
      }
      const std::size_t first =
          spec.sequence_output == SequenceOutput::every_step ? 0 : (length - 1) * out;
      for (std::size_t i = 0; i < tsize; ++i) {
        targets[b * tsize + i] = all_targets[b * longest * out + first + i];
      }
    }
    const std::vector<Tensor> inputs = model_inputs(spec, seq);
    const AugmentedGraph handle = augment(g);
    AugmentedState state = init_episode(handle, params, inputs, targets);
    InferenceSettings settings;
    settings.eta_v = cfg.eta_v;
    settings.max_iters = iters;
    settings.tolerance = cfg.tolerance;
    const RelaxReport rep = relax(state, settings);
    const GradientSet pc = current_estimate(state);
    const GradientSet ad = reverse_ad_from(g, params, state.predictions, targets);
    const DivergenceReport div = divergence(g, pc, ad);
    const double log_param = div.mean_param > 0.0 ? std::log(div.mean_param)
                                                  : -std::numeric_limits<double>::infinity();
    add_row(result.table,
            {length, rep.iterations, cfg.eta_v, div.mean_vertex, div.mean_param, log_param,
             div.max_relative_vertex, div.max_relative_param, rep.final_free_energy},
            cfg.timing, start);
    if (!std::isfinite(div.mean_vertex) || !std::isfinite(div.mean_param)) {
      result.failures.push_back("length " + std::to_string(length) + ": non-finite divergence");
    }
  };

  for (std::size_t length : cfg.lengths) run(length, cfg.iters);
  run(longest, 2 * cfg.iters);
  return result;
}

double accuracy(const Tensor& predictions, const Tensor& targets, std::size_t block) {
  if (predictions.shape() != targets.shape() || predictions.rank() < 1) {
    throw StructuralError("accuracy needs equal batched shapes");
  }
  const std::size_t batch = predictions.extent(0);
  if (batch == 0) return 0.0;
  const std::size_t n = predictions.numel() / batch;
  if (block == 0) block = n;
  if (n % block != 0) throw StructuralError("accuracy block does not divide the output");
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t off = 0; off < n; off += block) {
      const double* p = predictions.data().data() + b * n + off;
      const double* t = targets.data().data() + b * n + off;
      hits += std::max_element(p, p + block) - p == std::max_element(t, t + block) - t;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

SlopeFit fit_slope(const std::vector<double>& ys) {
  SlopeFit fit;
  const std::size_t n = ys.size();
  if (n < 2) return fit;
  const double xbar = 0.5 * static_cast<double>(n - 1);
  double ybar = 0.0;
  for (double y : ys) ybar += y;
  ybar /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xbar;
    sxx += dx * dx;
    sxy += dx * (ys[i] - ybar);
  }
  fit.slope = sxy / sxx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - ybar - fit.slope * (static_cast<double>(i) - xbar);
      rss += r * r;
    }
    fit.stderr_slope = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

ParamSet apply_update(const ParamSet& params, const std::vector<Tensor>& grads, double eta,
                      double lo, double hi) {
  if (grads.size() != params.size()) throw StructuralError("gradient count does not match params");
  ParamSet out = params;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (grads[k].shape() != out[k].shape()) {
      throw StructuralError("gradient shape does not match parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < out[k].numel(); ++i) {
      out[k][i] -= eta * std::clamp(grads[k][i], lo, hi);
    }
  }
  return out;
}

StepEstimate estimate_step(const ExperimentConfig& cfg, const ComputationGraph& g,
                           const ModelSpec& spec, const ParamSet& params, const Batch& batch,
                           const std::optional<PrecisionSet>& precisions) {
  StepEstimate est;
  const std::vector<Tensor> inputs = model_inputs(spec, batch.inputs);
  const VertexId out = g.output_vertex();
  if (cfg.method == Method::backprop) {
    const std::vector<Tensor> preds = forward_sweep(g, params, inputs);
    est.loss = batch_loss(g, preds[out.index], batch.targets);
    est.accuracy = accuracy(preds[out.index], batch.targets, g.loss_block());
    est.param_grads = reverse_ad_from(g, params, preds, batch.targets).by_param;
    est.precisions = precisions;
    return est;
  }
  const AugmentedGraph handle = augment(g);
  AugmentedState state = init_episode(handle, params, inputs, batch.targets, precisions);
  est.loss = batch_loss(g, state.predictions[out.index], batch.targets);
  est.accuracy = accuracy(state.predictions[out.index], batch.targets, g.loss_block());
  InferenceSettings settings;
  settings.eta_v = cfg.eta_v;
  settings.max_iters = cfg.iters;
  settings.tolerance = cfg.tolerance;
  const RelaxReport rep = relax(state, settings);
  est.inference_iters = rep.iterations;
  est.free_energy = rep.final_free_energy;
  est.param_grads = current_estimate(state).by_param;
  if (precisions && cfg.eta_sigma > 0.0 && state.converged) {
    est.precisions = precision_update(state, cfg.eta_sigma).precisions;
  } else {
    est.precisions = precisions;
  }
  return est;
}

TrainingData training_data(const ExperimentConfig& cfg) {
  TrainingData td;
  td.spec = cfg.model;
  ModelSpec& spec = td.spec;
  const bool recurrent = spec.kind == ModelKind::rnn || spec.kind == ModelKind::lstm;
  switch (cfg.data) {
    case DataSource::synthetic:
    case DataSource::images: {
      if (recurrent) throw ConfigError("model", "image data needs an mlp or cnn model");
      if (cfg.data == DataSource::synthetic) {
        SyntheticSpec s;
        s.channels = spec.channels;
        s.height = spec.height;
        s.width = spec.width;
        s.classes = cfg.classes;
        s.noise = cfg.noise;
        td.data = synthetic_classification(derive_seed(seed_of(cfg), 2), cfg.samples, s);
      } else {
        if (cfg.data_path.empty()) throw ConfigError("data_path", "images need a PCIM file");
        td.data = load_images(cfg.data_path);
      }
      if (td.data.size() == 0) throw ConfigError("data", "dataset is empty");
      const Shape item = td.data.inputs[0].shape();
      if (spec.kind == ModelKind::mlp) {
        if (spec.layers.front() != shape_numel(item) || spec.layers.back() != td.data.classes) {
          throw ConfigError("layers", "mlp must map " + std::to_string(shape_numel(item)) +
                                          " inputs to " + std::to_string(td.data.classes) +
                                          " classes");
        }
        for (Tensor& x : td.data.inputs) x = x.flatten();
      } else {
        if (item != Shape{spec.channels, spec.height, spec.width}) {
          throw ConfigError("channels", "cnn input must match images of " + shape_to_string(item));
        }
        if (spec.dense.back() != td.data.classes) {
          throw ConfigError("dense", "last dense width must equal the class count " +
                                         std::to_string(td.data.classes));
        }
      }
      break;
    }
    case DataSource::text: {
      if (!recurrent) throw ConfigError("model", "text data needs an rnn or lstm model");
      if (cfg.data_path.empty()) throw ConfigError("data_path", "text data needs a corpus file");
      td.data = load_text(cfg.data_path, cfg.window);
      spec.input_size = spec.output_size = td.data.alphabet.size();
      spec.seq_len = cfg.window;
      spec.sequence_output = SequenceOutput::every_step;
      spec.loss = Loss::cross_entropy;
      break;
    }
    case DataSource::names: {
      if (!recurrent) throw ConfigError("model", "names data needs an rnn or lstm model");
      if (cfg.data_path.empty()) throw ConfigError("data_path", "names data needs a names file");
      if (cfg.precisions) throw ConfigError("precisions", "not supported with names data");
      td.data = load_names(cfg.data_path);
      spec.input_size = td.data.alphabet.size();
      spec.output_size = td.data.classes;
      spec.sequence_output = SequenceOutput::last;
      spec.loss = Loss::cross_entropy;
      spec.seq_len = td.data.inputs[0].extent(0);
      break;
    }
  }
  require_valid(spec);
  return td;
}

TrainResult run_train(const ExperimentConfig& cfg) {
  const std::uint64_t seed = seed_of(cfg);
  TrainingData td = training_data(cfg);
  const DatasetHandle& data = td.data;
  const bool by_length = cfg.data == DataSource::names;

  // Names of different lengths unroll to different graphs over one ParamSet.
  std::map<std::size_t, std::pair<ModelSpec, ComputationGraph>> graphs;
  auto model_for = [&](std::size_t len) -> const std::pair<ModelSpec, ComputationGraph>& {
    const std::size_t key = by_length ? len : 0;
    auto it = graphs.find(key);
    if (it == graphs.end()) {
      ModelSpec s = td.spec;
      if (by_length) s.seq_len = len;
      ComputationGraph g = build_model(s);
      it = graphs.emplace(key, std::make_pair(s, std::move(g))).first;
    }
    return it->second;
  };
  auto length_of = [&](std::size_t i) { return by_length ? data.inputs[i].extent(0) : 0; };

  const ComputationGraph& base = model_for(length_of(0)).second;
  ParamSet params = init_params(base, derive_seed(seed, 1));
  std::optional<PrecisionSet> precisions;
  if (cfg.precisions) precisions = identity_precisions(base);
  std::size_t first_step = 0;
  if (!cfg.resume.empty()) {
    const std::vector<NamedTensor> saved = load_checkpoint(cfg.resume);
    params = params_from_checkpoint(base, saved);
    bool has_step = false;
    for (const NamedTensor& t : saved) {
      if (t.name == "meta.step") {
        first_step = static_cast<std::size_t>(t.value[0]);
        has_step = true;
      }
      if (precisions && t.name.rfind("precision.", 0) == 0) {
        const auto v = base.find_vertex(t.name.substr(10));
        if (!v || t.value.shape() != (*precisions)[v->index].shape()) {
          throw FormatError("checkpoint precision '" + t.name + "' does not fit the model");
        }
        (*precisions)[v->index] = t.value;
      }
    }
    if (!has_step) throw FormatError("checkpoint has no meta.step entry");
  }

  const std::size_t bs = cfg.batch_size;
  const std::size_t per_epoch = data.size() / bs;
  if (per_epoch == 0) throw ConfigError("batch_size", "larger than the dataset");
  const std::size_t total = cfg.steps > 0 ? cfg.steps : cfg.epochs * per_epoch;

  TrainResult result{{CsvTable(with_timing({"record", "step", "epoch", "method", "loss",
                                            "accuracy", "inference_iters", "free_energy"},
                                           cfg.timing)),
                      {}},
                     {},
                     0,
                     0.0,
                     0.0};
  CsvTable& table = result.run.table;
  const auto start = Clock::now();
  const std::string method = to_string(cfg.method);

  std::size_t cached_epoch = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> epoch_batches;
  for (std::size_t step = first_step; step < total; ++step) {
    const std::size_t epoch = step / per_epoch;
    if (epoch != cached_epoch) {
      epoch_batches = batch_indices(data.size(), bs, derive_seed(seed, 1000 + epoch), true);
      cached_epoch = epoch;
    }
    const std::vector<std::size_t>& indices = epoch_batches[step % per_epoch];

    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i : indices) groups[length_of(i)].push_back(i);

    std::vector<Tensor> grads;
    double loss = 0.0;
    double acc = 0.0;
    double fe = 0.0;
    std::size_t iters = 0;
    for (const auto& [len, members] : groups) {
      const auto& [spec, g] = model_for(len);
      const Batch batch = make_batch(data, members);
      StepEstimate est = estimate_step(cfg, g, spec, params, batch, precisions);
      const double w = static_cast<double>(members.size()) / static_cast<double>(indices.size());
      if (grads.empty()) {
        for (const Tensor& t : est.param_grads) grads.emplace_back(t.shape());
      }
      for (std::size_t k = 0; k < grads.size(); ++k) axpy(w, est.param_grads[k], grads[k]);
      loss += w * est.loss;
      acc += w * est.accuracy;
      fe += est.free_energy;
      iters = std::max(iters, est.inference_iters);
      precisions = std::move(est.precisions);
    }
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }
    add_row(table, {std::string("step"), step, epoch, method, loss, acc, iters, fe}, cfg.timing,
            start);
    params = apply_update(params, grads, cfg.eta_theta, cfg.clamp_lo, cfg.clamp_hi);
  }
  result.steps = std::max(total, first_step);

  // Whole-set evaluation in dataset order.
  double loss_sum = 0.0;
  double hit_sum = 0.0;
  std::map<std::size_t, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < data.size(); ++i) by_len[length_of(i)].push_back(i);
  for (const auto& [len, members] : by_len) {
    const auto& [spec, g] = model_for(len);
    for (std::size_t off = 0; off < members.size(); off += bs) {
      const std::size_t n = std::min(bs, members.size() - off);
      const Batch batch =
          make_batch(data, std::span<const std::size_t>(members.data() + off, n));
      const std::vector<Tensor> preds = forward_sweep(g, params, model_inputs(spec, batch.inputs));
      const Tensor& y = preds[g.output_vertex().index];
      loss_sum += batch_loss(g, y, batch.targets) * static_cast<double>(n);
      hit_sum += accuracy(y, batch.targets, g.loss_block()) * static_cast<double>(n);
    }
  }
  result.final_loss = loss_sum / static_cast<double>(data.size());
  result.final_accuracy = hit_sum / static_cast<double>(data.size());
  if (!std::isfinite(result.final_loss)) throw NumericError("non-finite final loss");
  add_row(table,
          {std::string("final"), result.steps, result.steps / per_epoch, method, result.final_loss,
           result.final_accuracy, std::size_t{0}, 0.0},
          cfg.timing, start);

  if (!cfg.checkpoint.empty()) {
    std::vector<NamedTensor> out = named_params(base, params);
    out.push_back({"meta.step", Tensor(Shape{1}, {static_cast<double>(result.steps)})});
    if (precisions) {
      for (std::size_t i = 0; i < base.size(); ++i) {
        if (base.vertices()[i].is_input()) continue;
        out.push_back({"precision." + base.vertices()[i].name, (*precisions)[i]});
      }
    }
    save_checkpoint(cfg.checkpoint, out);
  }
  result.params = std::move(params);
  return result;
}

ImageFile convert_dataset(const std::string& format, const std::string& input,
                          const std::string& output, const ExperimentConfig& cfg) {
  ImageFile file;
  if (format == "cifar10-bin") {
    if (input.empty()) throw ConfigError("input", "cifar10-bin needs an input file");
    file = parse_cifar10_binary(read_file(input));
  } else if (format == "synthetic") {
    SyntheticSpec s;
    s.channels = cfg.model.channels;
    s.height = cfg.model.height;
    s.width = cfg.model.width;
    s.classes = cfg.classes;
    s.noise = cfg.noise;
    file = to_image_file(synthetic_classification(derive_seed(seed_of(cfg), 2), cfg.samples, s));
  } else {
    throw ConfigError("format", "unknown dataset format '" + format + "'");
  }
  if (output.empty()) throw ConfigError("output", "an output path is required");
  write_pcim(output, file);
  return file;
}

}  // namespace pcg
