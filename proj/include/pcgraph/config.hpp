// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pcgraph/models.hpp"

namespace pcg {

enum class Method { pc, backprop };
std::string to_string(Method m);

enum class DataSource { synthetic, images, names, text };
std::string to_string(DataSource d);

/// Every run hyperparameter. Keys in config files use the field names.
struct ExperimentConfig {
  std::optional<std::uint64_t> seed;
  Method method = Method::pc;
  ModelSpec model;

  double eta_v = 0.1;
  double eta_theta = 0.01;
  double eta_sigma = 0.0;
  std::size_t iters = 100;
  double tolerance = 1e-8;
  double clamp_lo = -50.0;
  double clamp_hi = 50.0;
  bool precisions = false;

  std::size_t batch_size = 10;
  std::size_t epochs = 5;
  std::size_t steps = 0;  // 0: run whole epochs
  DataSource data = DataSource::synthetic;
  std::string data_path;
  std::size_t samples = 500;
  std::size_t classes = 4;
  double noise = 0.05;
  std::size_t window = 50;

  std::string out;
  std::string checkpoint;
  std::string resume;
  bool timing = true;

  // scalar-test
  std::vector<double> eta_values{0.01, 0.05, 0.1, 0.2, 0.5};
  double v0 = 5.0;
  double theta = 2.0;
  double target = 3.0;

  // gradcheck
  std::vector<ModelKind> models{ModelKind::mlp, ModelKind::cnn, ModelKind::rnn, ModelKind::lstm};
  double gradcheck_tolerance = 1e-5;
  /// Iteration cap for the equilibrium comparison.
  std::size_t gradcheck_iters = 5000;
  /// The CNN is also checked against cnn_tolerance after this many steps.
  std::size_t cnn_iters = 100;
  double cnn_tolerance = 1e-3;
  ModelKind trend_model = ModelKind::cnn;
  std::size_t train_steps = 200;
  /// Allowed slope of log divergence per step, in standard errors.
  double slope_band = 2.0;

  // seqlen-sweep
  std::vector<std::size_t> lengths{10, 25, 50, 100};
};

/// Splits `key = value` lines; `#` starts a comment. Throws ConfigError for
/// lines that are not assignments.
std::vector<std::pair<std::string, std::string>> parse_assignments(std::string_view text);

/// Applies one assignment; unknown keys and unparseable values throw
/// ConfigError naming the key.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Reads a config file (if `path` is nonempty), then applies `overrides` in
/// order, then checks the result.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides);
ExperimentConfig config_from_text(std::string_view text,
                                  const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Throws ConfigError when the seed is missing or a value is out of range.
void require_valid(const ExperimentConfig& cfg);

/// All keys accepted by apply_setting.
std::vector<std::string> config_keys();

}  // namespace pcg
