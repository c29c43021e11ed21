// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pcgraph/errors.hpp"

namespace pcg {

std::string to_string(Method m) { return m == Method::pc ? "pc" : "backprop"; }

std::string to_string(DataSource d) {
  switch (d) {
    case DataSource::synthetic:
      return "synthetic";
    case DataSource::images:
      return "images";
    case DataSource::names:
      return "names";
    case DataSource::text:
      return "text";
  }
  return "unknown";
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t c = v.find(',', start);
    out.push_back(trim(std::string_view(v).substr(start, c == std::string::npos ? c : c - start)));
    if (c == std::string::npos) break;
    start = c + 1;
  }
  return out;
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F parse_one) {
  std::vector<T> out;
  for (const std::string& item : split_commas(v)) out.push_back(parse_one(key, item));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
  return out;
}

Activation to_activation(const std::string& key, const std::string& v) {
  const auto a = parse_activation(v);
  if (!a) throw ConfigError(key, "unknown activation '" + v + "'");
  return *a;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const char* key, double ExperimentConfig::*field) {
      t[key] = [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.*field = to_real(k, v);
      };
    };
    auto size = [&t](const char* key, std::size_t ExperimentConfig::*field) {
      t[key] = [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.*field = to_size(k, v);
      };
    };
    auto model_size = [&t](const char* key, std::size_t ModelSpec::*field) {
      t[key] = [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.model.*field = to_size(k, v);
      };
    };
    auto text = [&t](const char* key, std::string ExperimentConfig::*field) {
      t[key] = [field](ExperimentConfig& c, const std::string&, const std::string& v) {
        c.*field = v;
      };
    };

    t["seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.seed = to_u64(k, v);
    };
    t["method"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "pc") {
        c.method = Method::pc;
      } else if (v == "backprop") {
        c.method = Method::backprop;
      } else {
        throw ConfigError(k, "expected pc or backprop, got '" + v + "'");
      }
    };
    t["model"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      const auto m = parse_model_kind(v);
      if (!m) throw ConfigError(k, "unknown model '" + v + "'");
      c.model.kind = *m;
    };
    t["loss"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      const auto l = parse_loss(v);
      if (!l) throw ConfigError(k, "unknown loss '" + v + "'");
      c.model.loss = *l;
    };
    t["layers"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.model.layers = to_list<std::size_t>(k, v, to_size);
    };
    t["dense"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.model.dense = to_list<std::size_t>(k, v, to_size);
    };
    t["hidden_activation"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.model.hidden_activation = to_activation(k, v);
    };
    t["output_activation"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.model.output_activation = to_activation(k, v);
    };
    t["lstm_head"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.model.lstm_head = to_activation(k, v);
    };
    t["sequence_output"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "every_step") {
        c.model.sequence_output = SequenceOutput::every_step;
      } else if (v == "last") {
        c.model.sequence_output = SequenceOutput::last;
      } else {
        throw ConfigError(k, "expected every_step or last, got '" + v + "'");
      }
    };
    model_size("channels", &ModelSpec::channels);
    model_size("height", &ModelSpec::height);
    model_size("width", &ModelSpec::width);
    model_size("conv1_filters", &ModelSpec::conv1_filters);
    model_size("conv1_kernel", &ModelSpec::conv1_kernel);
    model_size("conv2_filters", &ModelSpec::conv2_filters);
    model_size("conv2_kernel", &ModelSpec::conv2_kernel);
    model_size("input_size", &ModelSpec::input_size);
    model_size("hidden_size", &ModelSpec::hidden_size);
    model_size("output_size", &ModelSpec::output_size);
    model_size("seq_len", &ModelSpec::seq_len);

    real("eta_v", &ExperimentConfig::eta_v);
    real("eta_theta", &ExperimentConfig::eta_theta);
    real("eta_sigma", &ExperimentConfig::eta_sigma);
    size("iters", &ExperimentConfig::iters);
    real("tolerance", &ExperimentConfig::tolerance);
    real("clamp_lo", &ExperimentConfig::clamp_lo);
    real("clamp_hi", &ExperimentConfig::clamp_hi);
    t["precisions"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.precisions = to_bool(k, v);
    };
    size("batch_size", &ExperimentConfig::batch_size);
    size("epochs", &ExperimentConfig::epochs);
    size("steps", &ExperimentConfig::steps);
    t["data"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      for (DataSource d : {DataSource::synthetic, DataSource::images, DataSource::names,
                           DataSource::text}) {
        if (to_string(d) == v) {
          c.data = d;
          return;
        }
      }
      throw ConfigError(k, "unknown data source '" + v + "'");
    };
    text("data_path", &ExperimentConfig::data_path);
    size("samples", &ExperimentConfig::samples);
    size("classes", &ExperimentConfig::classes);
    real("noise", &ExperimentConfig::noise);
    size("window", &ExperimentConfig::window);
    text("out", &ExperimentConfig::out);
    text("checkpoint", &ExperimentConfig::checkpoint);
    text("resume", &ExperimentConfig::resume);
    t["timing"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.timing = to_bool(k, v);
    };
    t["eta_values"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.eta_values = to_list<double>(k, v, to_real);
    };
    real("v0", &ExperimentConfig::v0);
    real("theta", &ExperimentConfig::theta);
    real("target", &ExperimentConfig::target);
    t["models"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.models = to_list<ModelKind>(k, v, [](const std::string& key, const std::string& s) {
        const auto m = parse_model_kind(s);
        if (!m) throw ConfigError(key, "unknown model '" + s + "'");
        return *m;
      });
    };
    real("gradcheck_tolerance", &ExperimentConfig::gradcheck_tolerance);
    real("cnn_tolerance", &ExperimentConfig::cnn_tolerance);
    size("gradcheck_iters", &ExperimentConfig::gradcheck_iters);
    size("cnn_iters", &ExperimentConfig::cnn_iters);
    t["trend_model"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      const auto m = parse_model_kind(v);
      if (!m) throw ConfigError(k, "unknown model '" + v + "'");
      c.trend_model = *m;
    };
    size("train_steps", &ExperimentConfig::train_steps);
    real("slope_band", &ExperimentConfig::slope_band);
    t["lengths"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.lengths = to_list<std::size_t>(k, v, to_size);
    };
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_assignments(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(trimmed, "line " + std::to_string(line_no) + " is not a key = value assignment");
    }
    std::string key = trim(std::string_view(trimmed).substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + " has an empty key");
    out.emplace_back(std::move(key), trim(std::string_view(trimmed).substr(eq + 1)));
  }
  return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown key");
  it->second(cfg, key, value);
}

void require_valid(const ExperimentConfig& c) {
  if (!c.seed) throw ConfigError("seed", "a seed is required");
  auto nonneg = [](const char* key, double v) {
    if (!(v >= 0.0)) throw ConfigError(key, "must be nonnegative");
  };
  nonneg("eta_v", c.eta_v);
  nonneg("eta_theta", c.eta_theta);
  nonneg("eta_sigma", c.eta_sigma);
  nonneg("tolerance", c.tolerance);
  for (double e : c.eta_values) nonneg("eta_values", e);
  if (c.iters == 0) throw ConfigError("iters", "must be at least 1");
  if (c.batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
  if (!(c.clamp_lo <= c.clamp_hi)) throw ConfigError("clamp_lo", "must not exceed clamp_hi");
  for (std::size_t l : c.lengths) {
    if (l == 0) throw ConfigError("lengths", "sequence lengths must be at least 1");
  }
  try {
    require_valid(c.model);
  } catch (const StructuralError& e) {
    throw ConfigError("model", e.what());
  }
}

ExperimentConfig config_from_text(std::string_view text,
                                  const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : parse_assignments(text)) apply_setting(cfg, k, v);
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  require_valid(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return config_from_text(text, overrides);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace pcg
