// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcgraph/config.hpp"
#include "pcgraph/errors.hpp"
#include "pcgraph/experiments.hpp"

namespace {

struct SharedFlags {
  std::string config;
  std::optional<std::string> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<std::string> model;
  std::optional<std::string> eta_v;
  std::optional<std::string> eta_theta;
  std::optional<std::string> iters;
  bool no_timing = false;
  std::vector<std::string> sets;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--seed", f.seed, "random seed (required here or in the config)");
  cmd->add_option("--out", f.out, "CSV output path (stdout when omitted)");
  cmd->add_option("--method", f.method, "pc or backprop");
  cmd->add_option("--model", f.model, "mlp, cnn, rnn or lstm");
  cmd->add_option("--eta-v", f.eta_v, "inference rate");
  cmd->add_option("--eta-theta", f.eta_theta, "weight learning rate");
  cmd->add_option("--iters", f.iters, "inference iterations");
  cmd->add_flag("--no-timing", f.no_timing, "omit the wall_ms column");
  cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

pcg::ExperimentConfig resolve(const SharedFlags& f) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw pcg::ConfigError(s, "--set expects key=value");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  auto put = [&overrides](const char* key, const std::optional<std::string>& v) {
    if (v) overrides.emplace_back(key, *v);
  };
  put("seed", f.seed);
  put("out", f.out);
  put("method", f.method);
  put("model", f.model);
  put("eta_v", f.eta_v);
  put("eta_theta", f.eta_theta);
  put("iters", f.iters);
  if (f.no_timing) overrides.emplace_back("timing", "false");
  return pcg::load_config(f.config, overrides);
}

int finish(const pcg::ExperimentConfig& cfg, const pcg::RunResult& r) {
  if (cfg.out.empty()) {
    std::cout << r.table.str();
  } else {
    r.table.write(cfg.out);
  }
  for (const std::string& f : r.failures) std::cerr << "FAIL: " << f << '\n';
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive coding on computation graphs"};
  app.require_subcommand(1);

  SharedFlags scalar_flags, grad_flags, seq_flags, train_flags, convert_flags;
  auto* scalar = app.add_subcommand("scalar-test", "divergence series on the scalar test graph");
  add_shared(scalar, scalar_flags);
  auto* grad = app.add_subcommand("gradcheck", "compare equilibrium errors with reverse-mode AD");
  add_shared(grad, grad_flags);
  auto* seq = app.add_subcommand("seqlen-sweep", "LSTM divergence against sequence length");
  add_shared(seq, seq_flags);
  auto* train = app.add_subcommand("train", "train a model with pc or backprop");
  add_shared(train, train_flags);
  auto* convert = app.add_subcommand("convert-dataset", "write a PCIM image file");
  add_shared(convert, convert_flags);
  std::string format;
  std::string input;
  std::string output;
  convert->add_option("--format", format, "cifar10-bin or synthetic")->required();
  convert->add_option("--input", input, "source file for cifar10-bin");
  convert->add_option("--output", output, "PCIM output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (scalar->parsed()) {
      const auto cfg = resolve(scalar_flags);
      return finish(cfg, pcg::run_scalar_test(cfg));
    }
    if (grad->parsed()) {
      const auto cfg = resolve(grad_flags);
      return finish(cfg, pcg::run_gradcheck(cfg));
    }
    if (seq->parsed()) {
      const auto cfg = resolve(seq_flags);
      return finish(cfg, pcg::run_seqlen_sweep(cfg));
    }
    if (train->parsed()) {
      const auto cfg = resolve(train_flags);
      const pcg::TrainResult r = pcg::run_train(cfg);
      std::cerr << "final loss " << r.final_loss << ", accuracy " << r.final_accuracy << " after "
                << r.steps << " steps\n";
      return finish(cfg, r.run);
    }
    if (convert->parsed()) {
      const auto cfg = resolve(convert_flags);
      const pcg::ImageFile f = pcg::convert_dataset(format, input, output, cfg);
      std::cerr << "wrote " << f.count << " images of " << f.channels << "x" << f.height << "x"
                << f.width << " to " << output << '\n';
      return 0;
    }
  } catch (const pcg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
