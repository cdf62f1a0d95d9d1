// Experiment runner for streaming DP Gaussian mixtures: simulate drifting
// streams, run the algorithm roster over them, and compare result summaries.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpmstream/cli.hpp"

namespace {

struct Overrides {
  std::optional<double> model_alpha, model_tol;
  std::optional<int> model_trunc, model_dim, model_max_iters;
  std::optional<std::string> model_phi_init;
  std::optional<int> stream_n_batches, stream_train, stream_test, stream_k_true,
      stream_dim, stream_drift_period;
  std::optional<std::uint64_t> stream_seed;
  std::optional<double> stream_mean_box, stream_drift_scale, stream_std_low, stream_std_high,
      stream_min_separation;
  std::optional<std::string> stream_csv, stream_truth;
  std::optional<int> repetitions;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> algorithms;  // comma-separated compact specs
};

void add_override_flags(CLI::App& app, Overrides& o)
{
  app.add_option("--model.alpha", o.model_alpha, "DP concentration");
  app.add_option("--model.trunc", o.model_trunc, "truncation level T");
  app.add_option("--model.dim", o.model_dim, "data dimension");
  app.add_option("--model.max_iters", o.model_max_iters, "coordinate-ascent iteration cap");
  app.add_option("--model.tol", o.model_tol, "relative ELBO convergence threshold");
  app.add_option("--model.phi_init", o.model_phi_init,
                 "'auto', 'anchors', 'random' or 'nearest'");
  app.add_option("--stream.n_batches", o.stream_n_batches, "number of batches");
  app.add_option("--stream.train_per_batch", o.stream_train, "training points per batch");
  app.add_option("--stream.test_per_batch", o.stream_test, "test points per batch");
  app.add_option("--stream.k_true", o.stream_k_true, "true cluster count");
  app.add_option("--stream.dim", o.stream_dim, "stream dimension");
  app.add_option("--stream.drift_period", o.stream_drift_period,
                 "batches between drifts (1 = every batch)");
  app.add_option("--stream.seed", o.stream_seed, "stream generator seed");
  app.add_option("--stream.mean_box", o.stream_mean_box, "half-width of the mean sampling box");
  app.add_option("--stream.drift_scale", o.stream_drift_scale, "std of mean perturbations");
  app.add_option("--stream.std_low", o.stream_std_low, "lower cluster std bound");
  app.add_option("--stream.std_high", o.stream_std_high, "upper cluster std bound");
  app.add_option("--stream.min_separation", o.stream_min_separation,
                 "minimum pairwise distance between cluster means (0 disables)");
  app.add_option("--stream.csv", o.stream_csv, "external stream CSV path");
  app.add_option("--stream.truth", o.stream_truth, "ground-truth sidecar path");
  app.add_option("--repetitions", o.repetitions, "independent repetitions");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--output-dir", o.output_dir, "output directory")
      ->envname("DPMSTREAM_OUTPUT_DIR");
  app.add_option("--algorithms", o.algorithms,
                 "comma-separated roster, e.g. 'Privileged,SVB,SVI,PP(0.9),HPP,MHPP'");
}

dpmstream::ExperimentConfig build_config(const std::string& config_path, const Overrides& o)
{
  using dpmstream::ConfigError;
  dpmstream::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = dpmstream::load_experiment_config(config_path);
  } else {
    cfg.stream = dpmstream::StreamConfig{};
    cfg.model = dpmstream::ModelConfig(2.0, 10, cfg.stream->dim);
    cfg.algorithms = {dpmstream::AlgorithmSpec::privileged(), dpmstream::AlgorithmSpec::svb(),
                      dpmstream::AlgorithmSpec::svi(),        dpmstream::AlgorithmSpec::pp(0.9),
                      dpmstream::AlgorithmSpec::hpp(),        dpmstream::AlgorithmSpec::mhpp()};
  }

  if (o.stream_csv) {
    cfg.stream.reset();
    cfg.stream_csv = *o.stream_csv;
  }
  if (o.stream_truth) cfg.stream_truth = *o.stream_truth;
  if (cfg.stream) {
    auto& s = *cfg.stream;
    if (o.stream_n_batches) s.n_batches = *o.stream_n_batches;
    if (o.stream_train) s.train_per_batch = *o.stream_train;
    if (o.stream_test) s.test_per_batch = *o.stream_test;
    if (o.stream_k_true) s.k_true = *o.stream_k_true;
    if (o.stream_dim) s.dim = *o.stream_dim;
    if (o.stream_drift_period) s.drift_period = *o.stream_drift_period;
    if (o.stream_seed) s.seed = *o.stream_seed;
    if (o.stream_mean_box) s.mean_box = *o.stream_mean_box;
    if (o.stream_drift_scale) s.drift_scale = *o.stream_drift_scale;
    if (o.stream_std_low) s.std_low = *o.stream_std_low;
    if (o.stream_std_high) s.std_high = *o.stream_std_high;
    if (o.stream_min_separation) s.min_separation = *o.stream_min_separation;
  } else if (o.stream_n_batches || o.stream_train || o.stream_test || o.stream_k_true
             || o.stream_dim || o.stream_drift_period || o.stream_mean_box
             || o.stream_drift_scale || o.stream_std_low || o.stream_std_high
             || o.stream_min_separation) {
    throw ConfigError("config: synthetic stream flags require a synthetic stream");
  }

  if (o.model_dim || o.stream_dim) {
    const int dim = o.model_dim ? *o.model_dim
                                : (cfg.stream ? cfg.stream->dim : cfg.model.dim);
    dpmstream::ModelConfig m(cfg.model.alpha, cfg.model.trunc, dim);
    m.max_iters = cfg.model.max_iters;
    m.tol = cfg.model.tol;
    m.phi_init = cfg.model.phi_init;
    cfg.model = m;
  }
  if (o.model_alpha) cfg.model.alpha = *o.model_alpha;
  if (o.model_trunc) cfg.model.trunc = *o.model_trunc;
  if (o.model_max_iters) cfg.model.max_iters = *o.model_max_iters;
  if (o.model_tol) cfg.model.tol = *o.model_tol;
  if (o.model_phi_init) {
    if (*o.model_phi_init == "auto")
      cfg.model.phi_init = dpmstream::PhiInit::kAuto;
    else if (*o.model_phi_init == "anchors")
      cfg.model.phi_init = dpmstream::PhiInit::kRandomAnchors;
    else if (*o.model_phi_init == "random")
      cfg.model.phi_init = dpmstream::PhiInit::kRandomDirichlet;
    else if (*o.model_phi_init == "nearest")
      cfg.model.phi_init = dpmstream::PhiInit::kNearestMean;
    else
      throw ConfigError(
          "config: model.phi_init must be 'auto', 'anchors', 'random' or 'nearest'");
  }

  if (o.algorithms) {
    cfg.algorithms.clear();
    std::string cell;
    std::istringstream is(*o.algorithms);
    while (std::getline(is, cell, ';')) {
      // allow both ';' and ',' separators; ',' only splits outside parens
      std::string buf;
      int depth = 0;
      for (char c : cell) {
        if (c == '(') depth++;
        if (c == ')') depth--;
        if (c == ',' && depth == 0) {
          if (!buf.empty()) cfg.algorithms.push_back(dpmstream::parse_algorithm_string(buf));
          buf.clear();
        } else {
          buf += c;
        }
      }
      if (!buf.empty()) cfg.algorithms.push_back(dpmstream::parse_algorithm_string(buf));
    }
  }

  if (o.repetitions) cfg.repetitions = *o.repetitions;
  if (o.seed) cfg.seed = *o.seed;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"streaming Dirichlet process Gaussian mixtures with exponential forgetting"};
  app.require_subcommand(1);

  std::string sim_config, run_config;
  Overrides sim_over, run_over;
  std::vector<std::string> compare_paths;
  std::string compare_md, compare_csv;

  CLI::App* sim = app.add_subcommand("simulate", "generate a drifting stream to disk");
  sim->add_option("--config", sim_config, "experiment config JSON");
  add_override_flags(*sim, sim_over);

  CLI::App* run = app.add_subcommand("run", "run the algorithm roster over a stream");
  run->add_option("--config", run_config, "experiment config JSON");
  add_override_flags(*run, run_over);

  CLI::App* cmp = app.add_subcommand("compare", "aggregate summary.json files into a table");
  cmp->add_option("summaries", compare_paths, "summary.json paths")->required();
  cmp->add_option("--out-md", compare_md, "write the markdown table here");
  cmp->add_option("--out-csv", compare_csv, "write the CSV table here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return dpmstream::cmd_simulate(build_config(sim_config, sim_over));
    if (run->parsed()) return dpmstream::cmd_run(build_config(run_config, run_over));
    if (cmp->parsed()) return dpmstream::cmd_compare(compare_paths, compare_md, compare_csv);
  } catch (const dpmstream::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
