#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpmstream/dpm.hpp"
#include "dpmstream/forgetting.hpp"
#include "dpmstream/stream.hpp"

namespace dpmstream {

/// invalid configuration; the CLI maps it to exit code 2
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::optional<StreamConfig> stream;  // synthetic source ...
  std::string stream_csv;              // ... or an external CSV stream
  std::string stream_truth;            // optional ground-truth sidecar
  ModelConfig model;
  std::vector<AlgorithmSpec> algorithms;
  int repetitions = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  void validate() const;
};

/// Compact algorithm syntax: SVB, BatchVI, Privileged, PP(0.9), HPP,
/// HPP(0.2), MHPP, MHPP(0.2), SVI, SVI(0.55,1).
AlgorithmSpec parse_algorithm_string(const std::string& text);

/// Parses the documented JSON schema; throws ConfigError naming the field.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

ExperimentConfig load_experiment_config(const std::string& path);

/// Writes stream.csv and ground_truth.json under output_dir.
int cmd_simulate(const ExperimentConfig& cfg);

/// Runs every repetition x algorithm over the stream; writes results.csv,
/// summary.json and one final-state checkpoint per run.
int cmd_run(const ExperimentConfig& cfg);

struct CompareCell {
  double mean = 0.0;
  double std = 0.0;
};

struct CompareTable {
  std::vector<std::string> algorithms;
  std::vector<std::string> metrics;
  std::vector<std::vector<CompareCell>> cells;  // [metric][algorithm]
};

/// Merges summary.json payloads; algorithms keep first-seen order and every
/// summary must carry the same metric set.
CompareTable aggregate_summaries(const std::vector<nlohmann::json>& summaries);

/// Markdown table, best non-Privileged value per metric in bold.
std::string render_markdown(const CompareTable& table);
std::string render_csv(const CompareTable& table);

/// Prints the markdown table to stdout; optionally writes both renderings.
int cmd_compare(const std::vector<std::string>& summary_paths,
                const std::string& markdown_out = "", const std::string& csv_out = "");

}  // namespace dpmstream
