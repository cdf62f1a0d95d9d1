#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dpmstream {

/// Drifting Gaussian-mixture stream settings. Batch 0 samples k_true means
/// uniformly in [-mean_box, mean_box]^dim and stds uniformly in
/// [std_low, std_high]; every drift_period batches each mean receives an
/// additive N(0, drift_scale^2 I) perturbation and each std is resampled.
///
/// Mean draws are rejection-sampled until every pair of cluster means is at
/// least min_separation apart (best candidate kept after a bounded number
/// of tries), so the stream stays in the separable regime; 0 disables the
/// constraint.
struct StreamConfig {
  int n_batches = 20;
  int train_per_batch = 1000;
  int test_per_batch = 500;
  int k_true = 4;
  int dim = 2;
  int drift_period = 4;  // 1 = drift on every batch
  std::uint64_t seed = 0;
  double mean_box = 10.0;
  double std_low = 0.5;
  double std_high = 1.5;
  double drift_scale = 3.0;
  double min_separation = 8.0;

  void validate() const;
};

struct StreamBatch {
  int t = 0;
  Eigen::MatrixXd train;
  Eigen::MatrixXd test;
  Eigen::VectorXi train_labels;  // -1 = unknown
  Eigen::VectorXi test_labels;
};

struct GroundTruthBatch {
  int t = 0;
  Eigen::MatrixXd means;    // k_true x dim
  Eigen::VectorXd stds;     // k_true
  Eigen::VectorXd weights;  // k_true, simplex
  bool drift = false;
};

struct GroundTruth {
  std::vector<GroundTruthBatch> batches;

  std::vector<bool> drift_flags() const;
  void validate() const;
};

struct SyntheticStream {
  std::vector<StreamBatch> batches;
  GroundTruth truth;
};

SyntheticStream generate_stream(const StreamConfig& cfg);

/// Writes the stream as `t,split,label,x0,...,x{d-1}` CSV (full-precision
/// doubles) plus a JSON ground-truth sidecar
/// {"batches":[{"t":..., "means":[[...]], "stds":[...], "drift":bool}]}.
void save_stream(const std::vector<StreamBatch>& stream, const GroundTruth& truth,
                 const std::string& csv_path, const std::string& truth_path);

/// Reads the CSV schema back, batches grouped by ascending t. Malformed
/// rows and inconsistent dimensions raise with the offending line number.
std::vector<StreamBatch> load_stream_csv(const std::string& path);

GroundTruth load_ground_truth(const std::string& path);

}  // namespace dpmstream
