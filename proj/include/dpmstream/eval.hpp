#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dpmstream/dpm.hpp"
#include "dpmstream/forgetting_state.hpp"
#include "dpmstream/stream.hpp"

namespace dpmstream {

/// Per-row argmax, ties broken toward the lowest index.
Eigen::VectorXi hard_assign(const Responsibilities& phi);

/// Fraction of points whose predicted cluster's majority class matches.
double purity(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth);

/// Mutual information normalized by the arithmetic mean of the entropies,
/// 0 log 0 = 0. Degenerate conventions: both partitions trivial -> 1, zero
/// mutual information -> 0.
double nmi(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth);

/// Pair-counting adjusted Rand index via the contingency-table formula.
double ari(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth);

/// Mean over points of (b - a) / max(a, b) with Euclidean mean distances;
/// points in singleton clusters score 0, 0/0 counts as 0. Throws
/// std::domain_error when fewer than two clusters are present.
double silhouette(const Eigen::MatrixXd& points, const Eigen::VectorXi& labels);

/// Minimum-total-cost assignment of rows to columns (rows <= columns);
/// returns the matched column per row.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

struct TrackedPair {
  int component = 0;    // mixture component index
  int truth_index = 0;  // matched true cluster
  double mean_error = 0.0;
  double std_error = 0.0;
};

struct TrackResult {
  std::vector<TrackedPair> pairs;
  int shortfall = 0;  // k_true minus the number of matched components
};

/// Matches the top-k_true components by soft count against the true
/// clusters with an optimal assignment on mean distances; estimated std is
/// sqrt(b / a).
TrackResult track_parameters(const MixtureState& state, const Responsibilities& phi,
                             const GroundTruthBatch& truth);

struct BatchMetrics {
  double test_loglik_per_point = 0.0;
  std::optional<double> silhouette;
  std::optional<double> nmi;
  std::optional<double> ari;
  std::optional<double> purity;
  int n_active_components = 0;
  std::optional<double> e_rho_mean;
  std::optional<double> omega_min;
  std::optional<double> omega_max;
};

/// Evaluation protocol for one fitted batch: predictive log-likelihood
/// under the expected mixture weights, then clustering metrics on the test
/// points using hard assignments from a fresh local pass (uniform
/// responsibilities in, frozen globals). Label metrics are skipped when any
/// true label is unknown; silhouette is skipped when the predicted
/// partition is trivial.
BatchMetrics compute_batch_metrics(const MixtureState& state, const Responsibilities& train_phi,
                                   const Eigen::MatrixXd& test,
                                   const Eigen::VectorXi& test_labels, double alpha,
                                   const ForgettingState& forgetting);

}  // namespace dpmstream
