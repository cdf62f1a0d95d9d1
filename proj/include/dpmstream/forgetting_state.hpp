#pragma once

#include <Eigen/Dense>
#include <optional>

namespace dpmstream {

/// Mean of the truncated exponential q(rho | omega) on [0, 1] with density
/// proportional to exp(omega * rho):
///
///   E[rho] = 1 / (1 - exp(-omega)) - 1 / omega
///
/// Strictly increasing in omega, 0.5 at omega = 0 (series used near the
/// removable singularity), limits 0 and 1 at -inf / +inf.
double expected_rho(double omega);

/// Log-normalizer of the same family: log( (exp(theta) - 1) / theta ),
/// continuously extended to 0 at theta = 0.
double trunc_exp_log_norm(double theta);

/// Forgetting weights attached to one batch fit. For HPP `omegas` holds a
/// single shared natural parameter, for MHPP one per component; the PP
/// family (PP, SVB, BatchVI, Privileged, SVI's inner problem) instead fixes
/// rho and leaves `omegas` empty.
struct ForgettingState {
  Eigen::VectorXd omegas;           // empty for the PP family
  Eigen::VectorXd e_rho;            // same length as omegas
  double gamma = 0.1;
  std::optional<double> fixed_rho;  // set for the PP family

  bool has_rho_posterior() const { return omegas.size() > 0; }

  /// Mixing weight for component k (broadcasts HPP's shared value).
  double rho_for(int k) const;

  /// Mean of the e_rho entries; NaN when the state has no rho posterior.
  double mean_e_rho() const;

  void validate() const;
};

}  // namespace dpmstream
