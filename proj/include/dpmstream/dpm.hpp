#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dpmstream/expfam.hpp"
#include "dpmstream/forgetting_state.hpp"

namespace dpmstream {

enum class PhiInit { kAuto, kRandomAnchors, kRandomDirichlet, kNearestMean };

/// Truncated DP Gaussian mixture configuration. `prior` holds the natural
/// parameters of the base distribution G_0.
///
/// The convergence default is deliberately tight: cold starts cross a long
/// symmetry-breaking plateau whose per-iteration relative ELBO change sits
/// around 1e-5, and a loose threshold halts inside it.
struct ModelConfig {
  double alpha = 2.0;
  int trunc = 10;
  int dim = 2;
  ComponentPosterior prior;
  int max_iters = 100;
  double tol = 1e-8;
  PhiInit phi_init = PhiInit::kAuto;

  ModelConfig() : prior(default_prior(2)) {}
  ModelConfig(double alpha_, int trunc_, int dim_)
      : alpha(alpha_), trunc(trunc_), dim(dim_), prior(default_prior(dim_)) {}

  void validate() const;
};

/// N x T row-stochastic assignment probabilities.
struct Responsibilities {
  Eigen::MatrixXd phi;

  int npoints() const { return static_cast<int>(phi.rows()); }
  int trunc() const { return static_cast<int>(phi.cols()); }

  /// rows sum to 1 within 1e-9, entries nonnegative
  void validate() const;
};

/// Means and variances of the soft counts N_k and N_{>k} under the
/// factorized q(z). N_{>=k} moments are the per-index sums.
struct CountStats {
  Eigen::VectorXd e_nk;
  Eigen::VectorXd v_nk;
  Eigen::VectorXd e_gt;
  Eigen::VectorXd v_gt;

  int trunc() const { return static_cast<int>(e_nk.size()); }
  void validate() const;
};

struct MixtureState {
  std::vector<ComponentPosterior> components;

  int trunc() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : components.front().dim(); }

  static MixtureState replicate_prior(const ComponentPosterior& prior, int trunc);
  void validate() const;
};

CountStats compute_counts(const Responsibilities& phi);

/// Counts with one point's row removed (mean and Bernoulli-variance
/// contributions subtracted, clamped at zero).
CountStats counts_without_row(const CountStats& counts, const Eigen::VectorXd& phi_row);

/// Second-order approximation of E_q[ log p(z_n = k | z_{-n}) ] given the
/// leave-one-out counts. Every E[log X] is approximated by
/// log E[X] - Var[X] / (2 E[X]^2); the last component carries no occupancy
/// factor of its own, it absorbs the remaining stick mass.
double expected_log_assignment_prior(const CountStats& counts_minus_n, double alpha, int k);

/// E_q[ log N(x; mu, tau^-1 I) ] under the component posterior.
double expected_log_lik(const Eigen::VectorXd& x, const ComponentPosterior& comp);

/// Conjugate global update against the (possibly mixed) prior, Gaussian
/// factor first and Gamma factor second within the call, using the freshest
/// moments available. `state` supplies the current Gamma moments for the
/// Gaussian step.
MixtureState update_global(const Eigen::MatrixXd& data, const Responsibilities& phi,
                           const MixtureState& prior, const MixtureState& state);

/// One responsibilities sweep against a frozen counts snapshot taken from
/// `phi` on entry. Rows are normalized in log space; entries below 1e-12
/// are flushed to zero and the row renormalized.
Responsibilities update_local(const Eigen::MatrixXd& data, const MixtureState& state,
                              const Responsibilities& phi, double alpha);

/// E_q[ log p(z) ] for the collapsed assignment prior, log-Gamma terms
/// expanded to second order around the count means.
double expected_log_pz(const CountStats& counts, double alpha);

/// Sum of row entropies of phi with the 0 log 0 = 0 convention.
double local_entropy(const Responsibilities& phi);

/// Surrogate ELBO: expected data log-likelihood, E[rho]-weighted expected
/// log prior, global entropies, approximate E_q[log p(z)], local entropies,
/// and (only when `forgetting` carries a rho posterior) the rho prior and
/// entropy terms.
double surrogate_elbo(const Eigen::MatrixXd& data, const MixtureState& state,
                      const Responsibilities& phi, const MixtureState& prev,
                      const ComponentPosterior& prior0, const ForgettingState& forgetting,
                      double gamma, double alpha);

struct MixtureWeights {
  Eigen::VectorXd weights;  // expected stick-breaking weights, sum <= 1
  double remainder;         // leftover stick mass

  /// weights scaled to sum to one (leftover mass renormalized away)
  Eigen::VectorXd normalized() const;
};

MixtureWeights expected_mixture_weights(const CountStats& counts, double alpha);

/// Mean per-point log density of the plug-in mixture
/// sum_k w_k N(x; m_k, (a_k/b_k)^-1 I).
double predictive_log_lik(const Eigen::MatrixXd& test, const MixtureState& state,
                          const Eigen::VectorXd& weights);

/// Initial responsibilities. kRandomAnchors seeds one anchor point per
/// component by a distance-weighted draw over the batch and assigns each
/// point to its nearest anchor; symmetric initializations lose the
/// component race on well-separated data, anchors do not. kRandomDirichlet
/// draws seeded symmetric-Dirichlet(1) rows; kNearestMean assigns one-hot
/// to the nearest `state` mean. kAuto resolves to kRandomAnchors when
/// `state` equals a replicated component (no structure to respect) and to
/// kNearestMean otherwise; fit_batch passes the mixed prior as `state`.
Responsibilities init_phi(int npoints, int trunc, PhiInit kind, std::uint64_t seed,
                          const Eigen::MatrixXd& data, const MixtureState& state);

}  // namespace dpmstream
