#pragma once

#include <Eigen/Dense>

namespace dpmstream {

/// Isotropic Gaussian factor over a component mean, stored in natural-ish
/// coordinates: h = s * m (precision times mean) and s > 0 (scalar precision).
/// Both coordinates are affine images of the natural parameters, so convex
/// combinations of (h, s) coincide with convex combinations of the natural
/// parameters.
struct GaussianMeanFactor {
  Eigen::VectorXd h;
  double s = 1.0;

  GaussianMeanFactor() = default;
  GaussianMeanFactor(Eigen::VectorXd h_, double s_) : h(std::move(h_)), s(s_) {}

  int dim() const { return static_cast<int>(h.size()); }
  Eigen::VectorXd mean() const { return h / s; }

  /// throws std::invalid_argument on s <= 0 or non-finite h
  void validate() const;
};

/// Gamma factor over a component precision, shape a and rate b.
struct GammaFactor {
  double a = 1.0;
  double b = 1.0;

  GammaFactor() = default;
  GammaFactor(double a_, double b_) : a(a_), b(b_) {}

  void validate() const;
};

/// Variational posterior of one mixture component: independent Gaussian
/// factor over the mean and Gamma factor over the isotropic precision.
struct ComponentPosterior {
  GaussianMeanFactor mean_factor;
  GammaFactor prec_factor;

  int dim() const { return mean_factor.dim(); }
  void validate() const;
};

/// N(0, I) x Gamma(1, 1) in d dimensions.
ComponentPosterior default_prior(int dim);

/// Exponential-forgetting prior: the distribution whose natural parameters
/// are rho * prev + (1 - rho) * prior, applied per factor. rho = 1 returns
/// prev, rho = 0 returns prior.
ComponentPosterior mix_natural(const ComponentPosterior& prev,
                               const ComponentPosterior& prior, double rho);

/// KL( N(m1, s1^-1 I) || N(m2, s2^-1 I) )
double kl_gaussian_mean(const GaussianMeanFactor& q1, const GaussianMeanFactor& q2);

/// KL( Gamma(a1, b1) || Gamma(a2, b2) )
double kl_gamma(const GammaFactor& q1, const GammaFactor& q2);

/// Sum of the per-factor KLs between two component posteriors.
double kl_component(const ComponentPosterior& q1, const ComponentPosterior& q2);

struct GammaMoments {
  double e_tau;      // E[tau] = a / b
  double e_log_tau;  // E[log tau] = digamma(a) - log b
};

GammaMoments gamma_moments(const GammaFactor& g);

/// Differential entropies of the factors.
double entropy(const GaussianMeanFactor& q);
double entropy(const GammaFactor& q);

/// Cross-entropies E_{q1}[ log q2(theta) ]; the Gaussian overload requires
/// matching dimensions.
double cross_entropy(const GaussianMeanFactor& q1, const GaussianMeanFactor& q2);
double cross_entropy(const GammaFactor& q1, const GammaFactor& q2);
double cross_entropy(const ComponentPosterior& q1, const ComponentPosterior& q2);

/// Log-partition functions of the natural-parameter families. For the
/// Gaussian mean factor A(h, s) = (d/2) log(2 pi / s) + |h|^2 / (2 s); for
/// the Gamma factor A(a, b) = lgamma(a) - a log b.
double log_partition(const GaussianMeanFactor& q);
double log_partition(const GammaFactor& q);

}  // namespace dpmstream
