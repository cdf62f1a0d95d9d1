#include "dpmstream/expfam.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dpmstream/special.hpp"

namespace dpmstream {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
}

void GaussianMeanFactor::validate() const
{
  if (!(s > 0.0) || !std::isfinite(s))
    throw std::invalid_argument("GaussianMeanFactor: precision s must be positive and finite");
  if (!h.allFinite())
    throw std::invalid_argument("GaussianMeanFactor: h must be finite");
}

void GammaFactor::validate() const
{
  if (!(a > 0.0) || !std::isfinite(a) || !(b > 0.0) || !std::isfinite(b))
    throw std::invalid_argument("GammaFactor: shape and rate must be positive and finite");
}

void ComponentPosterior::validate() const
{
  mean_factor.validate();
  prec_factor.validate();
}

ComponentPosterior default_prior(int dim)
{
  if (dim < 1) throw std::invalid_argument("default_prior: dim must be >= 1");
  ComponentPosterior p;
  p.mean_factor = {Eigen::VectorXd::Zero(dim), 1.0};
  p.prec_factor = {1.0, 1.0};
  return p;
}

ComponentPosterior mix_natural(const ComponentPosterior& prev,
                               const ComponentPosterior& prior, double rho)
{
  if (!(rho >= 0.0 && rho <= 1.0))
    throw std::domain_error("mix_natural: rho must lie in [0, 1]");
  if (prev.dim() != prior.dim())
    throw std::invalid_argument("mix_natural: dimension mismatch");

  ComponentPosterior out;
  out.mean_factor.h = rho * prev.mean_factor.h + (1.0 - rho) * prior.mean_factor.h;
  out.mean_factor.s = rho * prev.mean_factor.s + (1.0 - rho) * prior.mean_factor.s;
  out.prec_factor.a = rho * prev.prec_factor.a + (1.0 - rho) * prior.prec_factor.a;
  out.prec_factor.b = rho * prev.prec_factor.b + (1.0 - rho) * prior.prec_factor.b;
  return out;
}

double kl_gaussian_mean(const GaussianMeanFactor& q1, const GaussianMeanFactor& q2)
{
  if (q1.dim() != q2.dim())
    throw std::invalid_argument("kl_gaussian_mean: dimension mismatch");
  const double d = static_cast<double>(q1.dim());
  const double dm2 = (q1.mean() - q2.mean()).squaredNorm();
  return 0.5 * (d * q2.s / q1.s + q2.s * dm2 - d + d * std::log(q1.s / q2.s));
}

double kl_gamma(const GammaFactor& q1, const GammaFactor& q2)
{
  return (q1.a - q2.a) * digamma(q1.a) - std::lgamma(q1.a) + std::lgamma(q2.a)
       + q2.a * std::log(q1.b / q2.b) + q1.a * (q2.b - q1.b) / q1.b;
}

double kl_component(const ComponentPosterior& q1, const ComponentPosterior& q2)
{
  return kl_gaussian_mean(q1.mean_factor, q2.mean_factor)
       + kl_gamma(q1.prec_factor, q2.prec_factor);
}

GammaMoments gamma_moments(const GammaFactor& g)
{
  return {g.a / g.b, digamma(g.a) - std::log(g.b)};
}

double entropy(const GaussianMeanFactor& q)
{
  const double d = static_cast<double>(q.dim());
  return 0.5 * d * (1.0 + kLog2Pi) - 0.5 * d * std::log(q.s);
}

double entropy(const GammaFactor& q)
{
  return q.a - std::log(q.b) + std::lgamma(q.a) + (1.0 - q.a) * digamma(q.a);
}

double cross_entropy(const GaussianMeanFactor& q1, const GaussianMeanFactor& q2)
{
  if (q1.dim() != q2.dim())
    throw std::invalid_argument("cross_entropy: dimension mismatch");
  const double d = static_cast<double>(q1.dim());
  const double dm2 = (q1.mean() - q2.mean()).squaredNorm();
  return 0.5 * d * (std::log(q2.s) - kLog2Pi) - 0.5 * q2.s * (dm2 + d / q1.s);
}

double cross_entropy(const GammaFactor& q1, const GammaFactor& q2)
{
  const GammaMoments m = gamma_moments(q1);
  return q2.a * std::log(q2.b) - std::lgamma(q2.a)
       + (q2.a - 1.0) * m.e_log_tau - q2.b * m.e_tau;
}

double cross_entropy(const ComponentPosterior& q1, const ComponentPosterior& q2)
{
  return cross_entropy(q1.mean_factor, q2.mean_factor)
       + cross_entropy(q1.prec_factor, q2.prec_factor);
}

double log_partition(const GaussianMeanFactor& q)
{
  const double d = static_cast<double>(q.dim());
  return 0.5 * d * (kLog2Pi - std::log(q.s)) + 0.5 * q.h.squaredNorm() / q.s;
}

double log_partition(const GammaFactor& q)
{
  return std::lgamma(q.a) - q.a * std::log(q.b);
}

}  // namespace dpmstream
