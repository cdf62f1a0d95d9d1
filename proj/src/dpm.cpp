#include "dpmstream/dpm.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "dpmstream/special.hpp"

namespace dpmstream {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kPhiFloor = 1e-12;

// log E[X] - Var[X] / (2 E[X]^2)
inline double taylor_log(double mean, double var)
{
  return std::log(mean) - var / (2.0 * mean * mean);
}

// E[lgamma(X)] to second order around the mean
inline double taylor_lgamma(double mean, double var)
{
  return std::lgamma(mean) + 0.5 * trigamma(mean) * var;
}

// per-point expected log-likelihood matrix, N x T
Eigen::MatrixXd expected_loglik_matrix(const Eigen::MatrixXd& data, const MixtureState& state)
{
  const int n = static_cast<int>(data.rows());
  const int t = state.trunc();
  const double d = static_cast<double>(data.cols());

  Eigen::MatrixXd ll(n, t);
  for (int k = 0; k < t; ++k) {
    const ComponentPosterior& c = state.components[k];
    const GammaMoments gm = gamma_moments(c.prec_factor);
    const Eigen::VectorXd m = c.mean_factor.mean();
    const double c0 = 0.5 * d * (gm.e_log_tau - kLog2Pi)
                    - 0.5 * gm.e_tau * d / c.mean_factor.s;
    ll.col(k) = ((data.rowwise() - m.transpose()).rowwise().squaredNorm()
                 * (-0.5 * gm.e_tau)).array() + c0;
  }
  return ll;
}

// flush sub-threshold entries and renormalize one row
inline void floor_and_renormalize(Eigen::MatrixXd& phi, int row)
{
  double sum = 0.0;
  for (int k = 0; k < phi.cols(); ++k) {
    if (phi(row, k) < kPhiFloor) phi(row, k) = 0.0;
    sum += phi(row, k);
  }
  phi.row(row) /= sum;
}

}  // namespace

void ModelConfig::validate() const
{
  if (!(alpha > 0.0)) throw std::invalid_argument("ModelConfig: alpha must be positive");
  if (trunc < 2) throw std::invalid_argument("ModelConfig: trunc must be >= 2");
  if (dim < 1) throw std::invalid_argument("ModelConfig: dim must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("ModelConfig: max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("ModelConfig: tol must be positive");
  prior.validate();
  if (prior.dim() != dim)
    throw std::invalid_argument("ModelConfig: prior dimension does not match dim");
}

void Responsibilities::validate() const
{
  for (int i = 0; i < phi.rows(); ++i) {
    double sum = 0.0;
    for (int k = 0; k < phi.cols(); ++k) {
      const double p = phi(i, k);
      if (!(p >= 0.0) || !std::isfinite(p))
        throw std::invalid_argument("Responsibilities: entries must be finite and nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("Responsibilities: row does not sum to 1");
  }
}

void CountStats::validate() const
{
  const int t = trunc();
  if (v_nk.size() != t || e_gt.size() != t || v_gt.size() != t)
    throw std::invalid_argument("CountStats: mismatched field lengths");
  for (int k = 0; k < t; ++k) {
    if (e_nk[k] < 0.0 || v_nk[k] < 0.0 || e_gt[k] < 0.0 || v_gt[k] < 0.0)
      throw std::invalid_argument("CountStats: negative mean or variance");
  }
}

MixtureState MixtureState::replicate_prior(const ComponentPosterior& prior, int trunc)
{
  MixtureState s;
  s.components.assign(trunc, prior);
  return s;
}

void MixtureState::validate() const
{
  for (const auto& c : components) c.validate();
  for (const auto& c : components)
    if (c.dim() != dim()) throw std::invalid_argument("MixtureState: mixed dimensions");
}

CountStats compute_counts(const Responsibilities& resp)
{
  const auto& phi = resp.phi;
  const int n = static_cast<int>(phi.rows());
  const int t = static_cast<int>(phi.cols());

  CountStats c;
  c.e_nk = phi.colwise().sum();
  c.v_nk = (phi.array() * (1.0 - phi.array())).colwise().sum();

  c.e_gt = Eigen::VectorXd::Zero(t);
  c.v_gt = Eigen::VectorXd::Zero(t);
  Eigen::VectorXd tail = Eigen::VectorXd::Zero(n);  // P(z_n > k) per point
  for (int k = t - 1; k >= 0; --k) {
    if (k < t - 1) {
      c.e_gt[k] = c.e_gt[k + 1] + c.e_nk[k + 1];
      tail += phi.col(k + 1);
      c.v_gt[k] = (tail.array() * (1.0 - tail.array())).sum();
    }
  }
  return c;
}

CountStats counts_without_row(const CountStats& counts, const Eigen::VectorXd& phi_row)
{
  const int t = counts.trunc();
  if (phi_row.size() != t)
    throw std::invalid_argument("counts_without_row: row length mismatch");

  CountStats out = counts;
  double tail = 0.0;
  for (int k = t - 1; k >= 0; --k) {
    out.e_nk[k] = std::max(0.0, out.e_nk[k] - phi_row[k]);
    out.v_nk[k] = std::max(0.0, out.v_nk[k] - phi_row[k] * (1.0 - phi_row[k]));
    out.e_gt[k] = std::max(0.0, out.e_gt[k] - tail);
    out.v_gt[k] = std::max(0.0, out.v_gt[k] - tail * (1.0 - tail));
    if (k > 0) tail += phi_row[k];
  }
  return out;
}

double expected_log_assignment_prior(const CountStats& c, double alpha, int k)
{
  const int t = c.trunc();
  if (k < 0 || k >= t)
    throw std::out_of_range("expected_log_assignment_prior: component index out of range");

  double val = 0.0;
  if (k < t - 1) {
    val += taylor_log(1.0 + c.e_nk[k], c.v_nk[k])
         - taylor_log(1.0 + alpha + c.e_nk[k] + c.e_gt[k], c.v_nk[k] + c.v_gt[k]);
  }
  for (int j = 0; j < k; ++j) {
    val += taylor_log(alpha + c.e_gt[j], c.v_gt[j])
         - taylor_log(1.0 + alpha + c.e_nk[j] + c.e_gt[j], c.v_nk[j] + c.v_gt[j]);
  }
  return val;
}

double expected_log_lik(const Eigen::VectorXd& x, const ComponentPosterior& comp)
{
  if (x.size() != comp.dim())
    throw std::invalid_argument("expected_log_lik: dimension mismatch");
  const double d = static_cast<double>(x.size());
  const GammaMoments gm = gamma_moments(comp.prec_factor);
  const double dm2 = (x - comp.mean_factor.mean()).squaredNorm();
  return 0.5 * d * (gm.e_log_tau - kLog2Pi)
       - 0.5 * gm.e_tau * (dm2 + d / comp.mean_factor.s);
}

MixtureState update_global(const Eigen::MatrixXd& data, const Responsibilities& resp,
                           const MixtureState& prior, const MixtureState& state)
{
  if (!data.allFinite())
    throw std::invalid_argument("update_global: data must be finite");
  const int t = state.trunc();
  if (prior.trunc() != t || resp.trunc() != t || data.rows() != resp.phi.rows())
    throw std::invalid_argument("update_global: shape mismatch");
  const double d = static_cast<double>(data.cols());
  const Eigen::VectorXd sqnorm = data.rowwise().squaredNorm();

  MixtureState out = state;
  for (int k = 0; k < t; ++k) {
    const ComponentPosterior& pk = prior.components[k];
    const double e_tau = state.components[k].prec_factor.a / state.components[k].prec_factor.b;
    const double nk = resp.phi.col(k).sum();
    const Eigen::VectorXd sx = data.transpose() * resp.phi.col(k);

    const double s_new = pk.mean_factor.s + e_tau * nk;
    const Eigen::VectorXd h_new = pk.mean_factor.h + e_tau * sx;
    const Eigen::VectorXd m_new = h_new / s_new;

    // sum_n phi_nk |x_n - m|^2 = sum phi |x|^2 - 2 m.sx + nk |m|^2
    const double scatter = resp.phi.col(k).dot(sqnorm) - 2.0 * m_new.dot(sx)
                         + nk * m_new.squaredNorm();
    const double a_new = pk.prec_factor.a + 0.5 * d * nk;
    const double b_new = pk.prec_factor.b
                       + 0.5 * (std::max(0.0, scatter) + nk * d / s_new);

    out.components[k].mean_factor = {h_new, s_new};
    out.components[k].prec_factor = {a_new, b_new};
  }
  return out;
}

Responsibilities update_local(const Eigen::MatrixXd& data, const MixtureState& state,
                              const Responsibilities& resp, double alpha)
{
  const int n = static_cast<int>(data.rows());
  const int t = state.trunc();
  if (resp.trunc() != t || resp.npoints() != n)
    throw std::invalid_argument("update_local: shape mismatch");

  const CountStats counts = compute_counts(resp);
  const Eigen::MatrixXd ll = expected_loglik_matrix(data, state);

  Eigen::MatrixXd phi(n, t);
  Eigen::VectorXd score(t);
  Eigen::VectorXd row_tail(t);  // P(z_i > k) for the row being removed
  for (int i = 0; i < n; ++i) {
    row_tail[t - 1] = 0.0;
    for (int k = t - 2; k >= 0; --k) row_tail[k] = row_tail[k + 1] + resp.phi(i, k + 1);

    // leave-one-out counts per index, survival factors accumulated once
    double prefix = 0.0;
    for (int k = 0; k < t; ++k) {
      double v = prefix;
      if (k < t - 1) {
        const double p = resp.phi(i, k);
        const double q = row_tail[k];
        const double e_nk = std::max(0.0, counts.e_nk[k] - p);
        const double v_nk = std::max(0.0, counts.v_nk[k] - p * (1.0 - p));
        const double e_gt = std::max(0.0, counts.e_gt[k] - q);
        const double v_gt = std::max(0.0, counts.v_gt[k] - q * (1.0 - q));
        const double den = taylor_log(1.0 + alpha + e_nk + e_gt, v_nk + v_gt);
        v += taylor_log(1.0 + e_nk, v_nk) - den;
        prefix += taylor_log(alpha + e_gt, v_gt) - den;
      }
      score[k] = v + ll(i, k);
    }

    const double mx = score.maxCoeff();
    phi.row(i) = (score.array() - mx).exp().transpose();
    phi.row(i) /= phi.row(i).sum();
    floor_and_renormalize(phi, i);
  }
  return {std::move(phi)};
}

double expected_log_pz(const CountStats& c, double alpha)
{
  const int t = c.trunc();
  double val = 0.0;
  for (int k = 0; k < t - 1; ++k) {
    val += std::log(alpha)
         + taylor_lgamma(1.0 + c.e_nk[k], c.v_nk[k])
         + taylor_lgamma(alpha + c.e_gt[k], c.v_gt[k])
         - taylor_lgamma(1.0 + alpha + c.e_nk[k] + c.e_gt[k], c.v_nk[k] + c.v_gt[k]);
  }
  return val;
}

double local_entropy(const Responsibilities& resp)
{
  double h = 0.0;
  for (int i = 0; i < resp.phi.rows(); ++i)
    for (int k = 0; k < resp.phi.cols(); ++k) {
      const double p = resp.phi(i, k);
      if (p > 0.0) h -= p * std::log(p);
    }
  return h;
}

double surrogate_elbo(const Eigen::MatrixXd& data, const MixtureState& state,
                      const Responsibilities& resp, const MixtureState& prev,
                      const ComponentPosterior& prior0, const ForgettingState& forgetting,
                      double gamma, double alpha)
{
  const int t = state.trunc();
  if (prev.trunc() != t)
    throw std::invalid_argument("surrogate_elbo: truncation mismatch");

  const Eigen::MatrixXd ll = expected_loglik_matrix(data, state);
  const double data_term = (resp.phi.array() * ll.array()).sum();

  double prior_term = 0.0;
  double global_entropy = 0.0;
  for (int k = 0; k < t; ++k) {
    const ComponentPosterior& q = state.components[k];
    const double rho = forgetting.rho_for(k);
    prior_term += rho * cross_entropy(q, prev.components[k])
                + (1.0 - rho) * cross_entropy(q, prior0);
    global_entropy += entropy(q.mean_factor) + entropy(q.prec_factor);
  }

  const double pz = expected_log_pz(compute_counts(resp), alpha);
  const double lent = local_entropy(resp);

  double rho_terms = 0.0;
  if (forgetting.has_rho_posterior()) {
    for (int i = 0; i < forgetting.omegas.size(); ++i) {
      const double w = forgetting.omegas[i];
      const double er = forgetting.e_rho[i];
      rho_terms += (gamma - w) * er - trunc_exp_log_norm(gamma) + trunc_exp_log_norm(w);
    }
  }

  return data_term + prior_term + global_entropy + pz + lent + rho_terms;
}

Eigen::VectorXd MixtureWeights::normalized() const
{
  const double sum = weights.sum();
  if (!(sum > 0.0))
    throw std::domain_error("MixtureWeights: cannot normalize zero weights");
  return weights / sum;
}

MixtureWeights expected_mixture_weights(const CountStats& c, double alpha)
{
  const int t = c.trunc();
  MixtureWeights out;
  out.weights = Eigen::VectorXd::Zero(t);
  double stick = 1.0;
  for (int k = 0; k < t; ++k) {
    const double e_beta = (1.0 + c.e_nk[k]) / (1.0 + alpha + c.e_nk[k] + c.e_gt[k]);
    out.weights[k] = e_beta * stick;
    stick *= (1.0 - e_beta);
  }
  out.remainder = stick;
  return out;
}

double predictive_log_lik(const Eigen::MatrixXd& test, const MixtureState& state,
                          const Eigen::VectorXd& weights)
{
  if (test.rows() == 0)
    throw std::invalid_argument("predictive_log_lik: empty test set");
  const int t = state.trunc();
  if (weights.size() != t)
    throw std::invalid_argument("predictive_log_lik: weights length mismatch");
  if (std::abs(weights.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("predictive_log_lik: weights must sum to 1");

  const double d = static_cast<double>(test.cols());
  Eigen::MatrixXd logp(test.rows(), t);
  Eigen::VectorXd logw(t);
  for (int k = 0; k < t; ++k) {
    const ComponentPosterior& c = state.components[k];
    const double tau = c.prec_factor.a / c.prec_factor.b;
    const Eigen::VectorXd m = c.mean_factor.mean();
    logw[k] = weights[k] > 0.0 ? std::log(weights[k])
                               : -std::numeric_limits<double>::infinity();
    logp.col(k) = ((test.rowwise() - m.transpose()).rowwise().squaredNorm()
                   * (-0.5 * tau)).array() + 0.5 * d * (std::log(tau) - kLog2Pi);
  }

  double total = 0.0;
  for (int i = 0; i < test.rows(); ++i) {
    const Eigen::VectorXd row = logp.row(i).transpose() + logw;
    const double mx = row.maxCoeff();
    total += mx + std::log((row.array() - mx).exp().sum());
  }
  return total / static_cast<double>(test.rows());
}

namespace {

// every component equal to the first, i.e. no structure worth keeping
bool is_replicated(const MixtureState& state)
{
  for (int k = 1; k < state.trunc(); ++k) {
    const ComponentPosterior& a = state.components[0];
    const ComponentPosterior& b = state.components[k];
    if ((a.mean_factor.h - b.mean_factor.h).cwiseAbs().maxCoeff() > 1e-9) return false;
    if (std::abs(a.mean_factor.s - b.mean_factor.s) > 1e-9) return false;
    if (std::abs(a.prec_factor.a - b.prec_factor.a) > 1e-9) return false;
    if (std::abs(a.prec_factor.b - b.prec_factor.b) > 1e-9) return false;
  }
  return true;
}

}  // namespace

Responsibilities init_phi(int npoints, int trunc, PhiInit kind, std::uint64_t seed,
                          const Eigen::MatrixXd& data, const MixtureState& state)
{
  if (kind == PhiInit::kAuto)
    kind = is_replicated(state) ? PhiInit::kRandomAnchors : PhiInit::kNearestMean;

  Eigen::MatrixXd phi(npoints, trunc);
  if (kind == PhiInit::kRandomAnchors) {
    // distance-weighted anchor seeding over the batch, then one-hot
    // assignment to the nearest anchor
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> anchors;
    anchors.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(npoints)));
    Eigen::VectorXd d2 =
        (data.rowwise() - data.row(anchors[0])).rowwise().squaredNorm();
    while (static_cast<int>(anchors.size()) < trunc) {
      const double total = d2.sum();
      int pick;
      if (total <= 0.0) {
        pick = static_cast<int>(rng() % static_cast<std::uint64_t>(npoints));
      } else {
        double u = unif(rng) * total;
        pick = npoints - 1;
        for (int i = 0; i < npoints; ++i) {
          u -= d2[i];
          if (u <= 0.0) {
            pick = i;
            break;
          }
        }
      }
      anchors.push_back(pick);
      d2 = d2.cwiseMin(
          (data.rowwise() - data.row(pick)).rowwise().squaredNorm().eval());
    }
    phi.setZero();
    for (int i = 0; i < npoints; ++i) {
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int k = 0; k < trunc; ++k) {
        const double dist = (data.row(i) - data.row(anchors[k])).squaredNorm();
        if (dist < best_d2) {
          best_d2 = dist;
          best = k;
        }
      }
      phi(i, best) = 1.0;
    }
  } else if (kind == PhiInit::kRandomDirichlet) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < npoints; ++i) {
      double sum = 0.0;
      for (int k = 0; k < trunc; ++k) {
        const double u = std::max(unif(rng), 1e-300);
        phi(i, k) = -std::log(u);  // Dirichlet(1,...,1) via normalized exponentials
        sum += phi(i, k);
      }
      phi.row(i) /= sum;
      floor_and_renormalize(phi, i);
    }
  } else {
    phi.setZero();
    for (int i = 0; i < npoints; ++i) {
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int k = 0; k < trunc; ++k) {
        const double d2 = (data.row(i).transpose() - state.components[k].mean_factor.mean())
                              .squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = k;
        }
      }
      phi(i, best) = 1.0;
    }
  }
  return {std::move(phi)};
}

}  // namespace dpmstream
