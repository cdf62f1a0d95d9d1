#include "dpmstream/forgetting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dpmstream {

namespace {

constexpr double kOmegaClip = 100.0;
constexpr double kRhoClip = 1e-6;

double clip_omega(double w) { return std::clamp(w, -kOmegaClip, kOmegaClip); }
double clip_rho(double r) { return std::clamp(r, kRhoClip, 1.0 - kRhoClip); }

}  // namespace

double expected_rho(double omega)
{
  if (!std::isfinite(omega))
    throw std::domain_error("expected_rho: omega must be finite");
  // The direct expression cancels catastrophically near zero; the series
  // radius is chosen so both branches carry ~1e-12 absolute error at the
  // switch.
  if (std::abs(omega) < 1e-2) {
    const double w2 = omega * omega;
    return 0.5 + omega * (1.0 / 12.0 - w2 * (1.0 / 720.0 - w2 / 30240.0));
  }
  return 1.0 / (1.0 - std::exp(-omega)) - 1.0 / omega;
}

double trunc_exp_log_norm(double theta)
{
  if (std::abs(theta) < 1e-2) {
    // log Z = log(1 + t/2 + t^2/6 + t^3/24 + t^4/120 + ...)
    return std::log1p(theta * (0.5 + theta * (1.0 / 6.0 + theta * (1.0 / 24.0 + theta / 120.0))));
  }
  if (theta > 0.0) return theta + std::log1p(-std::exp(-theta)) - std::log(theta);
  return std::log1p(-std::exp(theta)) - std::log(-theta);
}

double ForgettingState::rho_for(int k) const
{
  if (fixed_rho) return *fixed_rho;
  if (omegas.size() == 0)
    throw std::logic_error("ForgettingState: neither fixed rho nor a rho posterior is set");
  return omegas.size() == 1 ? e_rho[0] : e_rho[k];
}

double ForgettingState::mean_e_rho() const
{
  if (!has_rho_posterior()) return std::numeric_limits<double>::quiet_NaN();
  return e_rho.mean();
}

void ForgettingState::validate() const
{
  if (e_rho.size() != omegas.size())
    throw std::invalid_argument("ForgettingState: omegas / e_rho length mismatch");
  for (int i = 0; i < omegas.size(); ++i) {
    if (!(e_rho[i] > 0.0 && e_rho[i] < 1.0))
      throw std::invalid_argument("ForgettingState: e_rho entries must lie in (0, 1)");
    if (std::abs(e_rho[i] - clip_rho(expected_rho(omegas[i]))) > 1e-10)
      throw std::invalid_argument("ForgettingState: e_rho inconsistent with omega");
  }
  if (fixed_rho && !(*fixed_rho >= 0.0 && *fixed_rho <= 1.0))
    throw std::invalid_argument("ForgettingState: fixed rho must lie in [0, 1]");
}

AlgorithmSpec AlgorithmSpec::svb()
{
  AlgorithmSpec s;
  s.kind = AlgorithmKind::kSVB;
  return s;
}

AlgorithmSpec AlgorithmSpec::pp(double rho)
{
  AlgorithmSpec s;
  s.kind = AlgorithmKind::kPP;
  s.fixed_rho = rho;
  return s;
}

AlgorithmSpec AlgorithmSpec::hpp(double gamma)
{
  AlgorithmSpec s;
  s.kind = AlgorithmKind::kHPP;
  s.gamma = gamma;
  return s;
}

AlgorithmSpec AlgorithmSpec::mhpp(double gamma)
{
  AlgorithmSpec s;
  s.kind = AlgorithmKind::kMHPP;
  s.gamma = gamma;
  return s;
}

AlgorithmSpec AlgorithmSpec::svi(double exponent, double delay, double dataset_size_surrogate)
{
  AlgorithmSpec s;
  s.kind = AlgorithmKind::kSVI;
  s.forgetting_exponent = exponent;
  s.delay = delay;
  s.dataset_size_surrogate = dataset_size_surrogate;
  return s;
}

AlgorithmSpec AlgorithmSpec::privileged()
{
  AlgorithmSpec s;
  s.kind = AlgorithmKind::kPrivileged;
  return s;
}

AlgorithmSpec AlgorithmSpec::batch_vi()
{
  AlgorithmSpec s;
  s.kind = AlgorithmKind::kBatchVI;
  return s;
}

std::string AlgorithmSpec::name() const
{
  std::ostringstream os;
  switch (kind) {
    case AlgorithmKind::kSVB: return "SVB";
    case AlgorithmKind::kPP:
      os << "PP(" << fixed_rho << ")";
      return os.str();
    case AlgorithmKind::kHPP: return "HPP";
    case AlgorithmKind::kMHPP: return "MHPP";
    case AlgorithmKind::kSVI: return "SVI";
    case AlgorithmKind::kPrivileged: return "Privileged";
    case AlgorithmKind::kBatchVI: return "BatchVI";
  }
  return "?";
}

void AlgorithmSpec::validate() const
{
  if (kind == AlgorithmKind::kPP && !(fixed_rho >= 0.0 && fixed_rho <= 1.0))
    throw std::invalid_argument("AlgorithmSpec: PP rho must lie in [0, 1]");
  if (kind == AlgorithmKind::kSVI) {
    if (!(forgetting_exponent > 0.5 && forgetting_exponent <= 1.0))
      throw std::invalid_argument("AlgorithmSpec: SVI exponent must lie in (0.5, 1]");
    if (delay < 0.0)
      throw std::invalid_argument("AlgorithmSpec: SVI delay must be nonnegative");
    if (dataset_size_surrogate < 0.0)
      throw std::invalid_argument("AlgorithmSpec: SVI dataset size surrogate must be nonnegative");
  }
  if ((kind == AlgorithmKind::kHPP || kind == AlgorithmKind::kMHPP)
      && !std::isfinite(gamma))
    throw std::invalid_argument("AlgorithmSpec: gamma must be finite");
}

double update_omega_hpp(const MixtureState& state, const MixtureState& prev,
                        const ComponentPosterior& prior0, double gamma)
{
  if (state.trunc() != prev.trunc())
    throw std::invalid_argument("update_omega_hpp: truncation mismatch");
  double w = gamma;
  for (int k = 0; k < state.trunc(); ++k) {
    w += kl_component(state.components[k], prior0)
       - kl_component(state.components[k], prev.components[k]);
  }
  return w;
}

double update_omega_mhpp(const MixtureState& state, const MixtureState& prev,
                         const ComponentPosterior& prior0, double gamma, int k)
{
  if (state.trunc() != prev.trunc())
    throw std::invalid_argument("update_omega_mhpp: truncation mismatch");
  if (k < 0 || k >= state.trunc())
    throw std::out_of_range("update_omega_mhpp: component index out of range");
  return kl_component(state.components[k], prior0)
       - kl_component(state.components[k], prev.components[k]) + gamma;
}

MixtureState svi_step(const MixtureState& prev, const MixtureState& batch_optimum,
                      int t, const AlgorithmSpec& params)
{
  if (t < 1) throw std::invalid_argument("svi_step: step index must be >= 1");
  if (prev.trunc() != batch_optimum.trunc() || prev.dim() != batch_optimum.dim())
    throw std::invalid_argument("svi_step: state shape mismatch");

  const double r = std::pow(static_cast<double>(t) + params.delay,
                            -params.forgetting_exponent);
  MixtureState out = prev;
  for (int k = 0; k < prev.trunc(); ++k) {
    const ComponentPosterior& p = prev.components[k];
    const ComponentPosterior& o = batch_optimum.components[k];
    out.components[k].mean_factor.h = (1.0 - r) * p.mean_factor.h + r * o.mean_factor.h;
    out.components[k].mean_factor.s = (1.0 - r) * p.mean_factor.s + r * o.mean_factor.s;
    out.components[k].prec_factor.a = (1.0 - r) * p.prec_factor.a + r * o.prec_factor.a;
    out.components[k].prec_factor.b = (1.0 - r) * p.prec_factor.b + r * o.prec_factor.b;
  }
  return out;
}

namespace {

// PP-family loop (fixed rho): mixed prior is constant, so it is built once.
// The lambda iterates start at the mixed prior, which keeps the result a
// function of prev_state through the prior alone; rho = 1 reproduces the
// classic warm start at the previous posterior. SVI overrides the start.
BatchFit fit_fixed_rho(const Eigen::MatrixXd& train, const MixtureState& prev_state,
                       const ModelConfig& config, double rho, double scale,
                       std::uint64_t seed, const MixtureState* warm_start = nullptr)
{
  const int t = config.trunc;
  const int n = static_cast<int>(train.rows());

  ForgettingState fs;
  fs.fixed_rho = rho;
  fs.gamma = 0.0;

  MixtureState prior;
  prior.components.reserve(t);
  for (int k = 0; k < t; ++k)
    prior.components.push_back(mix_natural(prev_state.components[k], config.prior, rho));

  MixtureState cur = warm_start ? *warm_start : prior;
  Responsibilities phi = init_phi(n, t, config.phi_init, seed, train, cur);

  BatchFit out;
  out.elbo_trace.reserve(config.max_iters);
  double prev_elbo = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iters; ++it) {
    if (scale == 1.0) {
      cur = update_global(train, phi, prior, cur);
    } else {
      // SVI surrogate dataset size: scale the evidence by replicating phi
      Responsibilities scaled{phi.phi * scale};
      cur = update_global(train, scaled, prior, cur);
    }
    phi = update_local(train, cur, phi, config.alpha);

    const double elbo = surrogate_elbo(train, cur, phi, prev_state, config.prior, fs,
                                       0.0, config.alpha);
    out.elbo_trace.push_back(elbo);
    if (it > 0 && std::abs(elbo - prev_elbo)
                      <= config.tol * std::max(std::abs(prev_elbo), 1e-12))
      break;
    prev_elbo = elbo;
  }

  out.state = std::move(cur);
  out.phi = std::move(phi);
  out.forgetting = std::move(fs);
  return out;
}

// HPP / MHPP loop: rebuild the mixed prior from the current E[rho] every
// iteration, then refresh omega after the global and local sweeps.
BatchFit fit_hierarchical(const Eigen::MatrixXd& train, const MixtureState& prev_state,
                          const ModelConfig& config, bool per_component, double gamma,
                          std::uint64_t seed)
{
  const int t = config.trunc;
  const int n = static_cast<int>(train.rows());
  const int n_rho = per_component ? t : 1;

  ForgettingState fs;
  fs.gamma = gamma;
  fs.omegas = Eigen::VectorXd::Zero(n_rho);
  fs.e_rho = Eigen::VectorXd::Constant(n_rho, 0.5);

  MixtureState prior = prev_state;
  for (int k = 0; k < t; ++k)
    prior.components[k] = mix_natural(prev_state.components[k], config.prior, fs.rho_for(k));
  MixtureState cur = prior;
  Responsibilities phi = init_phi(n, t, config.phi_init, seed, train, cur);

  BatchFit out;
  out.elbo_trace.reserve(config.max_iters);
  double prev_elbo = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iters; ++it) {
    for (int k = 0; k < t; ++k)
      prior.components[k] = mix_natural(prev_state.components[k], config.prior,
                                        fs.rho_for(k));
    cur = update_global(train, phi, prior, cur);
    phi = update_local(train, cur, phi, config.alpha);

    if (per_component) {
      for (int k = 0; k < t; ++k) {
        fs.omegas[k] = clip_omega(update_omega_mhpp(cur, prev_state, config.prior, gamma, k));
        fs.e_rho[k] = clip_rho(expected_rho(fs.omegas[k]));
      }
    } else {
      fs.omegas[0] = clip_omega(update_omega_hpp(cur, prev_state, config.prior, gamma));
      fs.e_rho[0] = clip_rho(expected_rho(fs.omegas[0]));
    }

    const double elbo = surrogate_elbo(train, cur, phi, prev_state, config.prior, fs,
                                       gamma, config.alpha);
    out.elbo_trace.push_back(elbo);
    if (it > 0 && std::abs(elbo - prev_elbo)
                      <= config.tol * std::max(std::abs(prev_elbo), 1e-12))
      break;
    prev_elbo = elbo;
  }

  out.state = std::move(cur);
  out.phi = std::move(phi);
  out.forgetting = std::move(fs);
  return out;
}

}  // namespace

BatchFit fit_batch(const AlgorithmSpec& algo, const Eigen::MatrixXd& train,
                   const MixtureState& prev_state, const ModelConfig& config,
                   std::uint64_t seed, int step_index)
{
  algo.validate();
  config.validate();
  if (train.cols() != config.dim)
    throw std::invalid_argument("fit_batch: data dimension does not match config");
  if (prev_state.trunc() != config.trunc || prev_state.dim() != config.dim)
    throw std::invalid_argument("fit_batch: prev_state shape does not match config");
  if (!train.allFinite())
    throw std::invalid_argument("fit_batch: data must be finite");

  switch (algo.kind) {
    case AlgorithmKind::kSVB:
    case AlgorithmKind::kPrivileged:
      return fit_fixed_rho(train, prev_state, config, 1.0, 1.0, seed);
    case AlgorithmKind::kPP:
      return fit_fixed_rho(train, prev_state, config, algo.fixed_rho, 1.0, seed);
    case AlgorithmKind::kBatchVI:
      return fit_fixed_rho(train, prev_state, config, 0.0, 1.0, seed);
    case AlgorithmKind::kHPP:
      return fit_hierarchical(train, prev_state, config, false, algo.gamma, seed);
    case AlgorithmKind::kMHPP:
      return fit_hierarchical(train, prev_state, config, true, algo.gamma, seed);
    case AlgorithmKind::kSVI: {
      // batch optimum against G_0 (the batch stands in for the full
      // dataset), warm-started from prev_state; then one natural-gradient
      // interpolation toward it
      const double scale = algo.dataset_size_surrogate > 0.0
                               ? algo.dataset_size_surrogate / static_cast<double>(train.rows())
                               : 1.0;
      BatchFit inner = fit_fixed_rho(train, prev_state, config, 0.0, scale, seed, &prev_state);
      BatchFit out;
      out.state = svi_step(prev_state, inner.state, step_index, algo);
      out.phi = update_local(train, out.state, inner.phi, config.alpha);
      out.forgetting = std::move(inner.forgetting);
      out.elbo_trace = std::move(inner.elbo_trace);
      return out;
    }
  }
  throw std::logic_error("fit_batch: unknown algorithm kind");
}

std::vector<StreamFitRecord> fit_stream(const AlgorithmSpec& algo,
                                        const std::vector<StreamBatch>& stream,
                                        const ModelConfig& config, std::uint64_t seed,
                                        const std::vector<bool>* drift_flags)
{
  if (stream.empty()) throw std::invalid_argument("fit_stream: empty stream");
  if (algo.kind == AlgorithmKind::kPrivileged && drift_flags == nullptr)
    throw std::invalid_argument("fit_stream: Privileged requires drift flags");
  if (drift_flags != nullptr && drift_flags->size() != stream.size())
    throw std::invalid_argument("fit_stream: drift flags length mismatch");

  std::vector<StreamFitRecord> records;
  records.reserve(stream.size());

  const MixtureState fresh = MixtureState::replicate_prior(config.prior, config.trunc);
  MixtureState prev = fresh;
  int step = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    ++step;
    const StreamBatch& batch = stream[i];
    const MixtureState& base =
        (algo.kind == AlgorithmKind::kPrivileged && (*drift_flags)[i]) ? fresh : prev;
    const std::uint64_t batch_seed = seed + 1000003ULL * static_cast<std::uint64_t>(i);

    StreamFitRecord rec;
    rec.t = batch.t;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.fit = fit_batch(algo, batch.train, base, config, batch_seed, step);
    } catch (const std::exception& e) {
      throw std::runtime_error("fit_stream: batch " + std::to_string(batch.t) + ": "
                               + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

    prev = rec.fit.state;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace dpmstream
