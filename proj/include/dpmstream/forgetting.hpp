#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dpmstream/dpm.hpp"
#include "dpmstream/forgetting_state.hpp"
#include "dpmstream/stream.hpp"

namespace dpmstream {

enum class AlgorithmKind { kSVB, kPP, kHPP, kMHPP, kSVI, kPrivileged, kBatchVI };

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::kSVB;
  double fixed_rho = 1.0;              // PP
  double gamma = 0.1;                  // HPP / MHPP
  double forgetting_exponent = 0.55;   // SVI
  double delay = 1.0;                  // SVI
  double dataset_size_surrogate = 0.0; // SVI, 0 = use the batch size

  static AlgorithmSpec svb();
  static AlgorithmSpec pp(double rho);
  static AlgorithmSpec hpp(double gamma = 0.1);
  static AlgorithmSpec mhpp(double gamma = 0.1);
  static AlgorithmSpec svi(double exponent = 0.55, double delay = 1.0,
                           double dataset_size_surrogate = 0.0);
  static AlgorithmSpec privileged();
  static AlgorithmSpec batch_vi();

  /// display name, e.g. "PP(0.9)"
  std::string name() const;
  void validate() const;
};

/// omega* = KL(q || G_0) - KL(q || q_prev) + gamma, summed over components.
double update_omega_hpp(const MixtureState& state, const MixtureState& prev,
                        const ComponentPosterior& prior0, double gamma);

/// Same update restricted to component k.
double update_omega_mhpp(const MixtureState& state, const MixtureState& prev,
                         const ComponentPosterior& prior0, double gamma, int k);

/// Natural-gradient interpolation lambda <- (1 - r_t) prev + r_t optimum
/// with r_t = (t + delay)^(-exponent), t >= 1.
MixtureState svi_step(const MixtureState& prev, const MixtureState& batch_optimum,
                      int t, const AlgorithmSpec& params);

struct BatchFit {
  MixtureState state;
  Responsibilities phi;
  ForgettingState forgetting;
  std::vector<double> elbo_trace;
};

/// Runs one batch of the requested algorithm starting from prev_state
/// (replicate the prior for the first batch). `seed` drives the phi
/// initialization; `step_index` is the 1-based stream position used by the
/// SVI learning-rate schedule.
BatchFit fit_batch(const AlgorithmSpec& algo, const Eigen::MatrixXd& train,
                   const MixtureState& prev_state, const ModelConfig& config,
                   std::uint64_t seed, int step_index = 1);

struct StreamFitRecord {
  int t = 0;
  BatchFit fit;
  double wall_ms = 0.0;
};

/// Sequential pass over the stream threading the posterior. Privileged
/// resets prev_state to the replicated prior on drift batches and therefore
/// requires drift flags.
std::vector<StreamFitRecord> fit_stream(const AlgorithmSpec& algo,
                                        const std::vector<StreamBatch>& stream,
                                        const ModelConfig& config, std::uint64_t seed,
                                        const std::vector<bool>* drift_flags = nullptr);

}  // namespace dpmstream
