#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dpmstream/dpm.hpp"
#include "elbo_oracle.hpp"
#include "oracles.hpp"

using namespace dpmstream;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Responsibilities random_phi(std::mt19937_64& rng, int n, int t)
{
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd phi(n, t);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int k = 0; k < t; ++k) {
      phi(i, k) = -std::log(std::max(unif(rng), 1e-300));
      sum += phi(i, k);
    }
    phi.row(i) /= sum;
  }
  return {phi};
}

Responsibilities one_hot_phi(const std::vector<int>& labels, int t)
{
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<int>(labels.size()), t);
  for (std::size_t i = 0; i < labels.size(); ++i) phi(static_cast<int>(i), labels[i]) = 1.0;
  return {phi};
}

MixtureState random_state(std::mt19937_64& rng, int t, int d)
{
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MixtureState s;
  for (int k = 0; k < t; ++k) {
    ComponentPosterior c;
    Eigen::VectorXd h(d);
    for (int j = 0; j < d; ++j) h[j] = 6.0 * (unif(rng) - 0.5);
    c.mean_factor = {h, 0.5 + 4.0 * unif(rng)};
    c.prec_factor = {0.5 + 4.0 * unif(rng), 0.5 + 4.0 * unif(rng)};
    s.components.push_back(c);
  }
  return s;
}

Eigen::MatrixXd noise_data(std::mt19937_64& rng, int n, int d, double spread = 4.0)
{
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = spread * gauss(rng);
  return x;
}

ForgettingState fixed_rho_state(double rho)
{
  ForgettingState fs;
  fs.fixed_rho = rho;
  return fs;
}

}  // namespace

TEST_CASE("compute_counts on deterministic and half-half rows")
{
  const Responsibilities onehot = one_hot_phi({0, 0, 0, 0, 0}, 3);
  const CountStats c = compute_counts(onehot);
  CHECK(c.e_nk[0] == doctest::Approx(5.0));
  CHECK(c.e_nk[1] == 0.0);
  CHECK(c.v_nk.maxCoeff() == 0.0);
  CHECK(c.v_gt.maxCoeff() == 0.0);
  CHECK(c.e_gt[0] == 0.0);

  Eigen::MatrixXd half(2, 2);
  half << 0.5, 0.5, 0.5, 0.5;
  const CountStats ch = compute_counts({half});
  CHECK(ch.e_nk[0] == doctest::Approx(1.0));
  CHECK(ch.e_nk[1] == doctest::Approx(1.0));
  CHECK(ch.v_nk[0] == doctest::Approx(0.5));
  CHECK(ch.v_nk[1] == doctest::Approx(0.5));
  CHECK(ch.e_gt[0] == doctest::Approx(1.0));
  CHECK(ch.v_gt[0] == doctest::Approx(0.5));
}

TEST_CASE("compute_counts matches brute-force enumeration")
{
  auto rng = oracles::seeded_rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Responsibilities phi = random_phi(rng, 6, 3);
    const CountStats c = compute_counts(phi);
    const oracles::CountMoments m = oracles::enumerate_count_moments(phi.phi);
    CHECK((c.e_nk - m.e_nk).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((c.v_nk - m.v_nk).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((c.e_gt - m.e_gt).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((c.v_gt - m.v_gt).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("CountStats invariants on random responsibilities")
{
  auto rng = oracles::seeded_rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 40);
    const int t = 2 + static_cast<int>(rng() % 6);
    const Responsibilities phi = random_phi(rng, n, t);
    phi.validate();
    const CountStats c = compute_counts(phi);
    c.validate();
    CHECK(c.e_nk.sum() == doctest::Approx(n).epsilon(1e-6));
    for (int k = 0; k < t; ++k) {
      double tail = 0.0;
      for (int j = k + 1; j < t; ++j) tail += c.e_nk[j];
      CHECK(c.e_gt[k] == doctest::Approx(tail).epsilon(1e-9));
    }
  }
}

TEST_CASE("counts_without_row equals counts of the reduced matrix")
{
  auto rng = oracles::seeded_rng(23);
  const Responsibilities phi = random_phi(rng, 12, 4);
  const CountStats full = compute_counts(phi);
  for (int drop = 0; drop < 12; drop += 3) {
    const CountStats sub = counts_without_row(full, phi.phi.row(drop).transpose());
    Eigen::MatrixXd reduced(11, 4);
    int r = 0;
    for (int i = 0; i < 12; ++i)
      if (i != drop) reduced.row(r++) = phi.phi.row(i);
    const CountStats expect = compute_counts({reduced});
    CHECK((sub.e_nk - expect.e_nk).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((sub.v_nk - expect.v_nk).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((sub.e_gt - expect.e_gt).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((sub.v_gt - expect.v_gt).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("expected_log_assignment_prior closed cases with zero counts")
{
  CountStats zero;
  zero.e_nk = Eigen::VectorXd::Zero(3);
  zero.v_nk = Eigen::VectorXd::Zero(3);
  zero.e_gt = Eigen::VectorXd::Zero(3);
  zero.v_gt = Eigen::VectorXd::Zero(3);

  CHECK(expected_log_assignment_prior(zero, 2.0, 0)
        == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-12));
  CHECK(expected_log_assignment_prior(zero, 2.0, 1)
        == doctest::Approx(std::log(2.0 / 3.0) + std::log(1.0 / 3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(expected_log_assignment_prior(zero, 2.0, 3), std::out_of_range);
}

TEST_CASE("assignment prior is exact for hard assignments")
{
  const Responsibilities phi = one_hot_phi({0, 1, 1, 2, 0, 1}, 3);
  const CountStats counts = compute_counts(phi);
  const double alpha = 1.7;
  for (int n = 0; n < 6; ++n) {
    const CountStats loo = counts_without_row(counts, phi.phi.row(n).transpose());
    for (int k = 0; k < 3; ++k) {
      const double impl = expected_log_assignment_prior(loo, alpha, k);
      const double exact = oracles::enumerate_log_assignment_prior(phi.phi, n, k, alpha);
      CHECK(impl == doctest::Approx(exact).epsilon(1e-10));
    }
  }
}

TEST_CASE("assignment prior stays within 0.1 nats of enumeration on soft rows")
{
  auto rng = oracles::seeded_rng(24);
  double worst = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 4);  // 5..8
    const Responsibilities phi = random_phi(rng, n, 3);
    const CountStats counts = compute_counts(phi);
    for (int point = 0; point < n; point += 2) {
      const CountStats loo = counts_without_row(counts, phi.phi.row(point).transpose());
      for (int k = 0; k < 3; ++k) {
        const double approx = expected_log_assignment_prior(loo, 2.0, k);
        const double exact = oracles::enumerate_log_assignment_prior(phi.phi, point, k, 2.0);
        worst = std::max(worst, std::abs(approx - exact));
        CHECK(std::abs(approx - exact) < 0.1);
      }
    }
  }
  MESSAGE("worst Taylor gap over soft instances: ", worst, " nats");
}

TEST_CASE("expected_log_lik near-deterministic limits and MC oracle")
{
  ComponentPosterior sharp;
  sharp.mean_factor = {Eigen::VectorXd::Zero(1), 1e12};
  sharp.prec_factor = {1e12, 1e12};

  Eigen::VectorXd x0(1), x1(1);
  x0 << 0.0;
  x1 << 1.0;
  CHECK(expected_log_lik(x0, sharp) == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-6));
  CHECK(expected_log_lik(x1, sharp) == doctest::Approx(-0.5 * kLog2Pi - 0.5).epsilon(1e-6));
  CHECK(expected_log_lik(x0, sharp) == doctest::Approx(-0.91894).epsilon(1e-4));

  auto rng = oracles::seeded_rng(25);
  const MixtureState st = random_state(rng, 1, 2);
  const ComponentPosterior& comp = st.components[0];
  Eigen::VectorXd x(2);
  x << 0.7, -0.4;
  const auto est = oracles::mc_component_expect(
      comp.mean_factor.mean(), comp.mean_factor.s, comp.prec_factor.a, comp.prec_factor.b,
      [&](const Eigen::VectorXd& mu, double tau) {
        return std::log(tau) - kLog2Pi - 0.5 * tau * (x - mu).squaredNorm();
      },
      1 << 21, 4242);
  CHECK(std::abs(expected_log_lik(x, comp) - est.mean) < 3.0 * est.stderr_);

  CHECK_THROWS_AS(expected_log_lik(Eigen::VectorXd::Zero(3), comp), std::invalid_argument);
}

TEST_CASE("update_global leaves evidence-free components at their prior")
{
  auto rng = oracles::seeded_rng(26);
  const int t = 3;
  const MixtureState prior = random_state(rng, t, 2);
  const MixtureState state = random_state(rng, t, 2);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(4, t);
  phi.col(0).setConstant(1.0);  // everything on component 0
  const Eigen::MatrixXd data = noise_data(rng, 4, 2);

  const MixtureState out = update_global(data, {phi}, prior, state);
  for (int k = 1; k < t; ++k) {
    CHECK(out.components[k].mean_factor.h == prior.components[k].mean_factor.h);
    CHECK(out.components[k].mean_factor.s == prior.components[k].mean_factor.s);
    CHECK(out.components[k].prec_factor.a == prior.components[k].prec_factor.a);
    CHECK(out.components[k].prec_factor.b == prior.components[k].prec_factor.b);
  }
}

TEST_CASE("update_global hand-executed single-point case")
{
  // d=1, x=2, phi=1, prior (h=0, s=1, a=1, b=1): gaussian step gives
  // s=2, h=2; gamma step then a=1.5, b = 1 + ((2-1)^2 + 1/2)/2 = 1.75
  const MixtureState prior = MixtureState::replicate_prior(default_prior(1), 2);
  const MixtureState state = prior;
  Eigen::MatrixXd data(1, 1);
  data << 2.0;
  Eigen::MatrixXd phi(1, 2);
  phi << 1.0, 0.0;

  const MixtureState out = update_global(data, {phi}, prior, state);
  CHECK(out.components[0].mean_factor.s == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(out.components[0].mean_factor.h[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(out.components[0].prec_factor.a == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(out.components[0].prec_factor.b == doctest::Approx(1.75).epsilon(1e-15));

  Eigen::MatrixXd bad(1, 1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(update_global(bad, {phi}, prior, state), std::invalid_argument);
}

TEST_CASE("update_global and update_local do not decrease the surrogate ELBO")
{
  auto rng = oracles::seeded_rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 20 + static_cast<int>(rng() % 30);
    const int t = 3 + static_cast<int>(rng() % 3);
    const int d = 1 + static_cast<int>(rng() % 2);
    const Eigen::MatrixXd data = noise_data(rng, n, d);
    const MixtureState prev = random_state(rng, t, d);
    const ComponentPosterior prior0 = default_prior(d);
    const double rho = 0.3 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
    const ForgettingState fs = fixed_rho_state(rho);

    MixtureState prior;
    for (int k = 0; k < t; ++k)
      prior.components.push_back(mix_natural(prev.components[k], prior0, rho));

    MixtureState state = prev;
    Responsibilities phi = random_phi(rng, n, t);
    double before = surrogate_elbo(data, state, phi, prev, prior0, fs, 0.0, 2.0);
    for (int it = 0; it < 4; ++it) {
      state = update_global(data, phi, prior, state);
      const double after_global = surrogate_elbo(data, state, phi, prev, prior0, fs, 0.0, 2.0);
      CHECK(after_global >= before - 1e-8);  // exact coordinate ascent

      // the local sweep is coordinate ascent up to the second-order count
      // approximation; its drops are bounded well below the gains
      phi = update_local(data, state, phi, 2.0);
      const double after_local = surrogate_elbo(data, state, phi, prev, prior0, fs, 0.0, 2.0);
      CHECK(after_local >= after_global - 1e-3);
      before = after_local;
    }
  }
}

TEST_CASE("update_local rows are normalized and follow the assignment prior on ties")
{
  auto rng = oracles::seeded_rng(28);
  const int n = 15;
  const int t = 4;
  // identical components: likelihood terms equal, ordering must follow the
  // assignment-prior term alone
  const MixtureState state = MixtureState::replicate_prior(default_prior(2), t);
  const Eigen::MatrixXd data = noise_data(rng, n, 2);
  const Responsibilities start{Eigen::MatrixXd::Constant(n, t, 1.0 / t)};

  const Responsibilities out = update_local(data, state, start, 2.0);
  const CountStats counts = compute_counts(start);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int k = 0; k < t; ++k) sum += out.phi(i, k);
    CHECK(std::abs(sum - 1.0) < 1e-12);

    const CountStats loo = counts_without_row(counts, start.phi.row(i).transpose());
    for (int k = 0; k + 1 < t; ++k) {
      const double pk = expected_log_assignment_prior(loo, 2.0, k);
      const double pk1 = expected_log_assignment_prior(loo, 2.0, k + 1);
      if (pk > pk1) CHECK(out.phi(i, k) > out.phi(i, k + 1));
      else CHECK(out.phi(i, k) <= out.phi(i, k + 1));
    }
  }
}

TEST_CASE("update_local concentrates on a dominant likelihood")
{
  const int t = 3;
  MixtureState state = MixtureState::replicate_prior(default_prior(2), t);
  Eigen::VectorXd far(2);
  far << 100.0, 100.0;
  state.components[1].mean_factor = {far * state.components[1].mean_factor.s,
                                     state.components[1].mean_factor.s};
  state.components[2].mean_factor = {-far * state.components[2].mean_factor.s,
                                     state.components[2].mean_factor.s};

  Eigen::MatrixXd data(1, 2);
  data << 0.1, -0.2;  // near component 0's mean
  const Responsibilities start{Eigen::MatrixXd::Constant(1, t, 1.0 / t)};
  const Responsibilities out = update_local(data, state, start, 2.0);
  CHECK(out.phi(0, 0) > 0.99);
}

TEST_CASE("update_local matches the public per-component scores")
{
  auto rng = oracles::seeded_rng(29);
  const int n = 9;
  const int t = 4;
  const Eigen::MatrixXd data = noise_data(rng, n, 2, 2.0);
  const MixtureState state = random_state(rng, t, 2);
  const Responsibilities prev = random_phi(rng, n, t);

  const Responsibilities out = update_local(data, state, prev, 1.3);
  const CountStats counts = compute_counts(prev);
  for (int i = 0; i < n; ++i) {
    const CountStats loo = counts_without_row(counts, prev.phi.row(i).transpose());
    Eigen::VectorXd score(t);
    for (int k = 0; k < t; ++k) {
      Eigen::VectorXd x = data.row(i).transpose();
      score[k] = expected_log_assignment_prior(loo, 1.3, k)
               + expected_log_lik(x, state.components[k]);
    }
    const double mx = score.maxCoeff();
    Eigen::VectorXd expect = (score.array() - mx).exp();
    expect /= expect.sum();
    for (int k = 0; k < t; ++k) {
      const double e = expect[k] < 1e-12 ? 0.0 : expect[k];
      CHECK(out.phi(i, k) == doctest::Approx(e).epsilon(1e-9));
    }
  }
}

TEST_CASE("expected_log_pz tracks enumeration on small soft instances")
{
  auto rng = oracles::seeded_rng(30);
  for (int trial = 0; trial < 3; ++trial) {
    // fully random rows maximize the count variances, the worst case for
    // the second-order expansion; this is a ballpark agreement check
    const Responsibilities phi = random_phi(rng, 7, 3);
    const double approx = expected_log_pz(compute_counts(phi), 2.0);
    const double exact = oracles::enumerate_expected_log_pz(phi.phi, 2.0);
    CHECK(std::abs(approx - exact) < 0.5);
  }
  // exact at hard assignments
  const Responsibilities hard = one_hot_phi({0, 1, 0, 2, 1}, 3);
  CHECK(expected_log_pz(compute_counts(hard), 2.0)
        == doctest::Approx(oracles::enumerate_expected_log_pz(hard.phi, 2.0)).epsilon(1e-12));
}

TEST_CASE("surrogate ELBO matches an independent straight-line recomputation")
{
  // N=2, T=2, d=1, both components at the prior, phi = ((1,0), (0,1))
  const double alpha = 2.0;
  Eigen::MatrixXd data(2, 1);
  data << 0.6, -1.2;
  const ComponentPosterior prior0 = default_prior(1);
  const MixtureState state = MixtureState::replicate_prior(prior0, 2);
  const MixtureState prev = state;
  Eigen::MatrixXd phi(2, 2);
  phi << 1.0, 0.0, 0.0, 1.0;

  const double got = surrogate_elbo(data, state, {phi}, prev, prior0, fixed_rho_state(1.0),
                                    0.0, alpha);

  // independent recomputation, term by term
  const double euler_gamma = 0.57721566490153286;
  const double e_log_tau = -euler_gamma;  // digamma(1)
  const auto ell = [&](double x) {
    return 0.5 * (e_log_tau - kLog2Pi) - 0.5 * (x * x + 1.0);
  };
  const double data_term = ell(0.6) + ell(-1.2);

  // E_q[log G0] per component: gaussian part -log(2pi)/2 - (0 + 1)/2,
  // gamma part (a0-1) E[log tau] - b0 E[tau] + a0 log b0 - lgamma(a0) = -1
  const double ce_gauss = -0.5 * kLog2Pi - 0.5;
  const double ce_gamma = -1.0;
  const double prior_term = 2.0 * (ce_gauss + ce_gamma);

  const double h_gauss = 0.5 * (1.0 + kLog2Pi);
  const double h_gamma = 1.0;
  const double entropy_term = 2.0 * (h_gauss + h_gamma);

  // one-hot counts: N_0 = 1, N_{>0} = 1, variances zero; only the k=0
  // factor exists at T=2
  const double pz = std::log(alpha) + std::lgamma(2.0) + std::lgamma(alpha + 1.0)
                  - std::lgamma(1.0 + alpha + 2.0);
  const double local_ent = 0.0;

  const double expect = data_term + prior_term + entropy_term + pz + local_ent;
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("surrogate ELBO lower-bounds the quadrature-evaluated exact-rho ELBO")
{
  auto rng = oracles::seeded_rng(37);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int t = 2 + trial % 2;
    const Eigen::MatrixXd data = noise_data(rng, 5, 2, 1.5);
    const MixtureState prev = random_state(rng, t, 2);
    const MixtureState state = random_state(rng, t, 2);
    const Responsibilities phi = random_phi(rng, 5, t);
    const ComponentPosterior prior0 = default_prior(2);

    ForgettingState fs;
    const int n_rho = trial % 2 == 0 ? 1 : t;
    fs.gamma = 0.1 + unif(rng);
    fs.omegas = Eigen::VectorXd(n_rho);
    fs.e_rho = Eigen::VectorXd(n_rho);
    for (int i = 0; i < n_rho; ++i) {
      fs.omegas[i] = -4.0 + 8.0 * unif(rng);
      fs.e_rho[i] = expected_rho(fs.omegas[i]);
    }

    const double surrogate =
        surrogate_elbo(data, state, phi, prev, prior0, fs, fs.gamma, 2.0);
    const double exact =
        elbo_oracle::exact_rho_elbo(data, state, phi, prev, prior0, fs, fs.gamma, 2.0);
    CHECK(exact - surrogate >= -1e-8);
  }
}

TEST_CASE("surrogate ELBO with rho=1 and prev=G0 equals the plain collapsed ELBO")
{
  auto rng = oracles::seeded_rng(31);
  const int n = 12;
  const int t = 3;
  const Eigen::MatrixXd data = noise_data(rng, n, 2, 2.0);
  const ComponentPosterior prior0 = default_prior(2);
  const MixtureState prev = MixtureState::replicate_prior(prior0, t);
  const MixtureState state = random_state(rng, t, 2);
  const Responsibilities phi = random_phi(rng, n, t);

  // with prev = G0 every rho gives the same prior term, which is the plain
  // collapsed ELBO's E[log G0]
  const double at_one = surrogate_elbo(data, state, phi, prev, prior0,
                                       fixed_rho_state(1.0), 0.0, 2.0);
  const double at_zero = surrogate_elbo(data, state, phi, prev, prior0,
                                        fixed_rho_state(0.0), 0.0, 2.0);
  CHECK(at_one == doctest::Approx(at_zero).epsilon(1e-12));
}

TEST_CASE("expected_mixture_weights stick values")
{
  CountStats zero;
  zero.e_nk = Eigen::VectorXd::Zero(4);
  zero.v_nk = Eigen::VectorXd::Zero(4);
  zero.e_gt = Eigen::VectorXd::Zero(4);
  zero.v_gt = Eigen::VectorXd::Zero(4);
  const MixtureWeights w = expected_mixture_weights(zero, 1.0);
  CHECK(w.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(w.weights[1] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(w.weights[2] == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(w.remainder == doctest::Approx(1.0 - w.weights.sum()).epsilon(1e-12));

  CountStats heavy = zero;
  heavy.e_nk[0] = 1e9;
  CHECK(expected_mixture_weights(heavy, 1.0).weights[0] > 0.999999);

  // N=4 split over the first two of T=3 components, alpha=2
  CountStats split;
  split.e_nk = Eigen::VectorXd::Zero(3);
  split.v_nk = Eigen::VectorXd::Zero(3);
  split.e_gt = Eigen::VectorXd::Zero(3);
  split.v_gt = Eigen::VectorXd::Zero(3);
  split.e_nk << 2.0, 2.0, 0.0;
  split.e_gt << 2.0, 0.0, 0.0;
  const MixtureWeights ws = expected_mixture_weights(split, 2.0);
  CHECK(ws.weights[0] == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
  CHECK(ws.weights[1] == doctest::Approx(12.0 / 35.0).epsilon(1e-14));
  CHECK(ws.weights[2] == doctest::Approx(8.0 / 105.0).epsilon(1e-14));
  CHECK(ws.remainder == doctest::Approx(16.0 / 105.0).epsilon(1e-12));
}

TEST_CASE("predictive log-likelihood limits and direct evaluation")
{
  // single sharp component at the generating gaussian
  const double sigma = 1.7;
  MixtureState state;
  ComponentPosterior c;
  c.mean_factor = {Eigen::VectorXd::Zero(1), 1e9};
  c.prec_factor = {1e9, 1e9 * sigma * sigma};  // E[tau] = 1/sigma^2
  state.components = {c, default_prior(1)};

  auto rng = oracles::seeded_rng(32);
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::MatrixXd test(10000, 1);
  for (int i = 0; i < test.rows(); ++i) test(i, 0) = gauss(rng);

  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  const double got = predictive_log_lik(test, state, w);
  const double neg_entropy = -0.5 * std::log(2.0 * M_PI * M_E * sigma * sigma);
  CHECK(std::abs(got - neg_entropy) < 0.1);

  // direct evaluation on a small instance
  auto rng2 = oracles::seeded_rng(33);
  const MixtureState st = random_state(rng2, 3, 2);
  Eigen::MatrixXd pts = noise_data(rng2, 5, 2, 1.5);
  Eigen::VectorXd weights(3);
  weights << 0.5, 0.3, 0.2;
  double expect = 0.0;
  for (int i = 0; i < pts.rows(); ++i) {
    double density = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double tau = st.components[k].prec_factor.a / st.components[k].prec_factor.b;
      const Eigen::VectorXd m = st.components[k].mean_factor.mean();
      const double d2 = (pts.row(i).transpose() - m).squaredNorm();
      density += weights[k] * std::pow(tau / (2.0 * M_PI), 1.0) * std::exp(-0.5 * tau * d2);
    }
    expect += std::log(density);
  }
  expect /= pts.rows();
  CHECK(predictive_log_lik(pts, st, weights) == doctest::Approx(expect).epsilon(1e-10));

  CHECK_THROWS_AS(predictive_log_lik(Eigen::MatrixXd(0, 1), state, w), std::invalid_argument);
  Eigen::VectorXd bad(2);
  bad << 0.7, 0.7;
  CHECK_THROWS_AS(predictive_log_lik(test, state, bad), std::invalid_argument);
}

TEST_CASE("anchor initialization covers separated clusters and is reproducible")
{
  // three tight, far-apart clusters; anchors must land in all of them
  auto rng = oracles::seeded_rng(35);
  std::normal_distribution<double> gauss(0.0, 0.4);
  Eigen::MatrixXd data(90, 2);
  const double centers[3][2] = {{0.0, 10.0}, {9.0, -5.0}, {-9.0, -5.0}};
  for (int i = 0; i < 90; ++i) {
    data(i, 0) = centers[i % 3][0] + gauss(rng);
    data(i, 1) = centers[i % 3][1] + gauss(rng);
  }
  const MixtureState state = MixtureState::replicate_prior(default_prior(2), 6);

  const Responsibilities a = init_phi(90, 6, PhiInit::kRandomAnchors, 7, data, state);
  const Responsibilities b = init_phi(90, 6, PhiInit::kRandomAnchors, 7, data, state);
  CHECK(a.phi == b.phi);
  a.validate();

  // rows are one-hot and every true cluster's points share a coherent set
  // of components disjoint from the other clusters' sets
  std::set<int> used[3];
  for (int i = 0; i < 90; ++i) {
    int hot = -1;
    for (int k = 0; k < 6; ++k)
      if (a.phi(i, k) == 1.0) hot = k;
    REQUIRE(hot >= 0);
    used[i % 3].insert(hot);
  }
  for (int c1 = 0; c1 < 3; ++c1)
    for (int c2 = c1 + 1; c2 < 3; ++c2)
      for (int k : used[c1]) CHECK(used[c2].count(k) == 0);
}

TEST_CASE("auto initialization switches on prior structure")
{
  auto rng = oracles::seeded_rng(36);
  const Eigen::MatrixXd data = noise_data(rng, 30, 2);

  // replicated state: auto behaves like the seeded anchors draw
  const MixtureState fresh = MixtureState::replicate_prior(default_prior(2), 4);
  CHECK(init_phi(30, 4, PhiInit::kAuto, 5, data, fresh).phi
        == init_phi(30, 4, PhiInit::kRandomAnchors, 5, data, fresh).phi);

  // structured state: auto assigns to the nearest state mean
  const MixtureState warm = random_state(rng, 4, 2);
  CHECK(init_phi(30, 4, PhiInit::kAuto, 5, data, warm).phi
        == init_phi(30, 4, PhiInit::kNearestMean, 5, data, warm).phi);
}

TEST_CASE("init_phi is reproducible and respects its mode")
{
  auto rng = oracles::seeded_rng(34);
  const Eigen::MatrixXd data = noise_data(rng, 20, 2);
  const MixtureState state = random_state(rng, 4, 2);

  const Responsibilities a = init_phi(20, 4, PhiInit::kRandomDirichlet, 99, data, state);
  const Responsibilities b = init_phi(20, 4, PhiInit::kRandomDirichlet, 99, data, state);
  const Responsibilities c = init_phi(20, 4, PhiInit::kRandomDirichlet, 100, data, state);
  CHECK(a.phi == b.phi);
  CHECK(a.phi != c.phi);
  a.validate();

  const Responsibilities near = init_phi(20, 4, PhiInit::kNearestMean, 0, data, state);
  near.validate();
  for (int i = 0; i < 20; ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
      const double d2 =
          (data.row(i).transpose() - state.components[k].mean_factor.mean()).squaredNorm();
      if (d2 < bd) {
        bd = d2;
        best = k;
      }
    }
    CHECK(near.phi(i, best) == 1.0);
  }
}

TEST_CASE("Responsibilities validation rejects broken rows")
{
  Eigen::MatrixXd bad(1, 2);
  bad << 0.7, 0.7;
  CHECK_THROWS_AS(Responsibilities{bad}.validate(), std::invalid_argument);
  bad << -0.1, 1.1;
  CHECK_THROWS_AS(Responsibilities{bad}.validate(), std::invalid_argument);
}
