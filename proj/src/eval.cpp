#include "dpmstream/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace dpmstream {

namespace {

constexpr double kActiveCountThreshold = 1.0;

// relabel to dense ids 0..m-1, returns the number of distinct labels
int densify(const Eigen::VectorXi& labels, Eigen::VectorXi& out)
{
  std::map<int, int> ids;
  out.resize(labels.size());
  for (int i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(labels[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  return static_cast<int>(ids.size());
}

Eigen::MatrixXd contingency(const Eigen::VectorXi& a, int na, const Eigen::VectorXi& b, int nb)
{
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(na, nb);
  for (int i = 0; i < a.size(); ++i) n(a[i], b[i]) += 1.0;
  return n;
}

}  // namespace

Eigen::VectorXi hard_assign(const Responsibilities& resp)
{
  Eigen::VectorXi labels(resp.npoints());
  for (int i = 0; i < resp.npoints(); ++i) {
    int best = 0;
    for (int k = 1; k < resp.trunc(); ++k)
      if (resp.phi(i, k) > resp.phi(i, best)) best = k;
    labels[i] = best;
  }
  return labels;
}

double purity(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth)
{
  if (pred.size() != truth.size() || pred.size() == 0)
    throw std::invalid_argument("purity: label vectors must be nonempty and equal length");
  Eigen::VectorXi p, t;
  const int np = densify(pred, p);
  const int nt = densify(truth, t);
  const Eigen::MatrixXd n = contingency(p, np, t, nt);
  double correct = 0.0;
  for (int c = 0; c < np; ++c) correct += n.row(c).maxCoeff();
  return correct / static_cast<double>(pred.size());
}

double nmi(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth)
{
  if (pred.size() != truth.size() || pred.size() == 0)
    throw std::invalid_argument("nmi: label vectors must be nonempty and equal length");
  Eigen::VectorXi p, t;
  const int np = densify(pred, p);
  const int nt = densify(truth, t);
  if (np == 1 && nt == 1) return 1.0;

  const double total = static_cast<double>(pred.size());
  const Eigen::MatrixXd n = contingency(p, np, t, nt);
  const Eigen::VectorXd a = n.rowwise().sum();
  const Eigen::VectorXd b = n.colwise().sum();

  double mi = 0.0;
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nt; ++j)
      if (n(i, j) > 0.0)
        mi += n(i, j) / total * std::log(total * n(i, j) / (a[i] * b[j]));

  double ha = 0.0, hb = 0.0;
  for (int i = 0; i < np; ++i)
    if (a[i] > 0.0) ha -= a[i] / total * std::log(a[i] / total);
  for (int j = 0; j < nt; ++j)
    if (b[j] > 0.0) hb -= b[j] / total * std::log(b[j] / total);

  if (mi <= 1e-15) return 0.0;
  return mi / (0.5 * (ha + hb));
}

double ari(const Eigen::VectorXi& pred, const Eigen::VectorXi& truth)
{
  if (pred.size() != truth.size() || pred.size() == 0)
    throw std::invalid_argument("ari: label vectors must be nonempty and equal length");
  Eigen::VectorXi p, t;
  const int np = densify(pred, p);
  const int nt = densify(truth, t);
  const Eigen::MatrixXd n = contingency(p, np, t, nt);
  const auto choose2 = [](double x) { return 0.5 * x * (x - 1.0); };

  double sum_ij = 0.0;
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nt; ++j) sum_ij += choose2(n(i, j));
  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < np; ++i) sum_a += choose2(n.row(i).sum());
  for (int j = 0; j < nt; ++j) sum_b += choose2(n.col(j).sum());
  const double pairs = choose2(static_cast<double>(pred.size()));

  const double expected = sum_a * sum_b / pairs;
  const double maximum = 0.5 * (sum_a + sum_b);
  if (std::abs(maximum - expected) < 1e-12) return 1.0;  // both partitions trivial
  return (sum_ij - expected) / (maximum - expected);
}

double silhouette(const Eigen::MatrixXd& points, const Eigen::VectorXi& labels)
{
  const int n = static_cast<int>(points.rows());
  if (labels.size() != n || n == 0)
    throw std::invalid_argument("silhouette: labels must match points");
  Eigen::VectorXi lab;
  const int nc = densify(labels, lab);
  if (nc < 2)
    throw std::domain_error("silhouette: undefined for a single cluster");

  Eigen::VectorXi sizes = Eigen::VectorXi::Zero(nc);
  for (int i = 0; i < n; ++i) sizes[lab[i]]++;

  double total = 0.0;
  Eigen::VectorXd dsum(nc);
  for (int i = 0; i < n; ++i) {
    if (sizes[lab[i]] == 1) continue;  // singleton scores 0
    dsum.setZero();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dsum[lab[j]] += (points.row(i) - points.row(j)).norm();
    }
    const double a = dsum[lab[i]] / static_cast<double>(sizes[lab[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < nc; ++c) {
      if (c == lab[i] || sizes[c] == 0) continue;
      b = std::min(b, dsum[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost)
{
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0) return {};
  if (n > m)
    throw std::invalid_argument("min_cost_assignment: more rows than columns");

  // Kuhn-Munkres with potentials, 1-indexed internals
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0);  // column -> row
  for (int i = 1; i <= n; ++i) {
    std::vector<double> minv(m + 1, kInf);
    std::vector<int> way(m + 1, 0);
    std::vector<bool> used(m + 1, false);
    int j0 = 0;
    match[0] = i;
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

TrackResult track_parameters(const MixtureState& state, const Responsibilities& phi,
                             const GroundTruthBatch& truth)
{
  const CountStats counts = compute_counts(phi);
  const int k_true = static_cast<int>(truth.means.rows());

  std::vector<int> active;
  for (int k = 0; k < state.trunc(); ++k)
    if (counts.e_nk[k] >= kActiveCountThreshold) active.push_back(k);
  std::stable_sort(active.begin(), active.end(),
                   [&](int a, int b) { return counts.e_nk[a] > counts.e_nk[b]; });
  if (static_cast<int>(active.size()) > k_true) active.resize(k_true);

  TrackResult out;
  out.shortfall = k_true - static_cast<int>(active.size());
  if (active.empty()) return out;

  Eigen::MatrixXd cost(static_cast<int>(active.size()), k_true);
  for (std::size_t r = 0; r < active.size(); ++r) {
    const Eigen::VectorXd m = state.components[active[r]].mean_factor.mean();
    for (int c = 0; c < k_true; ++c)
      cost(static_cast<int>(r), c) = (m - truth.means.row(c).transpose()).norm();
  }
  const std::vector<int> match = min_cost_assignment(cost);

  for (std::size_t r = 0; r < active.size(); ++r) {
    const ComponentPosterior& comp = state.components[active[r]];
    const int c = match[r];
    TrackedPair pair;
    pair.component = active[r];
    pair.truth_index = c;
    pair.mean_error = cost(static_cast<int>(r), c);
    pair.std_error = std::abs(std::sqrt(comp.prec_factor.b / comp.prec_factor.a)
                              - truth.stds[c]);
    out.pairs.push_back(pair);
  }
  return out;
}

BatchMetrics compute_batch_metrics(const MixtureState& state, const Responsibilities& train_phi,
                                   const Eigen::MatrixXd& test,
                                   const Eigen::VectorXi& test_labels, double alpha,
                                   const ForgettingState& forgetting)
{
  BatchMetrics m;

  const CountStats train_counts = compute_counts(train_phi);
  const Eigen::VectorXd weights = expected_mixture_weights(train_counts, alpha).normalized();
  m.test_loglik_per_point = predictive_log_lik(test, state, weights);

  for (int k = 0; k < train_counts.trunc(); ++k)
    if (train_counts.e_nk[k] >= kActiveCountThreshold) m.n_active_components++;

  // fresh local pass over test points with frozen globals
  const int n_test = static_cast<int>(test.rows());
  Responsibilities uniform{Eigen::MatrixXd::Constant(n_test, state.trunc(),
                                                     1.0 / state.trunc())};
  const Responsibilities test_phi = update_local(test, state, uniform, alpha);
  const Eigen::VectorXi pred = hard_assign(test_phi);

  bool multi = false;
  for (int i = 1; i < pred.size(); ++i)
    if (pred[i] != pred[0]) { multi = true; break; }
  if (multi) m.silhouette = silhouette(test, pred);

  const bool labels_known = test_labels.size() == n_test
                            && (n_test == 0 || test_labels.minCoeff() >= 0);
  if (labels_known && n_test > 0) {
    m.nmi = nmi(pred, test_labels);
    m.ari = ari(pred, test_labels);
    m.purity = purity(pred, test_labels);
  }

  if (forgetting.has_rho_posterior()) {
    m.e_rho_mean = forgetting.mean_e_rho();
    m.omega_min = forgetting.omegas.minCoeff();
    m.omega_max = forgetting.omegas.maxCoeff();
  }
  return m;
}

}  // namespace dpmstream
