#include "dpmstream/stream.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dpmstream {

namespace {

std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, int line_no, const char* what)
{
  double v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("load_stream_csv: line " + std::to_string(line_no)
                             + ": malformed " + what + " '" + s + "'");
  return v;
}

long parse_long(const std::string& s, int line_no, const char* what)
{
  long v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("load_stream_csv: line " + std::to_string(line_no)
                             + ": malformed " + what + " '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line)
{
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void StreamConfig::validate() const
{
  if (n_batches < 1 || train_per_batch < 1 || test_per_batch < 1 || k_true < 1 || dim < 1)
    throw std::invalid_argument("StreamConfig: counts must be positive");
  if (drift_period < 1)
    throw std::invalid_argument("StreamConfig: drift_period must be >= 1");
  if (!(std_low > 0.0) || !(std_high >= std_low))
    throw std::invalid_argument("StreamConfig: invalid std range");
  if (!(mean_box > 0.0) || !(drift_scale >= 0.0))
    throw std::invalid_argument("StreamConfig: invalid mean_box or drift_scale");
  if (min_separation < 0.0)
    throw std::invalid_argument("StreamConfig: min_separation must be nonnegative");
}

std::vector<bool> GroundTruth::drift_flags() const
{
  std::vector<bool> flags;
  flags.reserve(batches.size());
  for (const auto& b : batches) flags.push_back(b.drift);
  return flags;
}

void GroundTruth::validate() const
{
  for (const auto& b : batches) {
    if (std::abs(b.weights.sum() - 1.0) > 1e-9 || b.weights.minCoeff() < 0.0)
      throw std::invalid_argument("GroundTruth: weights must form a simplex");
    if (b.stds.minCoeff() <= 0.0)
      throw std::invalid_argument("GroundTruth: stds must be positive");
  }
  if (!batches.empty() && batches.front().drift)
    throw std::invalid_argument("GroundTruth: first batch cannot be a drift");
}

namespace {

double min_pairwise_distance(const Eigen::MatrixXd& means)
{
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < means.rows(); ++a)
    for (int b = a + 1; b < means.rows(); ++b)
      best = std::min(best, (means.row(a) - means.row(b)).norm());
  return best;
}

// draws candidate mean sets until every pair is min_separation apart and
// all coordinates stay inside the sampling box (so drifted means remain at
// the scale the base prior covers); keeps the best candidate if the try
// budget runs out
template <typename Draw>
Eigen::MatrixXd separated_means(double min_separation, double box, const Draw& draw)
{
  constexpr int kMaxTries = 500;
  Eigen::MatrixXd best = draw();
  if (min_separation <= 0.0) return best;
  const auto contained = [box](const Eigen::MatrixXd& m) {
    return m.cwiseAbs().maxCoeff() <= box;
  };
  double best_sep = contained(best) ? min_pairwise_distance(best) : -1.0;
  for (int tries = 1; tries < kMaxTries && best_sep < min_separation; ++tries) {
    const Eigen::MatrixXd candidate = draw();
    if (!contained(candidate)) continue;
    const double sep = min_pairwise_distance(candidate);
    if (sep > best_sep) {
      best = candidate;
      best_sep = sep;
    }
  }
  return best;
}

}  // namespace

SyntheticStream generate_stream(const StreamConfig& cfg)
{
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif_mean(-cfg.mean_box, cfg.mean_box);
  std::uniform_real_distribution<double> unif_std(cfg.std_low, cfg.std_high);
  std::uniform_int_distribution<int> unif_k(0, cfg.k_true - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd means = separated_means(cfg.min_separation, cfg.mean_box, [&]() {
    Eigen::MatrixXd m(cfg.k_true, cfg.dim);
    for (int k = 0; k < cfg.k_true; ++k)
      for (int j = 0; j < cfg.dim; ++j) m(k, j) = unif_mean(rng);
    return m;
  });
  Eigen::VectorXd stds(cfg.k_true);
  for (int k = 0; k < cfg.k_true; ++k) stds[k] = unif_std(rng);

  const auto sample_split = [&](int rows, Eigen::MatrixXd& x, Eigen::VectorXi& labels) {
    x.resize(rows, cfg.dim);
    labels.resize(rows);
    for (int i = 0; i < rows; ++i) {
      const int k = unif_k(rng);
      labels[i] = k;
      for (int j = 0; j < cfg.dim; ++j) x(i, j) = means(k, j) + stds[k] * gauss(rng);
    }
  };

  SyntheticStream out;
  out.batches.reserve(cfg.n_batches);
  out.truth.batches.reserve(cfg.n_batches);
  for (int t = 0; t < cfg.n_batches; ++t) {
    const bool drift = t > 0 && (t % cfg.drift_period == 0);
    if (drift) {
      means = separated_means(cfg.min_separation, cfg.mean_box, [&]() {
        Eigen::MatrixXd m = means;
        for (int k = 0; k < cfg.k_true; ++k)
          for (int j = 0; j < cfg.dim; ++j) m(k, j) += cfg.drift_scale * gauss(rng);
        return m;
      });
      for (int k = 0; k < cfg.k_true; ++k) stds[k] = unif_std(rng);
    }

    StreamBatch batch;
    batch.t = t;
    sample_split(cfg.train_per_batch, batch.train, batch.train_labels);
    sample_split(cfg.test_per_batch, batch.test, batch.test_labels);
    out.batches.push_back(std::move(batch));

    GroundTruthBatch gt;
    gt.t = t;
    gt.means = means;
    gt.stds = stds;
    gt.weights = Eigen::VectorXd::Constant(cfg.k_true, 1.0 / cfg.k_true);
    gt.drift = drift;
    out.truth.batches.push_back(std::move(gt));
  }
  return out;
}

void save_stream(const std::vector<StreamBatch>& stream, const GroundTruth& truth,
                 const std::string& csv_path, const std::string& truth_path)
{
  if (stream.empty()) throw std::invalid_argument("save_stream: empty stream");
  const int dim = static_cast<int>(stream.front().train.cols());

  std::ofstream os(csv_path);
  if (!os) throw std::runtime_error("save_stream: cannot open " + csv_path);
  os << "t,split,label";
  for (int j = 0; j < dim; ++j) os << ",x" << j;
  os << "\n";

  const auto write_split = [&](int t, const char* split, const Eigen::MatrixXd& x,
                               const Eigen::VectorXi& labels) {
    for (int i = 0; i < x.rows(); ++i) {
      os << t << ',' << split << ',' << labels[i];
      for (int j = 0; j < dim; ++j) os << ',' << format_double(x(i, j));
      os << "\n";
    }
  };
  for (const auto& b : stream) {
    write_split(b.t, "train", b.train, b.train_labels);
    write_split(b.t, "test", b.test, b.test_labels);
  }
  if (!os) throw std::runtime_error("save_stream: write failed for " + csv_path);
  os.close();

  nlohmann::json j;
  j["batches"] = nlohmann::json::array();
  for (const auto& b : truth.batches) {
    nlohmann::json jb;
    jb["t"] = b.t;
    auto jm = nlohmann::json::array();
    for (int k = 0; k < b.means.rows(); ++k) {
      auto row = nlohmann::json::array();
      for (int c = 0; c < b.means.cols(); ++c) row.push_back(b.means(k, c));
      jm.push_back(std::move(row));
    }
    jb["means"] = std::move(jm);
    jb["stds"] = std::vector<double>(b.stds.data(), b.stds.data() + b.stds.size());
    jb["drift"] = b.drift;
    j["batches"].push_back(std::move(jb));
  }
  std::ofstream ts(truth_path);
  if (!ts) throw std::runtime_error("save_stream: cannot open " + truth_path);
  ts << j.dump(2) << "\n";
  if (!ts) throw std::runtime_error("save_stream: write failed for " + truth_path);
}

std::vector<StreamBatch> load_stream_csv(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_stream_csv: cannot open " + path);

  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("load_stream_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv(line);
  const std::vector<std::string> fixed = {"t", "split", "label"};
  for (std::size_t c = 0; c < fixed.size(); ++c) {
    if (header.size() <= c || header[c] != fixed[c])
      throw std::runtime_error("load_stream_csv: missing column '" + fixed[c] + "'");
  }
  const int dim = static_cast<int>(header.size()) - 3;
  if (dim < 1) throw std::runtime_error("load_stream_csv: missing column 'x0'");
  for (int j = 0; j < dim; ++j) {
    const std::string expect = "x" + std::to_string(j);
    if (header[3 + j] != expect)
      throw std::runtime_error("load_stream_csv: missing column '" + expect + "'");
  }

  struct Rows {
    std::vector<std::vector<double>> train, test;
    std::vector<int> train_labels, test_labels;
  };
  std::map<int, Rows> by_t;

  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != 3 + dim)
      throw std::runtime_error("load_stream_csv: line " + std::to_string(line_no)
                               + ": expected " + std::to_string(3 + dim) + " fields, got "
                               + std::to_string(cells.size()));
    const int t = static_cast<int>(parse_long(cells[0], line_no, "t"));
    const std::string& split = cells[1];
    if (split != "train" && split != "test")
      throw std::runtime_error("load_stream_csv: line " + std::to_string(line_no)
                               + ": split must be 'train' or 'test'");
    const int label = static_cast<int>(parse_long(cells[2], line_no, "label"));
    std::vector<double> x(dim);
    for (int j = 0; j < dim; ++j) x[j] = parse_double(cells[3 + j], line_no, "coordinate");

    Rows& rows = by_t[t];
    if (split == "train") {
      rows.train.push_back(std::move(x));
      rows.train_labels.push_back(label);
    } else {
      rows.test.push_back(std::move(x));
      rows.test_labels.push_back(label);
    }
  }

  std::vector<StreamBatch> out;
  out.reserve(by_t.size());
  for (auto& [t, rows] : by_t) {
    StreamBatch b;
    b.t = t;
    b.train.resize(static_cast<int>(rows.train.size()), dim);
    b.train_labels.resize(static_cast<int>(rows.train.size()));
    for (std::size_t i = 0; i < rows.train.size(); ++i) {
      for (int j = 0; j < dim; ++j) b.train(static_cast<int>(i), j) = rows.train[i][j];
      b.train_labels[static_cast<int>(i)] = rows.train_labels[i];
    }
    b.test.resize(static_cast<int>(rows.test.size()), dim);
    b.test_labels.resize(static_cast<int>(rows.test.size()));
    for (std::size_t i = 0; i < rows.test.size(); ++i) {
      for (int j = 0; j < dim; ++j) b.test(static_cast<int>(i), j) = rows.test[i][j];
      b.test_labels[static_cast<int>(i)] = rows.test_labels[i];
    }
    out.push_back(std::move(b));
  }
  return out;
}

GroundTruth load_ground_truth(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_ground_truth: cannot open " + path);
  nlohmann::json j;
  is >> j;

  GroundTruth out;
  for (const auto& jb : j.at("batches")) {
    GroundTruthBatch b;
    b.t = jb.at("t").get<int>();
    const auto& jm = jb.at("means");
    const int k = static_cast<int>(jm.size());
    const int d = k > 0 ? static_cast<int>(jm[0].size()) : 0;
    b.means.resize(k, d);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < d; ++c) b.means(r, c) = jm[r][c].get<double>();
    const auto stds = jb.at("stds").get<std::vector<double>>();
    b.stds = Eigen::Map<const Eigen::VectorXd>(stds.data(), stds.size());
    b.weights = Eigen::VectorXd::Constant(k, k > 0 ? 1.0 / k : 0.0);
    b.drift = jb.at("drift").get<bool>();
    out.batches.push_back(std::move(b));
  }
  return out;
}

}  // namespace dpmstream
