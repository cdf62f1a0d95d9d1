#include "dpmstream/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dpmstream/eval.hpp"
#include "dpmstream/serialize.hpp"

namespace dpmstream {

namespace {

constexpr std::uint64_t kRepSeedStride = 10007;

const std::vector<std::string> kSummaryMetrics = {"loglik",  "silhouette", "nmi",
                                                  "ari",     "purity",     "n_active"};

std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string file_tag(const std::string& name)
{
  std::string tag;
  for (char c : name) {
    if (c == '(') tag += '-';
    else if (c != ')') tag += c;
  }
  return tag;
}

double mean_of(const std::vector<double>& xs)
{
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs)
{
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

template <typename T>
T field(const nlohmann::json& j, const std::string& path, const char* key, T fallback)
{
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: " + path + "." + key + " has the wrong type");
  }
}

}  // namespace

void ExperimentConfig::validate() const
{
  if (repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
  if (algorithms.empty()) throw ConfigError("config: algorithms must be nonempty");
  if (!stream && stream_csv.empty())
    throw ConfigError("config: stream requires either synthetic settings or a csv path");
  if (stream && !stream_csv.empty())
    throw ConfigError("config: stream cannot be both synthetic and csv");
  try {
    if (stream) stream->validate();
    model.validate();
    for (const auto& a : algorithms) a.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (output_dir.empty()) throw ConfigError("config: output_dir must be nonempty");
}

AlgorithmSpec parse_algorithm_string(const std::string& text)
{
  std::string name = text;
  std::vector<double> args;
  const auto open = text.find('(');
  if (open != std::string::npos) {
    if (text.back() != ')')
      throw ConfigError("config: algorithms: unbalanced parentheses in '" + text + "'");
    name = text.substr(0, open);
    std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::istringstream is(inner);
    std::string cell;
    while (std::getline(is, cell, ',')) {
      try {
        std::size_t pos = 0;
        args.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("config: algorithms: bad parameter '" + cell + "' in '" + text + "'");
      }
    }
  }

  const auto want_args = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi)
      throw ConfigError("config: algorithms: wrong parameter count in '" + text + "'");
  };

  if (name == "SVB") {
    want_args(0, 0);
    return AlgorithmSpec::svb();
  }
  if (name == "BatchVI") {
    want_args(0, 0);
    return AlgorithmSpec::batch_vi();
  }
  if (name == "Privileged") {
    want_args(0, 0);
    return AlgorithmSpec::privileged();
  }
  if (name == "PP") {
    want_args(1, 1);
    return AlgorithmSpec::pp(args[0]);
  }
  if (name == "HPP") {
    want_args(0, 1);
    return args.empty() ? AlgorithmSpec::hpp() : AlgorithmSpec::hpp(args[0]);
  }
  if (name == "MHPP") {
    want_args(0, 1);
    return args.empty() ? AlgorithmSpec::mhpp() : AlgorithmSpec::mhpp(args[0]);
  }
  if (name == "SVI") {
    want_args(0, 3);
    AlgorithmSpec s = AlgorithmSpec::svi();
    if (args.size() > 0) s.forgetting_exponent = args[0];
    if (args.size() > 1) s.delay = args[1];
    if (args.size() > 2) s.dataset_size_surrogate = args[2];
    return s;
  }
  throw ConfigError("config: algorithms: unknown algorithm '" + text + "'");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j)
{
  ExperimentConfig cfg;

  if (j.contains("stream")) {
    const auto& js = j.at("stream");
    if (!js.is_object()) throw ConfigError("config: stream must be an object");
    if (js.contains("csv")) {
      cfg.stream_csv = field<std::string>(js, "stream", "csv", "");
      cfg.stream_truth = field<std::string>(js, "stream", "truth", "");
    } else {
      StreamConfig s;
      s.n_batches = field(js, "stream", "n_batches", s.n_batches);
      s.train_per_batch = field(js, "stream", "train_per_batch", s.train_per_batch);
      s.test_per_batch = field(js, "stream", "test_per_batch", s.test_per_batch);
      s.k_true = field(js, "stream", "k_true", s.k_true);
      s.dim = field(js, "stream", "dim", s.dim);
      s.drift_period = field(js, "stream", "drift_period", s.drift_period);
      s.seed = field(js, "stream", "seed", s.seed);
      s.mean_box = field(js, "stream", "mean_box", s.mean_box);
      s.drift_scale = field(js, "stream", "drift_scale", s.drift_scale);
      s.min_separation = field(js, "stream", "min_separation", s.min_separation);
      if (js.contains("std_range")) {
        const auto r = field(js, "stream", "std_range", std::vector<double>{});
        if (r.size() != 2) throw ConfigError("config: stream.std_range must be [low, high]");
        s.std_low = r[0];
        s.std_high = r[1];
      }
      cfg.stream = s;
    }
  }

  if (j.contains("model")) {
    const auto& jm = j.at("model");
    if (!jm.is_object()) throw ConfigError("config: model must be an object");
    const int dim = field(jm, "model", "dim", 2);
    ModelConfig m(field(jm, "model", "alpha", 2.0), field(jm, "model", "trunc", 10), dim);
    m.max_iters = field(jm, "model", "max_iters", m.max_iters);
    m.tol = field(jm, "model", "tol", m.tol);
    const std::string init = field<std::string>(jm, "model", "phi_init", "auto");
    if (init == "auto") m.phi_init = PhiInit::kAuto;
    else if (init == "anchors") m.phi_init = PhiInit::kRandomAnchors;
    else if (init == "random") m.phi_init = PhiInit::kRandomDirichlet;
    else if (init == "nearest") m.phi_init = PhiInit::kNearestMean;
    else throw ConfigError(
        "config: model.phi_init must be 'auto', 'anchors', 'random' or 'nearest'");
    cfg.model = m;
  } else if (cfg.stream) {
    cfg.model = ModelConfig(2.0, 10, cfg.stream->dim);
  }

  if (j.contains("algorithms")) {
    for (const auto& ja : j.at("algorithms")) {
      if (ja.is_string()) {
        cfg.algorithms.push_back(parse_algorithm_string(ja.get<std::string>()));
      } else if (ja.is_object()) {
        const std::string kind = field<std::string>(ja, "algorithms[]", "kind", "");
        AlgorithmSpec s;
        if (kind == "SVB") s = AlgorithmSpec::svb();
        else if (kind == "BatchVI") s = AlgorithmSpec::batch_vi();
        else if (kind == "Privileged") s = AlgorithmSpec::privileged();
        else if (kind == "PP") s = AlgorithmSpec::pp(0.9);
        else if (kind == "HPP") s = AlgorithmSpec::hpp();
        else if (kind == "MHPP") s = AlgorithmSpec::mhpp();
        else if (kind == "SVI") s = AlgorithmSpec::svi();
        else throw ConfigError("config: algorithms: unknown kind '" + kind + "'");
        if (ja.contains("rho")) s.fixed_rho = field(ja, "algorithms[]", "rho", s.fixed_rho);
        if (ja.contains("gamma")) s.gamma = field(ja, "algorithms[]", "gamma", s.gamma);
        if (ja.contains("exponent"))
          s.forgetting_exponent = field(ja, "algorithms[]", "exponent", s.forgetting_exponent);
        if (ja.contains("delay")) s.delay = field(ja, "algorithms[]", "delay", s.delay);
        if (ja.contains("dataset_size"))
          s.dataset_size_surrogate = field(ja, "algorithms[]", "dataset_size",
                                           s.dataset_size_surrogate);
        cfg.algorithms.push_back(s);
      } else {
        throw ConfigError("config: algorithms entries must be strings or objects");
      }
    }
  }

  cfg.repetitions = field(j, "config", "repetitions", cfg.repetitions);
  cfg.seed = field(j, "config", "seed", cfg.seed);
  cfg.output_dir = field<std::string>(j, "config", "output_dir", cfg.output_dir);

  if (cfg.stream && cfg.model.dim != cfg.stream->dim)
    throw ConfigError("config: model.dim does not match stream.dim");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

int cmd_simulate(const ExperimentConfig& cfg)
{
  cfg.validate();
  if (!cfg.stream) throw ConfigError("config: simulate requires synthetic stream settings");
  std::filesystem::create_directories(cfg.output_dir);

  const SyntheticStream s = generate_stream(*cfg.stream);
  const auto csv = std::filesystem::path(cfg.output_dir) / "stream.csv";
  const auto truth = std::filesystem::path(cfg.output_dir) / "ground_truth.json";
  save_stream(s.batches, s.truth, csv.string(), truth.string());
  std::cout << "wrote " << csv.string() << " (" << s.batches.size() << " batches) and "
            << truth.string() << "\n";
  return 0;
}

namespace {

struct LoadedStream {
  std::vector<StreamBatch> batches;
  std::optional<GroundTruth> truth;
};

LoadedStream stream_for_rep(const ExperimentConfig& cfg, int rep)
{
  LoadedStream out;
  if (cfg.stream) {
    StreamConfig s = *cfg.stream;
    s.seed += static_cast<std::uint64_t>(rep) * kRepSeedStride;
    SyntheticStream gen = generate_stream(s);
    out.batches = std::move(gen.batches);
    out.truth = std::move(gen.truth);
  } else {
    out.batches = load_stream_csv(cfg.stream_csv);
    if (!cfg.stream_truth.empty()) out.truth = load_ground_truth(cfg.stream_truth);
  }
  return out;
}

void append_metric(std::map<std::string, std::vector<double>>& acc, const std::string& key,
                   const std::optional<double>& value)
{
  if (value) acc[key].push_back(*value);
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg)
{
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  const auto results_path = std::filesystem::path(cfg.output_dir) / "results.csv";
  std::ofstream csv(results_path);
  if (!csv) throw std::runtime_error("cmd_run: cannot open " + results_path.string());
  csv << "rep,algo,t,loglik,silhouette,nmi,ari,purity,n_active,"
         "e_rho_mean,omega_min,omega_max,wall_ms\n";

  const auto opt_cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };

  // per algorithm, per metric, one entry per repetition (mean over batches)
  std::map<std::string, std::map<std::string, std::vector<double>>> rep_means;
  std::vector<std::string> algo_names;
  for (const auto& a : cfg.algorithms) algo_names.push_back(a.name());

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const LoadedStream data = stream_for_rep(cfg, rep);
    const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(rep) * kRepSeedStride;
    std::vector<bool> flags;
    if (data.truth) flags = data.truth->drift_flags();

    for (std::size_t ai = 0; ai < cfg.algorithms.size(); ++ai) {
      const AlgorithmSpec& algo = cfg.algorithms[ai];
      const auto records = fit_stream(algo, data.batches, cfg.model, run_seed,
                                      data.truth ? &flags : nullptr);

      std::map<std::string, std::vector<double>> acc;
      for (std::size_t bi = 0; bi < records.size(); ++bi) {
        const auto& rec = records[bi];
        const StreamBatch& batch = data.batches[bi];
        const BatchMetrics m = compute_batch_metrics(rec.fit.state, rec.fit.phi, batch.test,
                                                     batch.test_labels, cfg.model.alpha,
                                                     rec.fit.forgetting);
        csv << rep << ',' << algo_names[ai] << ',' << rec.t << ','
            << format_double(m.test_loglik_per_point) << ',' << opt_cell(m.silhouette) << ','
            << opt_cell(m.nmi) << ',' << opt_cell(m.ari) << ',' << opt_cell(m.purity) << ','
            << m.n_active_components << ',' << opt_cell(m.e_rho_mean) << ','
            << opt_cell(m.omega_min) << ',' << opt_cell(m.omega_max) << ','
            << format_double(rec.wall_ms) << "\n";

        acc["loglik"].push_back(m.test_loglik_per_point);
        append_metric(acc, "silhouette", m.silhouette);
        append_metric(acc, "nmi", m.nmi);
        append_metric(acc, "ari", m.ari);
        append_metric(acc, "purity", m.purity);
        acc["n_active"].push_back(static_cast<double>(m.n_active_components));
      }
      for (const auto& [key, values] : acc)
        if (!values.empty()) rep_means[algo_names[ai]][key].push_back(mean_of(values));

      const auto ckpt = std::filesystem::path(cfg.output_dir)
                        / ("checkpoint_" + file_tag(algo_names[ai]) + "_rep"
                           + std::to_string(rep) + ".json");
      save_mixture(records.back().fit.state, ckpt.string());
    }
  }
  csv.close();
  if (!csv) throw std::runtime_error("cmd_run: write failed for " + results_path.string());

  nlohmann::json summary;
  summary["repetitions"] = cfg.repetitions;
  summary["algorithms"] = nlohmann::json::array();
  for (const auto& name : algo_names) {
    nlohmann::json ja;
    ja["name"] = name;
    nlohmann::json jm;
    for (const auto& metric : kSummaryMetrics) {
      const auto it = rep_means[name].find(metric);
      if (it == rep_means[name].end()) continue;
      jm[metric] = {{"mean", mean_of(it->second)}, {"std", sample_std(it->second)}};
    }
    ja["metrics"] = std::move(jm);
    summary["algorithms"].push_back(std::move(ja));
  }
  const auto summary_path = std::filesystem::path(cfg.output_dir) / "summary.json";
  std::ofstream js(summary_path);
  if (!js) throw std::runtime_error("cmd_run: cannot open " + summary_path.string());
  js << summary.dump(2) << "\n";
  if (!js) throw std::runtime_error("cmd_run: write failed for " + summary_path.string());

  std::cout << "wrote " << results_path.string() << " and " << summary_path.string() << "\n";
  return 0;
}

CompareTable aggregate_summaries(const std::vector<nlohmann::json>& summaries)
{
  if (summaries.empty()) throw ConfigError("compare: no summaries given");

  CompareTable table;
  std::map<std::string, std::map<std::string, std::vector<CompareCell>>> cells;

  for (const auto& s : summaries) {
    if (!s.contains("algorithms"))
      throw ConfigError("compare: summary is missing 'algorithms'");
    for (const auto& ja : s.at("algorithms")) {
      const std::string name = ja.at("name").get<std::string>();
      if (std::find(table.algorithms.begin(), table.algorithms.end(), name)
          == table.algorithms.end())
        table.algorithms.push_back(name);

      std::vector<std::string> metric_names;
      for (const auto& [metric, jv] : ja.at("metrics").items()) {
        metric_names.push_back(metric);
        cells[name][metric].push_back(
            {jv.at("mean").get<double>(), jv.at("std").get<double>()});
      }
      std::sort(metric_names.begin(), metric_names.end());
      if (table.metrics.empty()) {
        table.metrics = metric_names;
      } else if (table.metrics != metric_names) {
        throw ConfigError("compare: incompatible metric sets across summaries");
      }
    }
  }

  // stable presentation order
  const std::vector<std::string> preferred = kSummaryMetrics;
  std::vector<std::string> ordered;
  for (const auto& m : preferred)
    if (std::find(table.metrics.begin(), table.metrics.end(), m) != table.metrics.end())
      ordered.push_back(m);
  for (const auto& m : table.metrics)
    if (std::find(ordered.begin(), ordered.end(), m) == ordered.end()) ordered.push_back(m);
  table.metrics = ordered;

  table.cells.assign(table.metrics.size(),
                     std::vector<CompareCell>(table.algorithms.size()));
  for (std::size_t mi = 0; mi < table.metrics.size(); ++mi) {
    for (std::size_t ai = 0; ai < table.algorithms.size(); ++ai) {
      const auto& entries = cells[table.algorithms[ai]][table.metrics[mi]];
      if (entries.empty())
        throw ConfigError("compare: algorithm '" + table.algorithms[ai]
                          + "' lacks metric '" + table.metrics[mi] + "'");
      CompareCell cell;
      for (const auto& e : entries) {
        cell.mean += e.mean / static_cast<double>(entries.size());
        cell.std += e.std / static_cast<double>(entries.size());
      }
      table.cells[mi][ai] = cell;
    }
  }
  return table;
}

std::string render_markdown(const CompareTable& table)
{
  std::ostringstream os;
  os << "| Metric |";
  for (const auto& a : table.algorithms) os << ' ' << a << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < table.algorithms.size(); ++i) os << "---|";
  os << "\n";

  char buf[80];
  for (std::size_t mi = 0; mi < table.metrics.size(); ++mi) {
    int best = -1;
    for (std::size_t ai = 0; ai < table.algorithms.size(); ++ai) {
      if (table.algorithms[ai] == "Privileged") continue;
      if (best < 0 || table.cells[mi][ai].mean > table.cells[mi][best].mean)
        best = static_cast<int>(ai);
    }
    os << "| " << table.metrics[mi] << " |";
    for (std::size_t ai = 0; ai < table.algorithms.size(); ++ai) {
      const auto& c = table.cells[mi][ai];
      std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", c.mean, c.std);
      if (static_cast<int>(ai) == best) os << " **" << buf << "** |";
      else os << ' ' << buf << " |";
    }
    os << "\n";
  }
  return os.str();
}

std::string render_csv(const CompareTable& table)
{
  std::ostringstream os;
  os << "metric,algorithm,mean,std\n";
  for (std::size_t mi = 0; mi < table.metrics.size(); ++mi)
    for (std::size_t ai = 0; ai < table.algorithms.size(); ++ai)
      os << table.metrics[mi] << ',' << table.algorithms[ai] << ','
         << format_double(table.cells[mi][ai].mean) << ','
         << format_double(table.cells[mi][ai].std) << "\n";
  return os.str();
}

int cmd_compare(const std::vector<std::string>& summary_paths,
                const std::string& markdown_out, const std::string& csv_out)
{
  if (summary_paths.empty()) throw ConfigError("compare: at least one summary is required");
  std::vector<nlohmann::json> summaries;
  for (const auto& p : summary_paths) {
    std::ifstream is(p);
    if (!is) throw ConfigError("compare: cannot open " + p);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("compare: " + p + ": " + e.what());
    }
    summaries.push_back(std::move(j));
  }

  const CompareTable table = aggregate_summaries(summaries);
  const std::string md = render_markdown(table);
  std::cout << md;
  if (!markdown_out.empty()) {
    std::ofstream os(markdown_out);
    if (!os) throw std::runtime_error("compare: cannot open " + markdown_out);
    os << md;
  }
  if (!csv_out.empty()) {
    std::ofstream os(csv_out);
    if (!os) throw std::runtime_error("compare: cannot open " + csv_out);
    os << render_csv(table);
  }
  return 0;
}

}  // namespace dpmstream
