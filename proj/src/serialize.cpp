#include "dpmstream/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dpmstream {

nlohmann::json component_to_json(const ComponentPosterior& c)
{
  nlohmann::json j;
  j["h"] = std::vector<double>(c.mean_factor.h.data(),
                               c.mean_factor.h.data() + c.mean_factor.h.size());
  j["s"] = c.mean_factor.s;
  j["a"] = c.prec_factor.a;
  j["b"] = c.prec_factor.b;
  return j;
}

ComponentPosterior component_from_json(const nlohmann::json& j)
{
  ComponentPosterior c;
  const auto h = j.at("h").get<std::vector<double>>();
  c.mean_factor.h = Eigen::Map<const Eigen::VectorXd>(h.data(), h.size());
  c.mean_factor.s = j.at("s").get<double>();
  c.prec_factor.a = j.at("a").get<double>();
  c.prec_factor.b = j.at("b").get<double>();
  c.validate();
  return c;
}

nlohmann::json mixture_to_json(const MixtureState& s)
{
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : s.components) j.push_back(component_to_json(c));
  return j;
}

MixtureState mixture_from_json(const nlohmann::json& j)
{
  MixtureState s;
  for (const auto& jc : j) s.components.push_back(component_from_json(jc));
  s.validate();
  return s;
}

void save_mixture(const MixtureState& s, const std::string& path)
{
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_mixture: cannot open " + path);
  os << mixture_to_json(s).dump(2) << "\n";
  if (!os) throw std::runtime_error("save_mixture: write failed for " + path);
}

MixtureState load_mixture(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_mixture: cannot open " + path);
  nlohmann::json j;
  is >> j;
  return mixture_from_json(j);
}

void save_responsibilities_csv(const Responsibilities& phi, const std::string& path)
{
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_responsibilities_csv: cannot open " + path);
  char buf[40];
  for (int i = 0; i < phi.phi.rows(); ++i) {
    for (int k = 0; k < phi.phi.cols(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", phi.phi(i, k));
      os << (k ? "," : "") << buf;
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("save_responsibilities_csv: write failed for " + path);
}

}  // namespace dpmstream
