#pragma once

#include <string>

#include <json.hpp>

#include "dpmstream/dpm.hpp"
#include "dpmstream/expfam.hpp"

namespace dpmstream {

/// {"h": [...], "s": x, "a": x, "b": x}
nlohmann::json component_to_json(const ComponentPosterior& c);
ComponentPosterior component_from_json(const nlohmann::json& j);

/// array of component objects
nlohmann::json mixture_to_json(const MixtureState& s);
MixtureState mixture_from_json(const nlohmann::json& j);

void save_mixture(const MixtureState& s, const std::string& path);
MixtureState load_mixture(const std::string& path);

/// row-major CSV dump, one row per point
void save_responsibilities_csv(const Responsibilities& phi, const std::string& path);

}  // namespace dpmstream
