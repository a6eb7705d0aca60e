#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dragdrop/core/error.hpp"
#include "dragdrop/io/volume_io.hpp"
#include "dragdrop/propagation/config.hpp"

namespace dragdrop {

using nlohmann::json;

StructuringElement make_element(GradientElement e) {
  switch (e) {
    case GradientElement::cross6: return StructuringElement::cross6();
    case GradientElement::ball1: return StructuringElement::ball(1.0);
    case GradientElement::cube26: return StructuringElement::cube26();
  }
  return StructuringElement::cross6();
}

void PropagationConfig::validate() const {
  if (!(lesion_ratio > 0.0 && lesion_ratio < 1.0)) throw std::invalid_argument("N must lie in (0, 1)");
  if (!(dilation_ratio > 0.0)) throw std::invalid_argument("M must be > 0");
  if (!(sphere_tolerance > 0.0)) throw std::invalid_argument("sphere_tolerance must be > 0");
  if (!(surface_sample_fraction > 0.0 && surface_sample_fraction <= 1.0))
    throw std::invalid_argument("surface_sample_fraction must lie in (0, 1]");
  if (!(roi_margin >= 1.0)) throw std::invalid_argument("roi_margin must be >= 1");
  if (!(background_offset >= 0.0)) throw std::invalid_argument("background_offset must be >= 0");
}

json to_json(const PropagationConfig& c) {
  static const char* se_names[] = {"cross6", "ball1", "cube26"};
  return {{"N", c.lesion_ratio},
          {"M", c.dilation_ratio},
          {"sphere_tolerance", c.sphere_tolerance},
          {"surface_sample_fraction", c.surface_sample_fraction},
          {"connectivity", int(c.connectivity)},
          {"gradient_se", se_names[int(c.gradient_se)]},
          {"roi_margin", c.roi_margin},
          {"background_offset", c.background_offset},
          {"seed", c.seed}};
}

PropagationConfig config_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "propagation config must be a JSON object");
  PropagationConfig c;
  auto num = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    const json& v = j[key];
    if (!v.is_number() || !std::isfinite(v.get<double>())) throw SchemaError(std::string("/") + key, "expected a finite number");
    dst = v.get<double>();
  };
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"N", "M", "sphere_tolerance", "surface_sample_fraction", "connectivity",
                                  "gradient_se", "roi_margin", "background_offset", "seed"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw SchemaError("/" + key, "unknown propagation config key");
  }
  num("N", c.lesion_ratio);
  num("M", c.dilation_ratio);
  num("sphere_tolerance", c.sphere_tolerance);
  num("surface_sample_fraction", c.surface_sample_fraction);
  num("roi_margin", c.roi_margin);
  num("background_offset", c.background_offset);
  if (j.contains("connectivity")) {
    const json& v = j["connectivity"];
    if (v == 6) c.connectivity = Connectivity::six;
    else if (v == 26) c.connectivity = Connectivity::twenty_six;
    else throw SchemaError("/connectivity", "expected 6 or 26");
  }
  if (j.contains("gradient_se")) {
    const json& v = j["gradient_se"];
    if (v == "cross6") c.gradient_se = GradientElement::cross6;
    else if (v == "ball1") c.gradient_se = GradientElement::ball1;
    else if (v == "cube26") c.gradient_se = GradientElement::cube26;
    else throw SchemaError("/gradient_se", "expected \"cross6\", \"ball1\" or \"cube26\"");
  }
  if (j.contains("seed")) {
    const json& v = j["seed"];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw SchemaError("/seed", "expected a non-negative integer");
    c.seed = v.get<std::uint64_t>();
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError("", e.what());
  }
  return c;
}

PropagationConfig load_config(const std::string& path) {
  const auto bytes = io::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const SchemaError& e) {
    throw SchemaError(e.pointer(), e.detail() + " (in " + path + ")");
  }
}

}  // namespace dragdrop
