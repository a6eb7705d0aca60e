#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "dragdrop/core/morphology.hpp"

namespace dragdrop {

enum class GradientElement { cross6, ball1, cube26 };

StructuringElement make_element(GradientElement e);

/// Propagation parameters. JSON keys: N, M, sphere_tolerance, surface_sample_fraction,
/// connectivity, gradient_se, roi_margin, background_offset, seed.
struct PropagationConfig {
  /// Lesion-marker ball radius as a fraction of the annotated radius.
  double lesion_ratio = 0.2;
  /// Uncertainty-ring dilation radius as a fraction of the annotated radius.
  double dilation_ratio = 0.5;
  /// Half-thickness of the background shell, in units of the largest voxel spacing.
  double sphere_tolerance = 0.5;
  /// Fraction of shell voxels kept as background markers.
  double surface_sample_fraction = 1.0;
  Connectivity connectivity = Connectivity::six;
  GradientElement gradient_se = GradientElement::cross6;
  /// ROI half-extent as a multiple of the annotated radius.
  double roi_margin = 1.25;
  /// Shell centre sits this many largest-spacings outside the annotated radius.
  double background_offset = 1.5;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  bool operator==(const PropagationConfig&) const = default;
};

nlohmann::json to_json(const PropagationConfig& cfg);
/// Missing keys keep their defaults; unknown keys and bad values raise SchemaError.
PropagationConfig config_from_json(const nlohmann::json& j);
PropagationConfig load_config(const std::string& path);

}  // namespace dragdrop
