#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dragdrop/core/grid.hpp"

namespace dragdrop {

struct PhantomLesion {
  enum class Shape { sphere, ellipsoid };
  Shape shape = Shape::sphere;
  Vec3 center_mm = Vec3::Zero();
  /// Semi-axes in mm; a sphere uses x for its radius and ignores the rest.
  Vec3 size_mm = Vec3::Ones();
  /// Rotation angles in radians about z, y, x, applied as Rz·Ry·Rx.
  Vec3 rotation = Vec3::Zero();
  double delta = 100.0;

  bool contains(const Vec3& p_mm) const;
  double bounding_radius() const { return shape == Shape::sphere ? size_mm.x() : size_mm.maxCoeff(); }
  bool operator==(const PhantomLesion&) const = default;
};

struct PhantomSpec {
  Index3 dims = Index3::Constant(48);
  Vec3 spacing = Vec3::Ones();
  std::vector<PhantomLesion> lesions;
  double base_intensity = 40.0;
  /// Intensity added per mm along each axis.
  Vec3 ramp = Vec3::Zero();
  double noise_sigma = 0.0;
  bool negative_case = false;

  /// Throws std::invalid_argument on lesions outside the grid, Δ = 0, σ < 0, or a negative case with lesions.
  void validate() const;
  bool operator==(const PhantomSpec&) const = default;
};

struct Phantom {
  Volume volume;
  LabelVolume gt;  // lesion k carries label k + 1
};

/// Deterministic for a given (spec, seed). Overlapping lesions throw std::invalid_argument.
Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

struct PhantomCase {
  std::size_t index = 0;
  PhantomSpec spec;
  std::uint64_t seed = 0;
  Phantom phantom;
};

inline constexpr std::size_t kSuitePositiveCases = 20;
inline constexpr std::size_t kSuiteNegativeCases = 10;

/// 20 positive cases followed by 10 negative cases, 48³ voxels; cases 14-19 and 28-29 use
/// spacing (1, 1, 2.5).
std::vector<PhantomSpec> phantom_suite_specs(std::uint64_t seed);
std::vector<PhantomCase> phantom_suite(std::uint64_t seed);
/// Seed used to generate case k of a suite.
std::uint64_t suite_case_seed(std::uint64_t seed, std::size_t k);

nlohmann::json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

/// Writes `<dir>/volume.{f32,json}`, `<dir>/gt.{f32,json}` and `<dir>/spec.json`.
void write_phantom_case(const std::string& dir, const PhantomSpec& spec, std::uint64_t seed, const Phantom& p);

}  // namespace dragdrop
