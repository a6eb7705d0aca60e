#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "dragdrop/core/grid.hpp"
#include "dragdrop/core/render.hpp"

namespace dragdrop {

/// One drag-and-drop gesture: lesion centre and a radius that encloses the lesion.
/// `center_mm` is measured from voxel (0,0,0), i.e. voxel v sits at v ⊙ spacing.
struct DragDropAnnotation {
  Vec3 center_mm = Vec3::Zero();
  double radius_mm = 1.0;
  std::uint32_t class_id = 1;
  std::uint32_t lesion_id = 0;

  bool operator==(const DragDropAnnotation&) const = default;
};

enum class Polarity { foreground, background };

struct RefinementClick {
  Index3 voxel = Index3::Zero();
  Polarity polarity = Polarity::foreground;

  bool operator==(const RefinementClick&) const = default;
};

struct BoxAnnotation {
  std::uint32_t lesion_id = 0;
  std::uint32_t class_id = 1;
  Index3 min = Index3::Zero();  // inclusive
  Index3 max = Index3::Zero();  // inclusive

  bool operator==(const BoxAnnotation&) const = default;
};

struct LabeledPoint {
  Index3 voxel = Index3::Zero();
  bool positive = false;

  bool operator==(const LabeledPoint&) const = default;
};

struct PointsAnnotation {
  std::uint32_t lesion_id = 0;
  std::uint32_t class_id = 1;
  std::vector<LabeledPoint> points;

  bool operator==(const PointsAnnotation&) const = default;
};

/// In-plane ellipse: centre and semi-axes in mm, a >= b > 0, angle of the major axis in [0, pi).
struct EllipseParams {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;
  Axis axis = Axis::z;
  int slice = 0;

  bool operator==(const EllipseParams&) const = default;
};

struct EllipseAnnotation {
  std::uint32_t lesion_id = 0;
  std::uint32_t class_id = 1;
  EllipseParams ellipse;

  bool operator==(const EllipseAnnotation&) const = default;
};

/// Rasterised foreground/background curves on one slice, in pixel coordinates.
struct ScribbleAnnotation {
  std::uint32_t lesion_id = 0;
  std::uint32_t class_id = 1;
  Axis axis = Axis::z;
  int slice = 0;
  std::vector<Eigen::Vector2i> foreground;
  std::vector<Eigen::Vector2i> background;

  bool operator==(const ScribbleAnnotation&) const = default;
};

enum class AnnotationKind { dragdrop, bbox, points, ellipse, scribble };

AnnotationKind parse_kind(const std::string& s);
const char* to_string(AnnotationKind k);

struct Provenance {
  bool simulated = false;
  std::uint64_t seed = 0;
  double sigma = 0.0;

  bool operator==(const Provenance&) const = default;
};

/// The variant alternative fixes the kind, so payloads can never disagree with it.
struct WeakAnnotationSet {
  using Items = std::variant<std::vector<DragDropAnnotation>, std::vector<BoxAnnotation>,
                             std::vector<PointsAnnotation>, std::vector<EllipseAnnotation>,
                             std::vector<ScribbleAnnotation>>;

  std::string volume;
  Provenance provenance;
  Items items;

  AnnotationKind kind() const { return AnnotationKind(items.index()); }
  bool operator==(const WeakAnnotationSet&) const = default;
};

nlohmann::json to_json(const DragDropAnnotation& a);
/// Requires lesion_id, class_id, center_mm and radius_mm.
DragDropAnnotation dragdrop_from_json(const nlohmann::json& j, const std::string& pointer = "");
nlohmann::json to_json(const RefinementClick& c);
/// {"voxel": [x, y, z], "polarity": "foreground" | "background"}.
RefinementClick click_from_json(const nlohmann::json& j, const std::string& pointer = "");

nlohmann::json to_json(const WeakAnnotationSet& set);
/// Throws SchemaError carrying a JSON pointer to the first violation.
WeakAnnotationSet annotation_set_from_json(const nlohmann::json& j);
/// Canonical text: sorted keys, two-space indent, trailing newline.
std::string serialize(const WeakAnnotationSet& set);
WeakAnnotationSet parse_annotation_set(const std::string& text);

WeakAnnotationSet load_annotations(const std::string& path);
void save_annotations(const WeakAnnotationSet& set, const std::string& path);

}  // namespace dragdrop
