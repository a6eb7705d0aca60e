#include <cmath>
#include <string>

#include "dragdrop/annotation/annotation.hpp"
#include "dragdrop/core/error.hpp"
#include "dragdrop/io/volume_io.hpp"

namespace dragdrop {

using nlohmann::json;

AnnotationKind parse_kind(const std::string& s) {
  if (s == "dragdrop") return AnnotationKind::dragdrop;
  if (s == "bbox") return AnnotationKind::bbox;
  if (s == "points") return AnnotationKind::points;
  if (s == "ellipse") return AnnotationKind::ellipse;
  if (s == "scribble") return AnnotationKind::scribble;
  throw std::invalid_argument("unknown annotation kind '" + s + "'");
}

const char* to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::dragdrop: return "dragdrop";
    case AnnotationKind::bbox: return "bbox";
    case AnnotationKind::points: return "points";
    case AnnotationKind::ellipse: return "ellipse";
    case AnnotationKind::scribble: return "scribble";
  }
  return "?";
}

namespace {

json vec(const Index3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }
json pixels(const std::vector<Eigen::Vector2i>& px) {
  json a = json::array();
  for (const auto& p : px) a.push_back(json::array({p.x(), p.y()}));
  return a;
}

json item_json(const DragDropAnnotation& a) {
  return {{"lesion_id", a.lesion_id}, {"class_id", a.class_id}, {"center_mm", vec(a.center_mm)}, {"radius_mm", a.radius_mm}};
}
json item_json(const BoxAnnotation& b) {
  return {{"lesion_id", b.lesion_id}, {"class_id", b.class_id}, {"min", vec(b.min)}, {"max", vec(b.max)}};
}
json item_json(const PointsAnnotation& p) {
  json pts = json::array();
  for (const auto& q : p.points) pts.push_back({{"voxel", vec(q.voxel)}, {"positive", q.positive}});
  return {{"lesion_id", p.lesion_id}, {"class_id", p.class_id}, {"points", pts}};
}
json item_json(const EllipseAnnotation& e) {
  return {{"lesion_id", e.lesion_id},
          {"class_id", e.class_id},
          {"axis", to_string(e.ellipse.axis)},
          {"slice", e.ellipse.slice},
          {"center", vec(e.ellipse.center)},
          {"semi_axes", json::array({e.ellipse.a, e.ellipse.b})},
          {"angle", e.ellipse.theta}};
}
json item_json(const ScribbleAnnotation& s) {
  return {{"lesion_id", s.lesion_id}, {"class_id", s.class_id},           {"axis", to_string(s.axis)},
          {"slice", s.slice},         {"foreground", pixels(s.foreground)}, {"background", pixels(s.background)}};
}

// --- parsing helpers: every failure names the JSON pointer of the offending value.

const json& field(const json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ptr + "/" + key, "missing required field");
  return *it;
}

double number(const json& v, const std::string& ptr) {
  if (!v.is_number()) throw SchemaError(ptr, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(ptr, "expected a finite number");
  return d;
}

std::int64_t integer(const json& v, const std::string& ptr) {
  if (!v.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  return v.get<std::int64_t>();
}

std::uint32_t positive_id(const json& v, const std::string& ptr, bool allow_zero) {
  const auto i = integer(v, ptr);
  if (i < (allow_zero ? 0 : 1) || i > 0xffffffffLL)
    throw SchemaError(ptr, allow_zero ? "expected a non-negative integer" : "expected a positive integer");
  return std::uint32_t(i);
}

template <int N>
Eigen::Matrix<double, N, 1> number_array(const json& v, const std::string& ptr) {
  if (!v.is_array() || v.size() != N) throw SchemaError(ptr, "expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = number(v[std::size_t(i)], ptr + "/" + std::to_string(i));
  return out;
}

template <int N>
Eigen::Matrix<int, N, 1> int_array(const json& v, const std::string& ptr) {
  if (!v.is_array() || v.size() != N) throw SchemaError(ptr, "expected an array of " + std::to_string(N) + " integers");
  Eigen::Matrix<int, N, 1> out;
  for (int i = 0; i < N; ++i) {
    const auto x = integer(v[std::size_t(i)], ptr + "/" + std::to_string(i));
    if (x < -2147483647LL || x > 2147483647LL) throw SchemaError(ptr + "/" + std::to_string(i), "integer out of range");
    out[i] = int(x);
  }
  return out;
}

std::vector<Eigen::Vector2i> pixel_list(const json& v, const std::string& ptr) {
  if (!v.is_array()) throw SchemaError(ptr, "expected an array of [u, v] pixels");
  std::vector<Eigen::Vector2i> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(int_array<2>(v[i], ptr + "/" + std::to_string(i)));
  return out;
}

Axis axis_field(const json& obj, const std::string& ptr) {
  const json& a = field(obj, "axis", ptr);
  if (!a.is_string()) throw SchemaError(ptr + "/axis", "expected \"x\", \"y\" or \"z\"");
  try {
    return parse_axis(a.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(ptr + "/axis", e.what());
  }
}

void parse_common(const json& it, const std::string& ptr, std::uint32_t& lesion_id, std::uint32_t& class_id) {
  lesion_id = positive_id(field(it, "lesion_id", ptr), ptr + "/lesion_id", true);
  class_id = positive_id(field(it, "class_id", ptr), ptr + "/class_id", false);
}

DragDropAnnotation parse_item(const json& it, const std::string& ptr, DragDropAnnotation*) {
  DragDropAnnotation a;
  parse_common(it, ptr, a.lesion_id, a.class_id);
  a.center_mm = number_array<3>(field(it, "center_mm", ptr), ptr + "/center_mm");
  a.radius_mm = number(field(it, "radius_mm", ptr), ptr + "/radius_mm");
  if (!(a.radius_mm > 0.0)) throw SchemaError(ptr + "/radius_mm", "radius must be > 0");
  return a;
}

BoxAnnotation parse_item(const json& it, const std::string& ptr, BoxAnnotation*) {
  BoxAnnotation b;
  parse_common(it, ptr, b.lesion_id, b.class_id);
  b.min = int_array<3>(field(it, "min", ptr), ptr + "/min");
  b.max = int_array<3>(field(it, "max", ptr), ptr + "/max");
  if ((b.max.array() < b.min.array()).any()) throw SchemaError(ptr + "/max", "box max must be >= min on every axis");
  return b;
}

PointsAnnotation parse_item(const json& it, const std::string& ptr, PointsAnnotation*) {
  PointsAnnotation p;
  parse_common(it, ptr, p.lesion_id, p.class_id);
  const json& pts = field(it, "points", ptr);
  if (!pts.is_array()) throw SchemaError(ptr + "/points", "expected an array");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string pp = ptr + "/points/" + std::to_string(i);
    LabeledPoint q;
    q.voxel = int_array<3>(field(pts[i], "voxel", pp), pp + "/voxel");
    const json& pos = field(pts[i], "positive", pp);
    if (!pos.is_boolean()) throw SchemaError(pp + "/positive", "expected a boolean");
    q.positive = pos.get<bool>();
    p.points.push_back(q);
  }
  return p;
}

EllipseAnnotation parse_item(const json& it, const std::string& ptr, EllipseAnnotation*) {
  EllipseAnnotation e;
  parse_common(it, ptr, e.lesion_id, e.class_id);
  e.ellipse.axis = axis_field(it, ptr);
  e.ellipse.slice = int(integer(field(it, "slice", ptr), ptr + "/slice"));
  e.ellipse.center = number_array<2>(field(it, "center", ptr), ptr + "/center");
  const Eigen::Vector2d ax = number_array<2>(field(it, "semi_axes", ptr), ptr + "/semi_axes");
  if (!(ax[0] >= ax[1] && ax[1] > 0.0)) throw SchemaError(ptr + "/semi_axes", "semi-axes must satisfy a >= b > 0");
  e.ellipse.a = ax[0];
  e.ellipse.b = ax[1];
  e.ellipse.theta = number(field(it, "angle", ptr), ptr + "/angle");
  if (!(e.ellipse.theta >= 0.0 && e.ellipse.theta < 3.141592653589793))
    throw SchemaError(ptr + "/angle", "angle must lie in [0, pi)");
  return e;
}

ScribbleAnnotation parse_item(const json& it, const std::string& ptr, ScribbleAnnotation*) {
  ScribbleAnnotation s;
  parse_common(it, ptr, s.lesion_id, s.class_id);
  s.axis = axis_field(it, ptr);
  s.slice = int(integer(field(it, "slice", ptr), ptr + "/slice"));
  s.foreground = pixel_list(field(it, "foreground", ptr), ptr + "/foreground");
  s.background = pixel_list(field(it, "background", ptr), ptr + "/background");
  return s;
}

template <typename T>
std::vector<T> parse_items(const json& items) {
  std::vector<T> out;
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string ptr = "/items/" + std::to_string(i);
    out.push_back(parse_item(items[i], ptr, static_cast<T*>(nullptr)));
    const std::uint32_t id = out.back().lesion_id;
    if (std::find(ids.begin(), ids.end(), id) != ids.end())
      throw SchemaError(ptr + "/lesion_id", "duplicate lesion_id " + std::to_string(id));
    ids.push_back(id);
  }
  return out;
}

}  // namespace

json to_json(const WeakAnnotationSet& set) {
  json j;
  j["version"] = 1;
  j["kind"] = to_string(set.kind());
  j["volume"] = set.volume;
  if (set.provenance.simulated)
    j["provenance"] = {{"type", "simulated"}, {"seed", set.provenance.seed}, {"sigma", set.provenance.sigma}};
  else
    j["provenance"] = {{"type", "manual"}};
  json items = json::array();
  std::visit([&](const auto& v) {
    for (const auto& it : v) items.push_back(item_json(it));
  }, set.items);
  j["items"] = std::move(items);
  return j;
}

WeakAnnotationSet annotation_set_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "expected a JSON object");
  const json& version = field(j, "version", "");
  if (!version.is_number_integer() || version.get<int>() != 1) throw SchemaError("/version", "unsupported version (expected 1)");
  const json& kind_v = field(j, "kind", "");
  if (!kind_v.is_string()) throw SchemaError("/kind", "expected a string");
  AnnotationKind kind;
  try {
    kind = parse_kind(kind_v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw SchemaError("/kind", e.what());
  }

  WeakAnnotationSet set;
  if (j.contains("volume")) {
    if (!j["volume"].is_string()) throw SchemaError("/volume", "expected a string");
    set.volume = j["volume"].get<std::string>();
  }
  if (j.contains("provenance")) {
    const json& p = j["provenance"];
    const json& type = field(p, "type", "/provenance");
    if (type == "simulated") {
      set.provenance.simulated = true;
      const json& seed = field(p, "seed", "/provenance");
      if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
        throw SchemaError("/provenance/seed", "expected a non-negative integer");
      set.provenance.seed = seed.get<std::uint64_t>();
      set.provenance.sigma = number(field(p, "sigma", "/provenance"), "/provenance/sigma");
    } else if (type != "manual") {
      throw SchemaError("/provenance/type", "expected \"manual\" or \"simulated\"");
    }
  }
  const json& items = field(j, "items", "");
  if (!items.is_array()) throw SchemaError("/items", "expected an array");
  switch (kind) {
    case AnnotationKind::dragdrop: set.items = parse_items<DragDropAnnotation>(items); break;
    case AnnotationKind::bbox: set.items = parse_items<BoxAnnotation>(items); break;
    case AnnotationKind::points: set.items = parse_items<PointsAnnotation>(items); break;
    case AnnotationKind::ellipse: set.items = parse_items<EllipseAnnotation>(items); break;
    case AnnotationKind::scribble: set.items = parse_items<ScribbleAnnotation>(items); break;
  }
  return set;
}

std::string serialize(const WeakAnnotationSet& set) { return to_json(set).dump(2) + "\n"; }

WeakAnnotationSet parse_annotation_set(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return annotation_set_from_json(j);
}

WeakAnnotationSet load_annotations(const std::string& path) {
  const auto bytes = io::read_file(path);
  try {
    return parse_annotation_set(std::string(bytes.begin(), bytes.end()));
  } catch (const SchemaError& e) {
    throw SchemaError(e.pointer(), e.detail() + " (in " + path + ")");
  }
}

void save_annotations(const WeakAnnotationSet& set, const std::string& path) { io::write_text(path, serialize(set)); }

json to_json(const DragDropAnnotation& a) { return item_json(a); }

DragDropAnnotation dragdrop_from_json(const json& j, const std::string& pointer) {
  return parse_item(j, pointer, static_cast<DragDropAnnotation*>(nullptr));
}

json to_json(const RefinementClick& c) {
  return {{"voxel", vec(c.voxel)}, {"polarity", c.polarity == Polarity::foreground ? "foreground" : "background"}};
}

RefinementClick click_from_json(const json& j, const std::string& pointer) {
  RefinementClick c;
  c.voxel = int_array<3>(field(j, "voxel", pointer), pointer + "/voxel");
  const json& p = field(j, "polarity", pointer);
  if (p == "foreground") c.polarity = Polarity::foreground;
  else if (p == "background") c.polarity = Polarity::background;
  else throw SchemaError(pointer + "/polarity", "expected \"foreground\" or \"background\"");
  return c;
}

}  // namespace dragdrop
