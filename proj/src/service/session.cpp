#include <map>
#include <stdexcept>

#include "dragdrop/core/error.hpp"
#include "dragdrop/service/session.hpp"

namespace dragdrop::service {

using nlohmann::json;

void apply_event(SessionSnapshot& s, const json& event, const Volume& vol) {
  if (!event.is_object() || !event.contains("op") || !event["op"].is_string())
    throw SchemaError("", "edit log event needs a string \"op\"");
  const std::string op = event["op"];
  if (op == "create" || op == "config") {
    s.config = event.contains("config") ? config_from_json(event["config"]) : PropagationConfig{};
  } else if (op == "annotate") {
    if (!event.contains("annotation")) throw SchemaError("/annotation", "missing required field");
    s.annotations.push_back(dragdrop_from_json(event["annotation"], "/annotation"));
  } else if (op == "propagate") {
    try {
      s.label = propagate(vol, s.annotations, s.config);
      s.last_error.reset();
    } catch (const std::exception& e) {
      s.last_error = e.what();
    }
  } else if (op == "refine") {
    if (!event.contains("clicks") || !event["clicks"].is_array()) throw SchemaError("/clicks", "expected an array");
    std::vector<RefinementClick> clicks;
    for (std::size_t i = 0; i < event["clicks"].size(); ++i)
      clicks.push_back(click_from_json(event["clicks"][i], "/clicks/" + std::to_string(i)));
    if (!s.label) throw std::logic_error("refine before any propagation");
    s.label = refine(*s.label, clicks, vol);
  } else {
    throw SchemaError("/op", "unknown edit log op '" + op + "'");
  }
}

SessionSnapshot replay(const json& log, const Volume& vol) {
  const json& events = log.is_object() ? log.at("events") : log;
  if (!events.is_array()) throw SchemaError("/events", "expected an array");
  SessionSnapshot s;
  for (const auto& e : events) apply_event(s, e, vol);
  return s;
}

Image8 label_overlay(const PseudoLabel& label, Axis axis, int index) {
  const Index3& d = label.foreground.dims();
  const auto [ua, va] = slice_axes(axis);
  if (index < 0 || index >= d[int(axis)]) throw std::out_of_range("slice index out of range");
  Image8 img{d[ua], d[va], std::vector<std::uint8_t>(std::size_t(d[ua]) * std::size_t(d[va]), 0)};
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      const Index3 p = slice_voxel(axis, index, u, v);
      img.at(u, v) = label.foreground(p) ? 255 : label.uncertain(p) ? 128 : 0;
    }
  return img;
}

json label_summary(const PseudoLabel& label) {
  std::map<std::uint32_t, std::size_t> per_class;
  std::size_t fg = 0;
  for (auto v : label.foreground.data())
    if (v) {
      ++fg;
      ++per_class[v];
    }
  json classes = json::object();
  for (const auto& [c, n] : per_class) classes[std::to_string(c)] = n;
  return {{"foreground_voxels", fg},
          {"uncertain_voxels", count(label.uncertain)},
          {"classes", classes},
          {"annotations", label.annotations.size()},
          {"clicks", label.clicks.size()}};
}

LabelVolume uncertain_labels(const PseudoLabel& label) {
  LabelVolume out = LabelVolume::like(label.uncertain);
  out.array() = label.uncertain.array().cast<std::uint32_t>();
  return out;
}

}  // namespace dragdrop::service
