#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dragdrop/core/render.hpp"
#include "dragdrop/propagation/propagate.hpp"

namespace dragdrop::service {

/// Everything an edit log determines about a session.
struct SessionSnapshot {
  PropagationConfig config;
  std::vector<DragDropAnnotation> annotations;
  std::optional<PseudoLabel> label;
  std::optional<std::string> last_error;  // message of the last failed propagate
};

/// Edit log events, all carrying "op":
///   {"op": "create", "volume_id", "config"}
///   {"op": "config", "config"}
///   {"op": "annotate", "annotation"}
///   {"op": "propagate"}
///   {"op": "refine", "clicks"}
/// A failing propagate leaves the label untouched and records the message.
void apply_event(SessionSnapshot& s, const nlohmann::json& event, const Volume& vol);

/// Replays `log` (an object with an "events" array, or the array itself) from an empty session.
SessionSnapshot replay(const nlohmann::json& log, const Volume& vol);

/// Overlay slice: 255 foreground, 128 uncertain, 0 elsewhere.
Image8 label_overlay(const PseudoLabel& label, Axis axis, int index);

/// Voxel counts of the label: total foreground, uncertain, per class, lesion and click counts.
nlohmann::json label_summary(const PseudoLabel& label);

/// Uncertain mask as a 0/1 label volume, the form both CLI and service export.
LabelVolume uncertain_labels(const PseudoLabel& label);

}  // namespace dragdrop::service
