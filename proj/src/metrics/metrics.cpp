#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "dragdrop/metrics/metrics.hpp"

namespace dragdrop {

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return double(num) / double(den);
}

}  // namespace

std::optional<double> sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
std::optional<double> specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }
std::optional<double> precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
std::optional<double> f1_score(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }

std::string to_string(Level l) {
  switch (l) {
    case Level::pixel: return "pixel";
    case Level::lesion: return "lesion";
    case Level::patient: return "patient";
  }
  return "pixel";
}

MatchCriterion MatchCriterion::iou(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("iou threshold must lie in (0, 1]");
  return MatchCriterion{Mode::iou, tau};
}

MatchCriterion MatchCriterion::parse(const std::string& s) {
  if (s == "any_overlap") return any_overlap();
  if (s.rfind("iou:", 0) == 0) {
    std::size_t used = 0;
    double tau = 0.0;
    try {
      tau = std::stod(s.substr(4), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() - 4) throw std::invalid_argument("bad iou threshold in criterion '" + s + "'");
    return iou(tau);
  }
  throw std::invalid_argument("unknown criterion '" + s + "' (expected any_overlap or iou:<tau>)");
}

std::string MatchCriterion::str() const {
  if (mode == Mode::any_overlap) return "any_overlap";
  char buf[32];
  std::snprintf(buf, sizeof buf, "iou:%g", tau);
  return buf;
}

DetectionReport DetectionReport::from_counts(Level level, const ConfusionCounts& c, std::size_t cases) {
  DetectionReport r;
  r.level = level;
  r.counts = c;
  r.cases = cases;
  r.sensitivity = dragdrop::sensitivity(c);
  r.specificity = dragdrop::specificity(c);
  r.precision = dragdrop::precision(c);
  r.f1 = f1_score(c);
  // F1 with TP = 0 and some error is 0 by its formula, which ratio() already gives.
  if (level == Level::pixel) r.dice = r.f1;
  return r;
}

ConfusionCounts pixel_counts(const BinaryMask& pred, const BinaryMask& gt, const BinaryMask* ignore) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("pixel_metrics: prediction and ground truth dims differ");
  if (ignore && !ignore->same_shape(gt)) throw std::invalid_argument("pixel_metrics: ignore mask dims differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (ignore && (*ignore)[i]) continue;
    const bool p = pred[i] != 0, g = gt[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

DetectionReport pixel_metrics(const BinaryMask& pred, const BinaryMask& gt, const BinaryMask* ignore) {
  return DetectionReport::from_counts(Level::pixel, pixel_counts(pred, gt, ignore));
}

LesionMatch match_lesions(const ComponentLabeling& pred, const ComponentLabeling& gt, const MatchCriterion& crit) {
  if (!pred.labels.same_shape(gt.labels)) throw std::invalid_argument("match_lesions: dims differ");
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> overlap;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const auto p = pred.labels[i], g = gt.labels[i];
    if (p && g) ++overlap[{g, p}];
  }
  LesionMatch m;
  m.gt_hits.resize(gt.components.size());
  std::vector<bool> pred_hit(pred.components.size(), false);
  for (const auto& [key, inter] : overlap) {
    const auto [g, p] = key;
    bool hit = true;
    if (crit.mode == MatchCriterion::Mode::iou) {
      const double uni = double(gt.components[g - 1].voxel_count + pred.components[p - 1].voxel_count - inter);
      hit = double(inter) / uni >= crit.tau;
    }
    if (hit) {
      m.gt_hits[g - 1].push_back(p);
      pred_hit[p - 1] = true;
    }
  }
  for (std::size_t k = 0; k < pred_hit.size(); ++k)
    if (!pred_hit[k]) m.unmatched_pred.push_back(std::uint32_t(k + 1));
  return m;
}

ComponentLabeling lesion_components(const LabelVolume& labels) {
  return connected_components(to_mask(labels), Connectivity::twenty_six);
}

ConfusionCounts lesion_counts(const LabelVolume& pred, const LabelVolume& gt, bool negative_case,
                              const MatchCriterion& crit) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("lesion metrics: prediction and ground truth dims differ");
  const auto pc = lesion_components(pred);
  const auto gc = lesion_components(gt);
  const auto m = match_lesions(pc, gc, crit);
  ConfusionCounts c;
  for (const auto& hits : m.gt_hits) (hits.empty() ? c.fn : c.tp) += 1;
  c.fp = m.unmatched_pred.size();
  if (negative_case && gc.components.empty() && pc.components.empty()) c.tn = 1;
  return c;
}

ConfusionCounts patient_counts(const LabelVolume& pred, const LabelVolume& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("patient metrics: prediction and ground truth dims differ");
  auto any = [](const LabelVolume& v) {
    return std::any_of(v.data().begin(), v.data().end(), [](std::uint32_t x) { return x != 0; });
  };
  const bool p = any(pred), g = any(gt);
  ConfusionCounts c;
  (p ? (g ? c.tp : c.fp) : (g ? c.fn : c.tn)) = 1;
  return c;
}

DetectionReport lesion_level_metrics(const std::vector<EvalCase>& cases, const MatchCriterion& crit) {
  ConfusionCounts total;
  for (const auto& c : cases) total += lesion_counts(*c.pred, *c.gt, c.negative_case, crit);
  return DetectionReport::from_counts(Level::lesion, total, cases.size());
}

DetectionReport patient_level_metrics(const std::vector<EvalCase>& cases) {
  ConfusionCounts total;
  for (const auto& c : cases) total += patient_counts(*c.pred, *c.gt);
  return DetectionReport::from_counts(Level::patient, total, cases.size());
}

double lesion_wise_validation_score(const std::vector<EvalCase>& cases, const MatchCriterion& crit) {
  // No lesions and no predictions anywhere is a perfect (vacuous) result.
  return lesion_level_metrics(cases, crit).f1.value_or(1.0);
}

}  // namespace dragdrop
