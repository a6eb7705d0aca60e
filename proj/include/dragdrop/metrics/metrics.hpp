#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dragdrop/core/components.hpp"

namespace dragdrop {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Ratios from counts; std::nullopt where the denominator is zero.
std::optional<double> sensitivity(const ConfusionCounts& c);
std::optional<double> specificity(const ConfusionCounts& c);
std::optional<double> precision(const ConfusionCounts& c);
/// 2TP / (2TP + FP + FN). Identical to Dice on voxel counts.
std::optional<double> f1_score(const ConfusionCounts& c);

enum class Level { pixel, lesion, patient };
std::string to_string(Level l);

struct MatchCriterion {
  enum class Mode { any_overlap, iou };
  Mode mode = Mode::any_overlap;
  double tau = 0.5;

  static MatchCriterion any_overlap() { return {}; }
  static MatchCriterion iou(double tau);
  /// "any_overlap" or "iou:<tau>".
  static MatchCriterion parse(const std::string& s);
  std::string str() const;
  bool operator==(const MatchCriterion&) const = default;
};

struct DetectionReport {
  Level level = Level::pixel;
  ConfusionCounts counts;
  std::optional<double> sensitivity, specificity, precision, f1;
  std::optional<double> dice;  // pixel level only
  std::size_t cases = 0;

  static DetectionReport from_counts(Level level, const ConfusionCounts& c, std::size_t cases = 1);
};

/// Voxel tally over everything outside `ignore` (nullptr = no ignore mask).
ConfusionCounts pixel_counts(const BinaryMask& pred, const BinaryMask& gt, const BinaryMask* ignore = nullptr);
DetectionReport pixel_metrics(const BinaryMask& pred, const BinaryMask& gt, const BinaryMask* ignore = nullptr);

struct LesionMatch {
  /// For each gt component (index = label - 1), the pred labels that hit it, ascending.
  std::vector<std::vector<std::uint32_t>> gt_hits;
  /// Pred labels that hit no gt component, ascending.
  std::vector<std::uint32_t> unmatched_pred;
};

LesionMatch match_lesions(const ComponentLabeling& pred, const ComponentLabeling& gt, const MatchCriterion& crit);

struct EvalCase {
  const LabelVolume* pred = nullptr;
  const LabelVolume* gt = nullptr;
  bool negative_case = false;
};

/// Lesions are 26-connected components of the non-zero voxels, class-agnostic.
ComponentLabeling lesion_components(const LabelVolume& labels);

/// TP = hit gt lesions, FN = missed gt lesions, FP = unmatched pred components,
/// TN = 1 for a negative case with no pred components.
ConfusionCounts lesion_counts(const LabelVolume& pred, const LabelVolume& gt, bool negative_case,
                              const MatchCriterion& crit);
ConfusionCounts patient_counts(const LabelVolume& pred, const LabelVolume& gt);

DetectionReport lesion_level_metrics(const std::vector<EvalCase>& cases, const MatchCriterion& crit);
DetectionReport patient_level_metrics(const std::vector<EvalCase>& cases);

/// Lesion-level F1 over the case set; 0 when nothing is hit and something was missed or spurious.
double lesion_wise_validation_score(const std::vector<EvalCase>& cases, const MatchCriterion& crit);

}  // namespace dragdrop
