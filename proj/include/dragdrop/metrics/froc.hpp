#pragma once

#include <optional>
#include <vector>

#include "dragdrop/metrics/metrics.hpp"

namespace dragdrop {

struct FrocCase {
  const Volume* confidence = nullptr;
  const LabelVolume* gt = nullptr;
};

/// A 26-neighbourhood local maximum: not below any in-bounds neighbour and above at least one.
struct Candidate {
  std::size_t case_index = 0;
  std::size_t voxel = 0;
  float score = 0.0f;
};

std::vector<Candidate> local_maxima(const Volume& confidence, std::size_t case_index = 0);

struct FrocPoint {
  double threshold = 0.0;
  double fp_per_case = 0.0;
  std::optional<double> sensitivity;  // undefined without gt lesions
};

struct FrocCurve {
  std::vector<FrocPoint> points;  // descending threshold
  std::vector<double> levels;
  std::vector<std::optional<double>> sensitivity_at_levels;
  bool degenerate = false;  // no local maxima in any case
  std::size_t cases = 0;
  std::size_t gt_lesions = 0;
  MatchCriterion criterion;
};

/// Candidates are visited by descending score (ties by case, then voxel index). Each one's region
/// is its 26-connected component of {confidence ≥ score}. A candidate whose region already holds
/// an earlier candidate is absorbed; otherwise it becomes a detection, and the region decides once
/// which gt lesions it hits. Every distinct candidate score is a threshold; the point at a threshold
/// counts the detections born at or above it, so both coordinates only grow as the threshold drops.
/// Without candidates the single threshold is the global maximum and its components are scored directly.
FrocCurve froc(const std::vector<FrocCase>& cases, const MatchCriterion& crit, const std::vector<double>& levels = {});

/// Linear interpolation of sensitivity at `fp` over the curve, clamped at both ends. At equal FP/case
/// the highest sensitivity is used.
std::optional<double> interpolate_sensitivity(const std::vector<FrocPoint>& points, double fp);

}  // namespace dragdrop
