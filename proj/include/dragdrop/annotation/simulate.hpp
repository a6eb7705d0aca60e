#pragma once

#include <cstdint>
#include <vector>

#include "dragdrop/annotation/annotation.hpp"
#include "dragdrop/core/components.hpp"

namespace dragdrop {

/// Lesion instances of a ground-truth label: 26-connected components of gt > 0.
/// class_id is the gt value at each component's first voxel.
struct LesionInstances {
  ComponentLabeling labeling;
  std::vector<std::uint32_t> class_ids;
};

LesionInstances lesion_instances(const LabelVolume& gt);

/// Per-lesion deterministic RNG stream derived from (seed, lesion_id).
std::uint64_t lesion_stream_seed(std::uint64_t seed, std::uint32_t lesion_id);

struct DragDropSimulation {
  double sigma_frac = 0.05;
  int max_tries = 100;
};

/// Centre = component centroid plus per-axis Gaussian noise (sigma = sigma_frac * r0, r0 the
/// largest centroid-to-voxel distance), resampled until it falls inside the component and
/// replaced by the centroid after `max_tries`. Radius = largest distance from the centre to any
/// component voxel, floored at the largest spacing, so the ball always encloses the lesion.
std::vector<DragDropAnnotation> simulate_dragdrop(const LabelVolume& gt, double sigma_frac, std::uint64_t seed);
std::vector<DragDropAnnotation> simulate_dragdrop(const LabelVolume& gt, const DragDropSimulation& cfg,
                                                  std::uint64_t seed);

std::vector<BoxAnnotation> simulate_bbox(const LabelVolume& gt);

/// k voxels drawn uniformly from each lesion's bounding box, positive iff inside that lesion.
std::vector<PointsAnnotation> simulate_points(const LabelVolume& gt, int k, std::uint64_t seed);

/// Axial (z) slice with the most lesion voxels; ties go to the lowest index.
int largest_axial_slice(const ComponentLabeling& cc, std::uint32_t label);

/// Ellipse through the boundary pixels of each lesion's largest axial cross-section (mm units).
std::vector<EllipseAnnotation> simulate_ellipse(const LabelVolume& gt);

struct ScribbleSimulation {
  int max_tries = 200;
  int min_pixels = 2;
};

/// One random linear or quadratic curve inside the lesion and one in the surrounding
/// background on the lesion's largest axial slice. Throws DataError naming the lesion when
/// no curve fits after `max_tries` attempts.
std::vector<ScribbleAnnotation> simulate_scribbles(const LabelVolume& gt, std::uint64_t seed);
std::vector<ScribbleAnnotation> simulate_scribbles(const LabelVolume& gt, const ScribbleSimulation& cfg,
                                                   std::uint64_t seed);

}  // namespace dragdrop
