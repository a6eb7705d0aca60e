#pragma once

#include <vector>

#include "dragdrop/annotation/annotation.hpp"
#include "dragdrop/propagation/config.hpp"

namespace dragdrop {

/// Watershed seeds in the coordinates of the grid they were built for. Both lists are in
/// x-fastest scan order and disjoint.
struct MarkerSet {
  std::vector<Index3> lesion;
  std::vector<Index3> background;
};

/// Integer voxels v with | ‖(v − center) ⊙ spacing‖ − radius | ≤ tolerance · max(spacing),
/// clipped to `dims`. An empty shell is retried with the tolerance doubled, up to 4×;
/// throws GeometryError if it is still empty.
std::vector<Index3> sphere_surface_points(const Vec3& center_voxel, double radius_mm, const Vec3& spacing,
                                          double tolerance, const Index3& dims);

/// Voxels within physical distance `radius_mm` of `center_voxel`, always including the
/// nearest voxel to the centre when it lies inside `dims`.
std::vector<Index3> ball_points(const Vec3& center_voxel, double radius_mm, const Vec3& spacing, const Index3& dims);

/// Lesion ball of radius N·r at the annotation centre and the (sub-sampled) background shell
/// of radius r + background_offset·max(spacing). `offset` is the voxel position of the target
/// grid inside the full volume; markers are returned in target-grid coordinates.
MarkerSet build_markers(const DragDropAnnotation& ann, const PropagationConfig& cfg, const Index3& dims,
                        const Vec3& spacing, const Index3& offset = Index3::Zero());

/// Radius of the background shell for an annotation.
double background_radius(const DragDropAnnotation& ann, const PropagationConfig& cfg, const Vec3& spacing);

}  // namespace dragdrop
