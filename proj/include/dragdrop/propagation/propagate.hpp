#pragma once

#include <string>
#include <vector>

#include "dragdrop/annotation/annotation.hpp"
#include "dragdrop/propagation/config.hpp"

namespace dragdrop {

/// Per-lesion watershed result, cropped to the region it was computed in.
struct LesionMask {
  Box roi;
  BinaryMask mask;
  std::uint32_t class_id = 1;
  double radius_mm = 1.0;
};

struct PseudoLabel {
  LabelVolume foreground;  // class id per voxel, 0 = background
  BinaryMask uncertain;    // disjoint from foreground
  PropagationConfig config;
  std::vector<DragDropAnnotation> annotations;
  std::vector<RefinementClick> clicks;  // accumulated, one per voxel, latest wins
  /// One entry per annotation, plus a trailing entry for clicks when there are no annotations.
  std::vector<LesionMask> lesions;
};

/// Box around the annotation holding both the sphere and the background shell with one voxel of context.
Box annotation_roi(const DragDropAnnotation& ann, const PropagationConfig& cfg, const Index3& dims,
                   const Vec3& spacing);

/// Throws GeometryError when the centre lies outside the volume or the radius is not positive.
/// Returns human-readable warnings for spheres crossing the border or smaller than one voxel.
std::vector<std::string> check_annotation(const DragDropAnnotation& ann, const Index3& dims, const Vec3& spacing);

PseudoLabel propagate(const Volume& vol, const std::vector<DragDropAnnotation>& anns, const PropagationConfig& cfg);

/// Adds `clicks` to those already in `prev` and recomputes every lesion that owns a click.
/// Each click belongs to the annotation with the nearest centre. Foreground clicks seed a lesion
/// ball of radius N·r, background clicks seed a single voxel; regions grow to cover their clicks.
/// With no annotations the clicks are painted directly as class 1.
PseudoLabel refine(const PseudoLabel& prev, const std::vector<RefinementClick>& clicks, const Volume& vol);

}  // namespace dragdrop
