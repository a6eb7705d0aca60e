#pragma once

#include <cstdint>

#include "dragdrop/core/morphology.hpp"
#include "dragdrop/propagation/markers.hpp"

namespace dragdrop {

namespace basin {
inline constexpr std::uint8_t unassigned = 0;
inline constexpr std::uint8_t lesion = 1;
inline constexpr std::uint8_t background = 2;
}  // namespace basin

/// Marker-controlled priority flood over `gradient`.
///
/// Markers are labelled first (lesion list, then background list). Each marker then queues
/// its unlabelled neighbours with priority equal to their gradient value, in the same order.
/// Entries pop by (priority, insertion order); a popped voxel that is still unlabelled takes
/// the label of the voxel that queued it and queues its own unlabelled neighbours. Every voxel
/// connected to a marker ends up labelled. Throws std::invalid_argument when both marker lists
/// are empty, a marker is out of bounds, or the lists overlap.
Grid<std::uint8_t> watershed(const Volume& gradient, const MarkerSet& markers, Connectivity conn);

}  // namespace dragdrop
