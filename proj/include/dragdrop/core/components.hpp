#pragma once

#include <vector>

#include "dragdrop/core/grid.hpp"
#include "dragdrop/core/morphology.hpp"

namespace dragdrop {

struct Component {
  std::uint32_t label = 0;
  std::size_t voxel_count = 0;
  Vec3 centroid = Vec3::Zero();  // voxel units
  Box bbox;                      // half-open
};

struct ComponentLabeling {
  LabelVolume labels;
  std::vector<Component> components;  // components[k].label == k + 1
};

/// Labels 1..K in order of each component's first voxel in x-fastest scan order.
ComponentLabeling connected_components(const BinaryMask& mask, Connectivity connectivity);

}  // namespace dragdrop
