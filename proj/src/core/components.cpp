#include "dragdrop/core/components.hpp"

#include <deque>

namespace dragdrop {

ComponentLabeling connected_components(const BinaryMask& mask, Connectivity connectivity) {
  ComponentLabeling out;
  out.labels = LabelVolume::like(mask);
  const auto& offs = neighbor_offsets(connectivity);
  std::deque<std::size_t> frontier;

  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || out.labels[seed]) continue;
    Component comp;
    comp.label = std::uint32_t(out.components.size() + 1);
    comp.bbox = Box{mask.coord(seed), mask.coord(seed) + Index3::Ones()};
    Vec3 sum = Vec3::Zero();

    out.labels[seed] = comp.label;
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const std::size_t i = frontier.front();
      frontier.pop_front();
      const Index3 v = mask.coord(i);
      ++comp.voxel_count;
      sum += v.cast<double>();
      comp.bbox.lo = comp.bbox.lo.cwiseMin(v);
      comp.bbox.hi = comp.bbox.hi.cwiseMax(v + Index3::Ones());
      for (const Index3& o : offs) {
        const Index3 q = v + o;
        if (!mask.contains(q)) continue;
        const std::size_t j = mask.index(q);
        if (mask[j] && !out.labels[j]) {
          out.labels[j] = comp.label;
          frontier.push_back(j);
        }
      }
    }
    comp.centroid = sum / double(comp.voxel_count);
    out.components.push_back(comp);
  }
  return out;
}

}  // namespace dragdrop
