#pragma once

#include <algorithm>
#include <vector>

#include "dragdrop/core/grid.hpp"

namespace dragdrop {

enum class Connectivity { six = 6, twenty_six = 26 };

/// Neighbour offsets in the fixed order used by every flood in the library:
/// 6-connectivity is (-x, +x, -y, +y, -z, +z); 26-connectivity is z-major,
/// then y, then x, each from -1 to +1, skipping the centre.
const std::vector<Index3>& neighbor_offsets(Connectivity c);

class StructuringElement {
 public:
  enum class Shape { cross6, ball, cube26, custom };

  static StructuringElement cross6();
  static StructuringElement cube26();
  /// Ellipsoidal ball with the given per-axis radii in voxels: Σ (o_i / r_i)² ≤ 1.
  static StructuringElement ball(const Vec3& radii_voxels);
  static StructuringElement ball(double radius_voxels) { return ball(Vec3::Constant(radius_voxels)); }
  /// Euclidean ball of physical radius: Σ (o_i · s_i)² ≤ r².
  static StructuringElement ball_physical(double radius_mm, const Vec3& spacing);
  /// Throws std::invalid_argument unless the set contains zero and is symmetric.
  static StructuringElement from_offsets(std::vector<Index3> offsets);

  Shape shape() const { return shape_; }
  const std::vector<Index3>& offsets() const { return offsets_; }
  std::size_t size() const { return offsets_.size(); }
  Index3 reach() const;

 private:
  StructuringElement(Shape s, std::vector<Index3> o);
  Shape shape_;
  std::vector<Index3> offsets_;
};

/// Union of translates of `mask` by every offset, clipped at the border.
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);

/// Voxels whose whole in-bounds neighbourhood is foreground.
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);

BinaryMask complement(const BinaryMask& mask);

/// Grayscale dilation minus grayscale erosion over `se`, border clipped.
template <typename Scalar>
Grid<Scalar> morphological_gradient(const Grid<Scalar>& vol, const StructuringElement& se) {
  Grid<Scalar> out = Grid<Scalar>::like(vol);
  const Index3 d = vol.dims();
  const auto& offs = se.offsets();
  for (int z = 0; z < d.z(); ++z)
    for (int y = 0; y < d.y(); ++y)
      for (int x = 0; x < d.x(); ++x) {
        const Scalar c = vol(x, y, z);
        Scalar lo = c, hi = c;
        for (const Index3& o : offs) {
          const Index3 q(x + o.x(), y + o.y(), z + o.z());
          if (!vol.contains(q)) continue;
          const Scalar v = vol(q);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        out(x, y, z) = hi - lo;
      }
  return out;
}

}  // namespace dragdrop
