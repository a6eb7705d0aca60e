#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dragdrop {

using Index3 = Eigen::Vector3i;
using Vec3 = Eigen::Vector3d;

/// Half-open voxel box [lo, hi).
struct Box {
  Index3 lo = Index3::Zero();
  Index3 hi = Index3::Zero();

  Index3 extent() const { return hi - lo; }
  bool empty() const { return (hi.array() <= lo.array()).any(); }
  bool contains(const Index3& v) const {
    return (v.array() >= lo.array()).all() && (v.array() < hi.array()).all();
  }
  std::size_t volume() const {
    if (empty()) return 0;
    const Index3 e = extent();
    return std::size_t(e.x()) * std::size_t(e.y()) * std::size_t(e.z());
  }
  Box clipped(const Index3& dims) const {
    Box b;
    b.lo = lo.cwiseMax(Index3::Zero());
    b.hi = hi.cwiseMin(dims);
    return b;
  }
  Box united(const Box& o) const {
    if (empty()) return o;
    if (o.empty()) return *this;
    return Box{lo.cwiseMin(o.lo), hi.cwiseMax(o.hi)};
  }
  bool operator==(const Box& o) const { return lo == o.lo && hi == o.hi; }
};

/// Dense 3D grid, x-fastest storage. Physical position of voxel v is v ⊙ spacing;
/// `origin` is carried for file round-trips only.
template <typename Scalar>
class Grid {
 public:
  using value_type = Scalar;
  using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

  Grid() = default;

  explicit Grid(const Index3& dims, const Vec3& spacing = Vec3::Ones(), Scalar fill = Scalar{})
      : dims_(dims), spacing_(spacing) {
    if ((dims.array() < 1).any()) throw std::invalid_argument("grid dims must be >= 1");
    if (!(spacing.array() > 0.0).all() || !spacing.allFinite())
      throw std::invalid_argument("grid spacing must be > 0");
    data_.assign(std::size_t(dims.x()) * std::size_t(dims.y()) * std::size_t(dims.z()), fill);
  }

  Grid(const Index3& dims, const Vec3& spacing, std::vector<Scalar> data) : Grid(dims, spacing) {
    if (data.size() != data_.size())
      throw std::invalid_argument("grid data length " + std::to_string(data.size()) +
                                  " does not match dims (" + std::to_string(data_.size()) + ")");
    data_ = std::move(data);
  }

  /// Same geometry as `other`, filled with `fill`.
  template <typename Other>
  static Grid like(const Grid<Other>& other, Scalar fill = Scalar{}) {
    Grid g(other.dims(), other.spacing(), fill);
    g.set_origin(other.origin());
    return g;
  }

  const Index3& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  void set_origin(const Vec3& o) { origin_ = o; }
  void set_spacing(const Vec3& s) {
    if (!(s.array() > 0.0).all()) throw std::invalid_argument("grid spacing must be > 0");
    spacing_ = s;
  }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int x, int y, int z) const {
    return std::size_t(x) + std::size_t(dims_.x()) * (std::size_t(y) + std::size_t(dims_.y()) * std::size_t(z));
  }
  std::size_t index(const Index3& v) const { return index(v.x(), v.y(), v.z()); }
  Index3 coord(std::size_t i) const {
    const auto nx = std::size_t(dims_.x()), ny = std::size_t(dims_.y());
    return Index3(int(i % nx), int((i / nx) % ny), int(i / (nx * ny)));
  }
  bool contains(const Index3& v) const {
    return (v.array() >= 0).all() && (v.array() < dims_.array()).all();
  }
  Box bounds() const { return Box{Index3::Zero(), dims_}; }

  Vec3 physical(const Index3& v) const { return v.cast<double>().cwiseProduct(spacing_); }

  Scalar& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
  const Scalar& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
  Scalar& operator()(const Index3& v) { return data_[index(v)]; }
  const Scalar& operator()(const Index3& v) const { return data_[index(v)]; }
  Scalar& operator[](std::size_t i) { return data_[i]; }
  const Scalar& operator[](std::size_t i) const { return data_[i]; }

  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  ArrayMap array() { return ArrayMap(data_.data(), Eigen::Index(data_.size())); }
  ConstArrayMap array() const { return ConstArrayMap(data_.data(), Eigen::Index(data_.size())); }

  bool same_shape(const Grid& o) const { return dims_ == o.dims_; }
  template <typename Other>
  bool same_shape(const Grid<Other>& o) const { return dims_ == o.dims(); }

  bool operator==(const Grid& o) const {
    return dims_ == o.dims_ && spacing_ == o.spacing_ && data_ == o.data_;
  }

 private:
  Index3 dims_ = Index3::Zero();
  Vec3 spacing_ = Vec3::Ones();
  Vec3 origin_ = Vec3::Zero();
  std::vector<Scalar> data_;
};

using Volume = Grid<float>;
using LabelVolume = Grid<std::uint32_t>;
using BinaryMask = Grid<std::uint8_t>;

/// Voxel box covering the physical ball (center_mm, radius_mm), clipped to dims.
inline Box physical_box(const Vec3& center_mm, double radius_mm, const Vec3& spacing, const Index3& dims) {
  Box b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = int(std::floor((center_mm[a] - radius_mm) / spacing[a]));
    b.hi[a] = int(std::ceil((center_mm[a] + radius_mm) / spacing[a])) + 1;
  }
  return b.clipped(dims);
}

inline Index3 nearest_voxel(const Vec3& center_mm, const Vec3& spacing) {
  return center_mm.cwiseQuotient(spacing).array().round().cast<int>().matrix();
}

template <typename Scalar>
Grid<Scalar> crop_roi(const Grid<Scalar>& g, const Box& box) {
  const Box b = box.clipped(g.dims());
  if (b.empty()) throw std::invalid_argument("crop_roi: box is empty after clipping");
  Grid<Scalar> out(b.extent(), g.spacing());
  out.set_origin(g.origin() + g.physical(b.lo));
  for (int z = b.lo.z(); z < b.hi.z(); ++z)
    for (int y = b.lo.y(); y < b.hi.y(); ++y) {
      const auto src = g.data().begin() + std::ptrdiff_t(g.index(b.lo.x(), y, z));
      std::copy(src, src + b.extent().x(), out.data().begin() + std::ptrdiff_t(out.index(0, y - b.lo.y(), z - b.lo.z())));
    }
  return out;
}

/// Writes `patch` back into `target` at `box.lo`. The patch must have the clipped box extent.
template <typename Scalar>
void paste_roi(Grid<Scalar>& target, const Grid<Scalar>& patch, const Box& box) {
  const Box b = box.clipped(target.dims());
  if (b.empty()) throw std::invalid_argument("paste_roi: box is empty after clipping");
  if (patch.dims() != b.extent()) throw std::invalid_argument("paste_roi: patch dims do not match box extent");
  for (int z = 0; z < patch.dims().z(); ++z)
    for (int y = 0; y < patch.dims().y(); ++y) {
      const auto src = patch.data().begin() + std::ptrdiff_t(patch.index(0, y, z));
      std::copy(src, src + patch.dims().x(),
                target.data().begin() + std::ptrdiff_t(target.index(b.lo.x(), b.lo.y() + y, b.lo.z() + z)));
    }
}

inline BinaryMask to_mask(const LabelVolume& labels) {
  BinaryMask m = BinaryMask::like(labels);
  m.array() = (labels.array() > 0u).template cast<std::uint8_t>();
  return m;
}

inline BinaryMask to_mask(const LabelVolume& labels, std::uint32_t id) {
  BinaryMask m = BinaryMask::like(labels);
  m.array() = (labels.array() == id).template cast<std::uint8_t>();
  return m;
}

inline std::size_t count(const BinaryMask& m) {
  return std::size_t(std::count_if(m.data().begin(), m.data().end(), [](std::uint8_t v) { return v != 0; }));
}

inline double max_spacing(const Vec3& spacing) { return spacing.maxCoeff(); }

}  // namespace dragdrop
