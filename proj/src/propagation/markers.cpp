#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dragdrop/annotation/simulate.hpp"
#include "dragdrop/core/error.hpp"
#include "dragdrop/propagation/markers.hpp"

namespace dragdrop {

namespace {

template <typename Pred>
std::vector<Index3> collect(const Vec3& center_voxel, double reach_mm, const Vec3& spacing, const Index3& dims,
                            Pred keep) {
  std::vector<Index3> out;
  const Box b = physical_box(center_voxel.cwiseProduct(spacing), reach_mm, spacing, dims);
  if (b.empty()) return out;
  for (int z = b.lo.z(); z < b.hi.z(); ++z)
    for (int y = b.lo.y(); y < b.hi.y(); ++y)
      for (int x = b.lo.x(); x < b.hi.x(); ++x) {
        const Index3 v(x, y, z);
        const double d = (v.cast<double>() - center_voxel).cwiseProduct(spacing).norm();
        if (keep(d)) out.push_back(v);
      }
  return out;
}

bool scan_less(const Index3& a, const Index3& b) {
  if (a.z() != b.z()) return a.z() < b.z();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.x() < b.x();
}

}  // namespace

std::vector<Index3> sphere_surface_points(const Vec3& center_voxel, double radius_mm, const Vec3& spacing,
                                          double tolerance, const Index3& dims) {
  const double ms = max_spacing(spacing);
  for (double widen = 1.0; widen <= 4.0; widen *= 2.0) {
    const double band = tolerance * widen * ms;
    auto pts = collect(center_voxel, radius_mm + band, spacing, dims,
                       [&](double d) { return std::abs(d - radius_mm) <= band; });
    if (!pts.empty()) return pts;
  }
  std::ostringstream msg;
  msg << "sphere of radius " << radius_mm << " mm around voxel (" << center_voxel.transpose()
      << ") has no voxels inside the grid";
  throw GeometryError(msg.str());
}

std::vector<Index3> ball_points(const Vec3& center_voxel, double radius_mm, const Vec3& spacing, const Index3& dims) {
  auto pts = collect(center_voxel, radius_mm, spacing, dims, [&](double d) { return d <= radius_mm; });
  const Index3 c = center_voxel.array().round().cast<int>().matrix();
  const bool inside = (c.array() >= 0).all() && (c.array() < dims.array()).all();
  if (inside && std::find(pts.begin(), pts.end(), c) == pts.end()) {
    pts.insert(std::lower_bound(pts.begin(), pts.end(), c, scan_less), c);
  }
  return pts;
}

double background_radius(const DragDropAnnotation& ann, const PropagationConfig& cfg, const Vec3& spacing) {
  return ann.radius_mm + cfg.background_offset * max_spacing(spacing);
}

MarkerSet build_markers(const DragDropAnnotation& ann, const PropagationConfig& cfg, const Index3& dims,
                        const Vec3& spacing, const Index3& offset) {
  const Vec3 center = ann.center_mm.cwiseQuotient(spacing) - offset.cast<double>();
  MarkerSet m;
  m.lesion = ball_points(center, cfg.lesion_ratio * ann.radius_mm, spacing, dims);
  if (m.lesion.empty()) throw GeometryError("annotation centre lies outside the propagation region");

  auto shell = sphere_surface_points(center, background_radius(ann, cfg, spacing), spacing, cfg.sphere_tolerance, dims);
  shell.erase(std::remove_if(shell.begin(), shell.end(),
                             [&](const Index3& v) {
                               return std::binary_search(m.lesion.begin(), m.lesion.end(), v, scan_less);
                             }),
              shell.end());
  if (shell.empty()) throw GeometryError("background shell collapses onto the lesion marker");

  if (cfg.surface_sample_fraction < 1.0) {
    const auto keep = std::max<std::size_t>(1, std::size_t(std::ceil(cfg.surface_sample_fraction * double(shell.size()))));
    std::mt19937_64 rng(lesion_stream_seed(cfg.seed, ann.lesion_id));
    std::shuffle(shell.begin(), shell.end(), rng);
    shell.resize(keep);
    std::sort(shell.begin(), shell.end(), scan_less);
  }
  m.background = std::move(shell);
  return m;
}

}  // namespace dragdrop
