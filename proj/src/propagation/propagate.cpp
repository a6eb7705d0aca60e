#include <cmath>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dragdrop/core/error.hpp"
#include "dragdrop/propagation/markers.hpp"
#include "dragdrop/propagation/propagate.hpp"
#include "dragdrop/propagation/watershed.hpp"

namespace dragdrop {

namespace {

constexpr int kClickContext = 2;

Box click_box(const std::vector<RefinementClick>& clicks) {
  Box b;
  for (const auto& c : clicks) b = b.united(Box{c.voxel, c.voxel + Index3::Ones()});
  return b;
}

LesionMask run_lesion(const Volume& vol, const DragDropAnnotation& ann, const PropagationConfig& cfg,
                      const std::vector<RefinementClick>& clicks) {
  const Vec3& sp = vol.spacing();
  Box roi = annotation_roi(ann, cfg, vol.dims(), sp);
  if (!clicks.empty()) {
    Box cb = click_box(clicks);
    cb.lo -= Index3::Constant(kClickContext);
    cb.hi += Index3::Constant(kClickContext);
    roi = roi.united(cb).clipped(vol.dims());
  }
  const Volume sub = crop_roi(vol, roi);
  const Volume grad = morphological_gradient(sub, make_element(cfg.gradient_se));
  MarkerSet markers = build_markers(ann, cfg, roi.extent(), sp, roi.lo);

  if (!clicks.empty()) {
    BinaryMask seeds = BinaryMask::like(sub, basin::unassigned);
    for (const Index3& v : markers.lesion) seeds(v) = basin::lesion;
    for (const Index3& v : markers.background) seeds(v) = basin::background;
    for (const auto& c : clicks) {
      const Index3 local = c.voxel - roi.lo;
      if (c.polarity == Polarity::foreground) {
        for (const Index3& v : ball_points(local.cast<double>(), cfg.lesion_ratio * ann.radius_mm, sp, roi.extent()))
          seeds(v) = basin::lesion;
      } else {
        seeds(local) = basin::background;
      }
    }
    // Clicks override each other in the order given; re-apply to let the latest win on single voxels.
    for (const auto& c : clicks) seeds(c.voxel - roi.lo) = c.polarity == Polarity::foreground ? basin::lesion : basin::background;
    markers.lesion.clear();
    markers.background.clear();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (seeds[i] == basin::lesion) markers.lesion.push_back(seeds.coord(i));
      if (seeds[i] == basin::background) markers.background.push_back(seeds.coord(i));
    }
  }

  const auto basins = watershed(grad, markers, cfg.connectivity);
  LesionMask out{roi, BinaryMask::like(sub), ann.class_id, ann.radius_mm};
  out.mask.array() = (basins.array() == basin::lesion).cast<std::uint8_t>();
  return out;
}

LesionMask paint_clicks(const Volume& vol, const std::vector<RefinementClick>& clicks) {
  const Box roi = click_box(clicks).clipped(vol.dims());
  LesionMask out{roi, BinaryMask(roi.extent(), vol.spacing()), 1, max_spacing(vol.spacing())};
  for (const auto& c : clicks) out.mask(c.voxel - roi.lo) = c.polarity == Polarity::foreground ? 1 : 0;
  return out;
}

void compose(PseudoLabel& pl, const Volume& vol) {
  pl.foreground = LabelVolume::like(vol, 0u);
  pl.uncertain = BinaryMask::like(vol, 0);
  const Vec3& sp = vol.spacing();
  for (const auto& l : pl.lesions) {
    for (int z = 0; z < l.mask.dims().z(); ++z)
      for (int y = 0; y < l.mask.dims().y(); ++y)
        for (int x = 0; x < l.mask.dims().x(); ++x) {
          if (!l.mask(x, y, z)) continue;
          auto& dst = pl.foreground(l.roi.lo + Index3(x, y, z));
          dst = std::max(dst, l.class_id);
        }
  }
  for (const auto& l : pl.lesions) {
    const double r = pl.config.dilation_ratio * l.radius_mm;
    Index3 pad;
    for (int a = 0; a < 3; ++a) pad[a] = int(std::ceil(r / sp[a])) + 1;
    const Box region = Box{l.roi.lo - pad, l.roi.hi + pad}.clipped(vol.dims());
    BinaryMask local(region.extent(), sp);
    const Index3 shift = l.roi.lo - region.lo;
    for (int z = 0; z < l.mask.dims().z(); ++z)
      for (int y = 0; y < l.mask.dims().y(); ++y)
        for (int x = 0; x < l.mask.dims().x(); ++x)
          if (l.mask(x, y, z)) local(shift + Index3(x, y, z)) = 1;
    const BinaryMask grown = dilate(local, StructuringElement::ball_physical(r, sp));
    for (int z = 0; z < grown.dims().z(); ++z)
      for (int y = 0; y < grown.dims().y(); ++y)
        for (int x = 0; x < grown.dims().x(); ++x)
          if (grown(x, y, z)) pl.uncertain(region.lo + Index3(x, y, z)) = 1;
  }
  for (std::size_t i = 0; i < pl.uncertain.size(); ++i)
    if (pl.foreground[i]) pl.uncertain[i] = 0;
}

std::size_t nearest_annotation(const std::vector<DragDropAnnotation>& anns, const Index3& voxel, const Vec3& sp) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const Vec3 p = voxel.cast<double>().cwiseProduct(sp);
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const double d = (anns[i].center_mm - p).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

Box annotation_roi(const DragDropAnnotation& ann, const PropagationConfig& cfg, const Index3& dims,
                   const Vec3& spacing) {
  const double ms = max_spacing(spacing);
  const double half = std::max(cfg.roi_margin * ann.radius_mm,
                               ann.radius_mm + (cfg.background_offset + cfg.sphere_tolerance + 1.0) * ms);
  const Box b = physical_box(ann.center_mm, half, spacing, dims);
  if (b.empty()) throw GeometryError("annotation region does not intersect the volume");
  return b;
}

std::vector<std::string> check_annotation(const DragDropAnnotation& ann, const Index3& dims, const Vec3& spacing) {
  std::ostringstream id;
  id << "lesion " << ann.lesion_id;
  if (!(ann.radius_mm > 0.0) || !std::isfinite(ann.radius_mm))
    throw GeometryError(id.str() + ": radius must be positive");
  const Index3 c = nearest_voxel(ann.center_mm, spacing);
  if (!ann.center_mm.allFinite() || (c.array() < 0).any() || (c.array() >= dims.array()).any())
    throw GeometryError(id.str() + ": centre lies outside the volume");
  std::vector<std::string> warnings;
  const Vec3 extent_mm = (dims.cast<double>() - Vec3::Ones()).cwiseProduct(spacing);
  if ((ann.center_mm.array() - ann.radius_mm < 0.0).any() || (ann.center_mm.array() + ann.radius_mm > extent_mm.array()).any())
    warnings.push_back(id.str() + ": sphere extends beyond the volume");
  if (ann.radius_mm < max_spacing(spacing)) warnings.push_back(id.str() + ": radius is smaller than one voxel");
  return warnings;
}

PseudoLabel propagate(const Volume& vol, const std::vector<DragDropAnnotation>& anns, const PropagationConfig& cfg) {
  cfg.validate();
  PseudoLabel pl;
  pl.config = cfg;
  pl.annotations = anns;
  for (const auto& a : anns) {
    check_annotation(a, vol.dims(), vol.spacing());
    pl.lesions.push_back(run_lesion(vol, a, cfg, {}));
    spdlog::debug("lesion {}: {} foreground voxels in roi of {}", a.lesion_id, count(pl.lesions.back().mask),
                  pl.lesions.back().roi.volume());
  }
  compose(pl, vol);
  return pl;
}

PseudoLabel refine(const PseudoLabel& prev, const std::vector<RefinementClick>& clicks, const Volume& vol) {
  if (!prev.foreground.same_shape(vol)) throw std::invalid_argument("refine: volume does not match the pseudo-label");
  for (const auto& c : clicks)
    if (!vol.contains(c.voxel)) throw GeometryError("refinement click lies outside the volume");
  if (clicks.empty()) return prev;

  PseudoLabel pl = prev;
  for (const auto& c : clicks) {
    std::erase_if(pl.clicks, [&](const RefinementClick& o) { return o.voxel == c.voxel; });
    pl.clicks.push_back(c);
  }

  if (pl.annotations.empty()) {
    pl.lesions = {paint_clicks(vol, pl.clicks)};
  } else {
    std::vector<std::vector<RefinementClick>> owned(pl.annotations.size());
    for (const auto& c : pl.clicks) owned[nearest_annotation(pl.annotations, c.voxel, vol.spacing())].push_back(c);
    std::vector<bool> touched(pl.annotations.size(), false);
    for (const auto& c : clicks) touched[nearest_annotation(pl.annotations, c.voxel, vol.spacing())] = true;
    for (std::size_t i = 0; i < pl.annotations.size(); ++i)
      if (touched[i]) pl.lesions[i] = run_lesion(vol, pl.annotations[i], pl.config, owned[i]);
  }
  compose(pl, vol);
  return pl;
}

}  // namespace dragdrop
