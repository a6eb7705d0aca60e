#include "dragdrop/annotation/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dragdrop/annotation/ellipse.hpp"
#include "dragdrop/core/error.hpp"

namespace dragdrop {

LesionInstances lesion_instances(const LabelVolume& gt) {
  LesionInstances out;
  out.labeling = connected_components(to_mask(gt), Connectivity::twenty_six);
  out.class_ids.reserve(out.labeling.components.size());
  // First voxel in scan order of component k is the first voxel labelled k.
  std::vector<bool> seen(out.labeling.components.size(), false);
  out.class_ids.assign(out.labeling.components.size(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint32_t l = out.labeling.labels[i];
    if (l && !seen[l - 1]) {
      seen[l - 1] = true;
      out.class_ids[l - 1] = gt[i];
    }
  }
  return out;
}

std::uint64_t lesion_stream_seed(std::uint64_t seed, std::uint32_t lesion_id) {
  std::seed_seq seq{std::uint32_t(seed & 0xffffffffu), std::uint32_t(seed >> 32), lesion_id};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t(words[1]) << 32) | words[0];
}

namespace {

std::vector<Index3> component_voxels(const ComponentLabeling& cc, std::uint32_t label) {
  std::vector<Index3> out;
  const Component& c = cc.components[label - 1];
  out.reserve(c.voxel_count);
  for (int z = c.bbox.lo.z(); z < c.bbox.hi.z(); ++z)
    for (int y = c.bbox.lo.y(); y < c.bbox.hi.y(); ++y)
      for (int x = c.bbox.lo.x(); x < c.bbox.hi.x(); ++x)
        if (cc.labels(x, y, z) == label) out.emplace_back(x, y, z);
  return out;
}

double max_distance(const std::vector<Index3>& voxels, const Vec3& center_mm, const Vec3& spacing) {
  double best = 0.0;
  for (const Index3& v : voxels)
    best = std::max(best, (v.cast<double>().cwiseProduct(spacing) - center_mm).norm());
  return best;
}

}  // namespace

std::vector<DragDropAnnotation> simulate_dragdrop(const LabelVolume& gt, double sigma_frac, std::uint64_t seed) {
  DragDropSimulation cfg;
  cfg.sigma_frac = sigma_frac;
  return simulate_dragdrop(gt, cfg, seed);
}

std::vector<DragDropAnnotation> simulate_dragdrop(const LabelVolume& gt, const DragDropSimulation& cfg,
                                                  std::uint64_t seed) {
  if (!(cfg.sigma_frac >= 0.0)) throw std::invalid_argument("sigma_frac must be >= 0");
  const LesionInstances inst = lesion_instances(gt);
  const Vec3& sp = gt.spacing();
  std::vector<DragDropAnnotation> out;
  for (const Component& comp : inst.labeling.components) {
    const auto voxels = component_voxels(inst.labeling, comp.label);
    const Vec3 centroid = comp.centroid.cwiseProduct(sp);
    Vec3 center = centroid;

    const double sigma = cfg.sigma_frac * max_distance(voxels, centroid, sp);
    if (sigma > 0.0) {
      std::mt19937_64 rng(lesion_stream_seed(seed, comp.label));
      std::normal_distribution<double> noise(0.0, sigma);
      bool inside = false;
      for (int t = 0; t < cfg.max_tries && !inside; ++t) {
        const Vec3 cand = centroid + Vec3(noise(rng), noise(rng), noise(rng));
        const Index3 v = nearest_voxel(cand, sp);
        if (gt.contains(v) && inst.labeling.labels(v) == comp.label) {
          center = cand;
          inside = true;
        }
      }
    }

    DragDropAnnotation a;
    a.center_mm = center;
    a.radius_mm = std::max(max_distance(voxels, center, sp), sp.maxCoeff());
    a.class_id = inst.class_ids[comp.label - 1];
    a.lesion_id = comp.label;
    out.push_back(a);
  }
  return out;
}

std::vector<BoxAnnotation> simulate_bbox(const LabelVolume& gt) {
  const LesionInstances inst = lesion_instances(gt);
  std::vector<BoxAnnotation> out;
  for (const Component& comp : inst.labeling.components) {
    BoxAnnotation b;
    b.lesion_id = comp.label;
    b.class_id = inst.class_ids[comp.label - 1];
    b.min = comp.bbox.lo;
    b.max = comp.bbox.hi - Index3::Ones();
    out.push_back(b);
  }
  return out;
}

std::vector<PointsAnnotation> simulate_points(const LabelVolume& gt, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("simulate_points: k must be >= 1");
  const LesionInstances inst = lesion_instances(gt);
  std::vector<PointsAnnotation> out;
  for (const Component& comp : inst.labeling.components) {
    std::mt19937_64 rng(lesion_stream_seed(seed, comp.label));
    std::uniform_int_distribution<int> ux(comp.bbox.lo.x(), comp.bbox.hi.x() - 1);
    std::uniform_int_distribution<int> uy(comp.bbox.lo.y(), comp.bbox.hi.y() - 1);
    std::uniform_int_distribution<int> uz(comp.bbox.lo.z(), comp.bbox.hi.z() - 1);
    PointsAnnotation p;
    p.lesion_id = comp.label;
    p.class_id = inst.class_ids[comp.label - 1];
    for (int i = 0; i < k; ++i) {
      const int x = ux(rng), y = uy(rng), z = uz(rng);
      const Index3 v(x, y, z);
      p.points.push_back({v, inst.labeling.labels(v) == comp.label});
    }
    out.push_back(std::move(p));
  }
  return out;
}

int largest_axial_slice(const ComponentLabeling& cc, std::uint32_t label) {
  const Component& c = cc.components[label - 1];
  int best_z = c.bbox.lo.z();
  std::size_t best = 0;
  for (int z = c.bbox.lo.z(); z < c.bbox.hi.z(); ++z) {
    std::size_t n = 0;
    for (int y = c.bbox.lo.y(); y < c.bbox.hi.y(); ++y)
      for (int x = c.bbox.lo.x(); x < c.bbox.hi.x(); ++x) n += cc.labels(x, y, z) == label;
    if (n > best) {
      best = n;
      best_z = z;
    }
  }
  return best_z;
}

std::vector<EllipseAnnotation> simulate_ellipse(const LabelVolume& gt) {
  const LesionInstances inst = lesion_instances(gt);
  const Vec3& sp = gt.spacing();
  std::vector<EllipseAnnotation> out;
  for (const Component& comp : inst.labeling.components) {
    const int z = largest_axial_slice(inst.labeling, comp.label);
    auto in = [&](int x, int y) {
      return x >= 0 && y >= 0 && x < gt.dims().x() && y < gt.dims().y() && inst.labeling.labels(x, y, z) == comp.label;
    };
    std::vector<Eigen::Vector2d> boundary;
    for (int y = comp.bbox.lo.y(); y < comp.bbox.hi.y(); ++y)
      for (int x = comp.bbox.lo.x(); x < comp.bbox.hi.x(); ++x)
        if (in(x, y) && !(in(x - 1, y) && in(x + 1, y) && in(x, y - 1) && in(x, y + 1)))
          boundary.emplace_back(x * sp.x(), y * sp.y());

    EllipseAnnotation e;
    e.lesion_id = comp.label;
    e.class_id = inst.class_ids[comp.label - 1];
    try {
      e.ellipse = fit_ellipse(boundary);
    } catch (const FitError& err) {
      throw FitError("lesion " + std::to_string(comp.label) + ": " + err.what());
    }
    e.ellipse.axis = Axis::z;
    e.ellipse.slice = z;
    out.push_back(e);
  }
  return out;
}

namespace {

using Pixel = Eigen::Vector2i;

/// Random straight or parabolic curve starting at a region pixel; empty if it leaves the region.
template <typename Inside>
std::vector<Pixel> try_curve(const std::vector<Pixel>& region, const Inside& inside, double extent, int min_pixels,
                             std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, region.size() - 1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> length(1.5, std::max(2.0, 0.8 * extent));
  std::uniform_real_distribution<double> bend(-1.0, 1.0);
  std::bernoulli_distribution quadratic(0.5);

  const Eigen::Vector2d start = region[pick(rng)].cast<double>();
  const double th = angle(rng);
  const double len = length(rng);
  const bool quad = quadratic(rng);
  const double kappa = bend(rng);
  const Eigen::Vector2d dir(std::cos(th), std::sin(th));
  const Eigen::Vector2d normal(-dir.y(), dir.x());

  std::vector<Pixel> px;
  for (double t = 0.0; t <= len + 1e-9; t += 0.25) {
    const double offset = quad ? kappa * t * (t - len) / len : 0.0;
    const Eigen::Vector2d p = start + t * dir + offset * normal;
    const Pixel q(int(std::lround(p.x())), int(std::lround(p.y())));
    if (!inside(q)) return {};
    if (px.empty() || px.back() != q) px.push_back(q);
  }
  std::vector<Pixel> uniq = px;
  std::sort(uniq.begin(), uniq.end(), [](const Pixel& a, const Pixel& b) {
    return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
  });
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (int(uniq.size()) < min_pixels) return {};
  return px;
}

}  // namespace

std::vector<ScribbleAnnotation> simulate_scribbles(const LabelVolume& gt, std::uint64_t seed) {
  return simulate_scribbles(gt, ScribbleSimulation{}, seed);
}

std::vector<ScribbleAnnotation> simulate_scribbles(const LabelVolume& gt, const ScribbleSimulation& cfg,
                                                   std::uint64_t seed) {
  const LesionInstances inst = lesion_instances(gt);
  const Index3& d = gt.dims();
  std::vector<ScribbleAnnotation> out;
  for (const Component& comp : inst.labeling.components) {
    const int z = largest_axial_slice(inst.labeling, comp.label);
    const Index3 ext = comp.bbox.extent();
    const int margin = std::max({ext.x(), ext.y(), 3});
    const int x0 = std::max(0, comp.bbox.lo.x() - margin), x1 = std::min(d.x(), comp.bbox.hi.x() + margin);
    const int y0 = std::max(0, comp.bbox.lo.y() - margin), y1 = std::min(d.y(), comp.bbox.hi.y() + margin);

    auto in_fg = [&](const Pixel& p) {
      return p.x() >= 0 && p.y() >= 0 && p.x() < d.x() && p.y() < d.y() && inst.labeling.labels(p.x(), p.y(), z) == comp.label;
    };
    auto in_bg = [&](const Pixel& p) {
      return p.x() >= x0 && p.y() >= y0 && p.x() < x1 && p.y() < y1 && gt(p.x(), p.y(), z) == 0;
    };
    std::vector<Pixel> fg_region, bg_region;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        if (in_fg(Pixel(x, y))) fg_region.emplace_back(x, y);
        if (in_bg(Pixel(x, y))) bg_region.emplace_back(x, y);
      }

    std::mt19937_64 rng(lesion_stream_seed(seed, comp.label));
    auto draw = [&](const std::vector<Pixel>& region, const auto& inside, double extent, const char* what) {
      if (!region.empty())
        for (int t = 0; t < cfg.max_tries; ++t) {
          auto c = try_curve(region, inside, extent, cfg.min_pixels, rng);
          if (!c.empty()) return c;
        }
      throw DataError("scribble simulation: lesion " + std::to_string(comp.label) + " has no room for a " + what +
                      " curve on slice z=" + std::to_string(z));
    };

    ScribbleAnnotation s;
    s.lesion_id = comp.label;
    s.class_id = inst.class_ids[comp.label - 1];
    s.axis = Axis::z;
    s.slice = z;
    s.foreground = draw(fg_region, in_fg, double(std::max(ext.x(), ext.y())), "foreground");
    s.background = draw(bg_region, in_bg, double(std::max(x1 - x0, y1 - y0)) / 2.0, "background");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dragdrop
