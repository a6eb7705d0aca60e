#pragma once

// Slow, obviously-correct reference implementations. They only use the Grid container
// from the library, never its algorithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "dragdrop/core/grid.hpp"

namespace oracle {

using dragdrop::BinaryMask;
using dragdrop::Index3;
using dragdrop::LabelVolume;
using dragdrop::Vec3;
using dragdrop::Volume;

inline std::vector<Index3> offsets6() {
  return {Index3(-1, 0, 0), Index3(1, 0, 0), Index3(0, -1, 0), Index3(0, 1, 0), Index3(0, 0, -1), Index3(0, 0, 1)};
}

inline std::vector<Index3> offsets26() {
  std::vector<Index3> o;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dx || dy || dz) o.emplace_back(dx, dy, dz);
  return o;
}

inline bool inside(const Index3& dims, const Index3& v) {
  for (int a = 0; a < 3; ++a)
    if (v[a] < 0 || v[a] >= dims[a]) return false;
  return true;
}

// Priority flood with a plain pending list scanned linearly for the (value, arrival) minimum.
// 1 = lesion, 2 = background, 0 = never reached.
inline std::vector<std::uint8_t> flood(const Volume& g, const std::vector<Index3>& lesion,
                                       const std::vector<Index3>& background, const std::vector<Index3>& nbrs) {
  const Index3 d = g.dims();
  std::vector<std::uint8_t> lab(g.size(), 0);
  auto at = [&](const Index3& v) { return std::size_t(v.x() + d.x() * (v.y() + d.y() * v.z())); };
  for (const auto& v : lesion) lab[at(v)] = 1;
  for (const auto& v : background) lab[at(v)] = 2;

  struct Pending {
    float value;
    std::size_t arrival;
    Index3 voxel;
    std::uint8_t label;
  };
  std::vector<Pending> pending;
  std::size_t arrivals = 0;
  auto offer = [&](const Index3& v, std::uint8_t label) {
    for (const auto& o : nbrs) {
      const Index3 q = v + o;
      if (!inside(d, q) || lab[at(q)] != 0) continue;
      pending.push_back({g[at(q)], arrivals++, q, label});
    }
  };
  for (const auto& v : lesion) offer(v, 1);
  for (const auto& v : background) offer(v, 2);
  while (!pending.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pending.size(); ++i) {
      const auto& a = pending[i];
      const auto& b = pending[best];
      if (a.value < b.value || (a.value == b.value && a.arrival < b.arrival)) best = i;
    }
    const Pending p = pending[best];
    pending.erase(pending.begin() + std::ptrdiff_t(best));
    if (lab[at(p.voxel)] != 0) continue;
    lab[at(p.voxel)] = p.label;
    offer(p.voxel, p.label);
  }
  return lab;
}

// Union-find components; labels renumbered 1..K by first voxel in scan order.
inline std::vector<std::uint32_t> components(const BinaryMask& m, const std::vector<Index3>& nbrs) {
  const Index3 d = m.dims();
  std::vector<std::size_t> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const Index3 v = m.coord(i);
    for (const auto& o : nbrs) {
      const Index3 q = v + o;
      if (!inside(d, q) || !m(q)) continue;
      const std::size_t a = find(i), b = find(m.index(q));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::uint32_t> out(m.size(), 0);
  std::map<std::size_t, std::uint32_t> ids;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    auto [it, fresh] = ids.emplace(find(i), std::uint32_t(ids.size() + 1));
    out[i] = it->second;
  }
  return out;
}

inline std::uint32_t component_count(const std::vector<std::uint32_t>& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

// Binary dilation: v is set if some offset o has mask(v - o) set.
inline BinaryMask dilate(const BinaryMask& m, const std::vector<Index3>& se) {
  BinaryMask out = BinaryMask::like(m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Index3 v = m.coord(i);
    for (const auto& o : se) {
      const Index3 q = v - o;
      if (inside(m.dims(), q) && m(q)) {
        out[i] = 1;
        break;
      }
    }
  }
  return out;
}

// Binary erosion: every in-bounds v + o is set.
inline BinaryMask erode(const BinaryMask& m, const std::vector<Index3>& se) {
  BinaryMask out = BinaryMask::like(m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Index3 v = m.coord(i);
    bool all = true;
    for (const auto& o : se) {
      const Index3 q = v + o;
      if (inside(m.dims(), q) && !m(q)) {
        all = false;
        break;
      }
    }
    out[i] = all ? 1 : 0;
  }
  return out;
}

inline Volume gradient(const Volume& vol, const std::vector<Index3>& se) {
  Volume out = Volume::like(vol);
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const Index3 v = vol.coord(i);
    float lo = vol[i], hi = vol[i];
    for (const auto& o : se) {
      const Index3 q = v + o;
      if (!inside(vol.dims(), q)) continue;
      lo = std::min(lo, vol(q));
      hi = std::max(hi, vol(q));
    }
    out[i] = hi - lo;
  }
  return out;
}

// Integer offsets with sum((o_i * s_i)^2) <= r^2.
inline std::vector<Index3> ball_offsets(double r, const Vec3& s) {
  std::vector<Index3> out;
  const int rx = int(r / s.x()) + 1, ry = int(r / s.y()) + 1, rz = int(r / s.z()) + 1;
  for (int z = -rz; z <= rz; ++z)
    for (int y = -ry; y <= ry; ++y)
      for (int x = -rx; x <= rx; ++x) {
        const double d2 = x * s.x() * x * s.x() + y * s.y() * y * s.y() + z * s.z() * z * s.z();
        if (d2 <= r * r + 1e-9) out.emplace_back(x, y, z);
      }
  return out;
}

// Lattice points of a dims grid whose physical position lies within r of c.
inline std::size_t ball_count(const Index3& dims, const Vec3& spacing, const Vec3& c, double r) {
  std::size_t n = 0;
  for (int z = 0; z < dims.z(); ++z)
    for (int y = 0; y < dims.y(); ++y)
      for (int x = 0; x < dims.x(); ++x) {
        const Vec3 p(x * spacing.x(), y * spacing.y(), z * spacing.z());
        if ((p - c).squaredNorm() <= r * r) ++n;
      }
  return n;
}

struct Tally {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Tally tally(const BinaryMask& pred, const BinaryMask& gt, const BinaryMask* ignore) {
  Tally t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (ignore && (*ignore)[i]) continue;
    const bool p = pred[i] != 0, g = gt[i] != 0;
    if (p && g) ++t.tp;
    else if (p) ++t.fp;
    else if (g) ++t.fn;
    else ++t.tn;
  }
  return t;
}

// Lesion matching by comparing every pred component against every gt component.
struct PairMatch {
  std::vector<std::set<std::uint32_t>> gt_hits;
  std::set<std::uint32_t> unmatched;
};

inline PairMatch pair_match(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt,
                            std::optional<double> iou_tau) {
  const std::uint32_t np = component_count(pred), ng = component_count(gt);
  PairMatch m;
  m.gt_hits.resize(ng);
  for (std::uint32_t p = 1; p <= np; ++p) {
    bool any = false;
    for (std::uint32_t g = 1; g <= ng; ++g) {
      std::size_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i] == p, b = gt[i] == g;
        inter += a && b;
        uni += a || b;
      }
      const bool hit = iou_tau ? (inter > 0 && double(inter) / double(uni) >= *iou_tau) : inter > 0;
      if (hit) {
        m.gt_hits[g - 1].insert(p);
        any = true;
      }
    }
    if (!any) m.unmatched.insert(p);
  }
  return m;
}

// Literal FROC: every distinct local-maximum score is a threshold; detections at a threshold are
// the 26-components of {conf >= t}; any-overlap hits.
struct SweepPoint {
  double threshold;
  double fp_per_case;
  double sensitivity;
};

inline std::vector<SweepPoint> froc_sweep(const std::vector<Volume>& conf, const std::vector<LabelVolume>& gt) {
  const auto n26 = offsets26();
  std::set<float, std::greater<>> scores;
  for (const auto& c : conf)
    for (std::size_t i = 0; i < c.size(); ++i) {
      bool ge = true, gt_one = false;
      for (const auto& o : n26) {
        const Index3 q = c.coord(i) + o;
        if (!inside(c.dims(), q)) continue;
        ge = ge && c[i] >= c(q);
        gt_one = gt_one || c[i] > c(q);
      }
      if (ge && gt_one) scores.insert(c[i]);
    }
  std::size_t lesions = 0;
  std::vector<std::vector<std::uint32_t>> gt_cc;
  for (const auto& g : gt) {
    BinaryMask m = BinaryMask::like(g);
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = g[i] > 0;
    gt_cc.push_back(components(m, n26));
    lesions += component_count(gt_cc.back());
  }
  std::vector<SweepPoint> out;
  for (float t : scores) {
    std::size_t fp = 0, hit = 0;
    for (std::size_t k = 0; k < conf.size(); ++k) {
      BinaryMask m = BinaryMask::like(conf[k]);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = conf[k][i] >= t;
      const auto pred = components(m, n26);
      const auto pm = pair_match(pred, gt_cc[k], std::nullopt);
      fp += pm.unmatched.size();
      for (const auto& h : pm.gt_hits) hit += !h.empty();
    }
    out.push_back({t, double(fp) / double(conf.size()), lesions ? double(hit) / double(lesions) : 0.0});
  }
  return out;
}

}  // namespace oracle
