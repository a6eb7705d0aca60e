#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dragdrop/metrics/froc.hpp"

namespace dragdrop {

namespace {

struct Detection {
  float score;
  std::vector<std::uint32_t> hits;  // gt labels, case-local
  std::size_t case_index;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1), overlap_(n), has_candidate_(n, false) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (overlap_[a].size() < overlap_[b].size()) std::swap(overlap_[a], overlap_[b]);
    for (const auto& [g, n] : overlap_[b]) overlap_[a][g] += n;
    overlap_[b].clear();
    has_candidate_[a] = has_candidate_[a] || has_candidate_[b];
  }
  std::size_t size(std::size_t root) const { return size_[root]; }
  std::map<std::uint32_t, std::size_t>& overlap(std::size_t root) { return overlap_[root]; }
  std::vector<bool>::reference has_candidate(std::size_t root) { return has_candidate_[root]; }

 private:
  std::vector<std::size_t> parent_, size_;
  std::vector<std::map<std::uint32_t, std::size_t>> overlap_;
  std::vector<bool> has_candidate_;
};

std::vector<std::uint32_t> region_hits(std::map<std::uint32_t, std::size_t>& overlap, std::size_t region_size,
                                       const ComponentLabeling& gt, const MatchCriterion& crit) {
  std::vector<std::uint32_t> hits;
  for (const auto& [g, inter] : overlap) {
    bool hit = inter > 0;
    if (crit.mode == MatchCriterion::Mode::iou) {
      const double uni = double(gt.components[g - 1].voxel_count + region_size - inter);
      hit = double(inter) / uni >= crit.tau;
    }
    if (hit) hits.push_back(g);
  }
  return hits;
}

std::vector<Detection> case_detections(const Volume& conf, const ComponentLabeling& gt,
                                       std::vector<Candidate> candidates, const MatchCriterion& crit,
                                       std::size_t case_index) {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.voxel < b.voxel;
  });
  std::vector<std::size_t> order(conf.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });

  DisjointSets sets(conf.size());
  std::vector<bool> added(conf.size(), false);
  const auto& offs = neighbor_offsets(Connectivity::twenty_six);
  std::size_t next = 0;
  std::vector<Detection> out;
  for (const Candidate& c : candidates) {
    for (; next < order.size() && conf[order[next]] >= c.score; ++next) {
      const std::size_t i = order[next];
      added[i] = true;
      if (gt.labels[i]) sets.overlap(i)[gt.labels[i]] = 1;
      const Index3 v = conf.coord(i);
      for (const Index3& o : offs) {
        const Index3 q = v + o;
        if (conf.contains(q) && added[conf.index(q)]) sets.unite(i, conf.index(q));
      }
    }
    const std::size_t root = sets.find(c.voxel);
    if (sets.has_candidate(root)) continue;
    sets.has_candidate(root) = true;
    out.push_back(Detection{c.score, region_hits(sets.overlap(root), sets.size(root), gt, crit), case_index});
  }
  return out;
}

}  // namespace

std::vector<Candidate> local_maxima(const Volume& confidence, std::size_t case_index) {
  std::vector<Candidate> out;
  const auto& offs = neighbor_offsets(Connectivity::twenty_six);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const float s = confidence[i];
    const Index3 v = confidence.coord(i);
    bool ge_all = true, gt_any = false;
    for (const Index3& o : offs) {
      const Index3 q = v + o;
      if (!confidence.contains(q)) continue;
      const float n = confidence(q);
      if (n > s) {
        ge_all = false;
        break;
      }
      if (n < s) gt_any = true;
    }
    if (ge_all && gt_any) out.push_back(Candidate{case_index, i, s});
  }
  return out;
}

std::optional<double> interpolate_sensitivity(const std::vector<FrocPoint>& points, double fp) {
  std::map<double, double> curve;
  for (const auto& p : points) {
    if (!p.sensitivity) continue;
    auto [it, fresh] = curve.emplace(p.fp_per_case, *p.sensitivity);
    if (!fresh) it->second = std::max(it->second, *p.sensitivity);
  }
  if (curve.empty()) return std::nullopt;
  if (fp <= curve.begin()->first) return curve.begin()->second;
  if (fp >= curve.rbegin()->first) return curve.rbegin()->second;
  auto hi = curve.lower_bound(fp);
  if (hi->first == fp) return hi->second;
  auto lo = std::prev(hi);
  const double t = (fp - lo->first) / (hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

FrocCurve froc(const std::vector<FrocCase>& cases, const MatchCriterion& crit, const std::vector<double>& levels) {
  FrocCurve curve;
  curve.cases = cases.size();
  curve.criterion = crit;
  curve.levels = levels;
  if (cases.empty()) throw std::invalid_argument("froc: no cases");

  std::vector<ComponentLabeling> gts;
  std::vector<std::vector<Candidate>> candidates;
  std::size_t total_candidates = 0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const Volume& conf = *cases[k].confidence;
    if (!conf.same_shape(*cases[k].gt)) throw std::invalid_argument("froc: confidence and ground truth dims differ");
    if (!conf.array().allFinite()) throw std::invalid_argument("froc: confidence values must be finite");
    gts.push_back(lesion_components(*cases[k].gt));
    curve.gt_lesions += gts.back().components.size();
    candidates.push_back(local_maxima(conf, k));
    total_candidates += candidates.back().size();
  }
  auto sens = [&](std::size_t hit) -> std::optional<double> {
    if (curve.gt_lesions == 0) return std::nullopt;
    return double(hit) / double(curve.gt_lesions);
  };

  if (total_candidates == 0) {
    curve.degenerate = true;
    float top = cases[0].confidence->data()[0];
    for (const auto& c : cases) top = std::max(top, c.confidence->array().maxCoeff());
    std::size_t fp = 0, hit = 0;
    for (std::size_t k = 0; k < cases.size(); ++k) {
      BinaryMask above = BinaryMask::like(*cases[k].confidence);
      above.array() = (cases[k].confidence->array() >= top).cast<std::uint8_t>();
      const auto m = match_lesions(connected_components(above, Connectivity::twenty_six), gts[k], crit);
      fp += m.unmatched_pred.size();
      for (const auto& h : m.gt_hits) hit += !h.empty();
    }
    curve.points.push_back(FrocPoint{top, double(fp) / double(cases.size()), sens(hit)});
  } else {
    std::vector<Detection> dets;
    for (std::size_t k = 0; k < cases.size(); ++k) {
      auto d = case_detections(*cases[k].confidence, gts[k], std::move(candidates[k]), crit, k);
      dets.insert(dets.end(), d.begin(), d.end());
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::set<std::pair<std::size_t, std::uint32_t>> hit;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < dets.size();) {
      const float t = dets[i].score;
      for (; i < dets.size() && dets[i].score == t; ++i) {
        if (dets[i].hits.empty()) ++fp;
        for (auto g : dets[i].hits) hit.emplace(dets[i].case_index, g);
      }
      curve.points.push_back(FrocPoint{t, double(fp) / double(cases.size()), sens(hit.size())});
    }
  }
  for (double l : levels) curve.sensitivity_at_levels.push_back(interpolate_sensitivity(curve.points, l));
  return curve;
}

}  // namespace dragdrop
