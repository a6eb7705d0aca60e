// Acceptance battery: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Geometry>

#include "dragdrop/annotation/ellipse.hpp"
#include "dragdrop/annotation/simulate.hpp"
#include "dragdrop/core/morphology.hpp"
#include "dragdrop/io/volume_io.hpp"
#include "dragdrop/metrics/froc.hpp"
#include "dragdrop/metrics/metrics.hpp"
#include "dragdrop/phantom/phantom.hpp"
#include "dragdrop/propagation/propagate.hpp"
#include "dragdrop/propagation/watershed.hpp"
#include "dragdrop/service/server.hpp"
#include "dragdrop/service/session.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines _res as a macro.
#include <httplib.h>

using namespace dragdrop;
using nlohmann::json;

namespace {

// Pinned thresholds.
constexpr std::uint64_t kSuiteSeed = 7;
constexpr double kWatershedBudgetS = 5.0;
constexpr double kPhantomBudgetS = 60.0;
constexpr double kMeanDiceMin = 0.90;
constexpr double kCaseDiceMin = 0.80;
constexpr double kMaskedSenMin = 0.95;
constexpr double kEllipseExactTol = 1e-6;
constexpr double kEllipseNoisyRelTol = 5e-2;
constexpr double kEllipseNoiseSigma = 0.01;
constexpr double kFormulaTol = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects the first few failure messages of a criterion.
struct Checker {
  int failures = 0;
  std::ostringstream msg;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures < 3) msg << (failures ? "; " : "") << what;
    ++failures;
  }
  Outcome outcome(const std::string& ok_detail) const {
    if (failures == 0) return {true, ok_detail};
    return {false, std::to_string(failures) + " failure(s): " + msg.str()};
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<PhantomCase>& suite() {
  static const std::vector<PhantomCase> s = phantom_suite(kSuiteSeed);
  return s;
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// ---------------------------------------------------------------------------------------------

Outcome watershed_oracle() {
  Checker c;
  std::mt19937_64 rng(20240611);
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 100; ++trial) {
    const Index3 dims = testutil::random_dims(1, 6, rng);
    Volume g(dims);
    // Few distinct levels so equal-priority ties are common.
    const bool coarse = trial % 2 == 0;
    std::uniform_int_distribution<int> level(0, 4);
    std::uniform_real_distribution<float> real(0.0f, 10.0f);
    for (auto& v : g.data()) v = coarse ? float(level(rng)) : real(rng);

    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t total = std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, g.size() / 3))(rng);
    const std::size_t nl = std::uniform_int_distribution<std::size_t>(0, total)(rng);
    MarkerSet m;
    for (std::size_t i = 0; i < total; ++i) (i < nl ? m.lesion : m.background).push_back(g.coord(order[i]));

    const Connectivity conn = trial % 3 == 0 ? Connectivity::twenty_six : Connectivity::six;
    const auto got = watershed(g, m, conn);
    const auto want = oracle::flood(g, m.lesion, m.background,
                                    conn == Connectivity::six ? oracle::offsets6() : oracle::offsets26());
    c.expect(got.data() == want, "trial " + std::to_string(trial) + " differs from the brute-force flood");
  }
  const double dt = seconds_since(t0);
  c.expect(dt < kWatershedBudgetS, "runtime " + fmt(dt) + " s over budget");
  return c.outcome("100/100 volumes equal, " + fmt(dt, 3) + " s");
}

// ---------------------------------------------------------------------------------------------

Outcome morphology_oracle() {
  Checker c;
  std::mt19937_64 rng(777);
  const std::vector<std::function<StructuringElement()>> elements = {
      [] { return StructuringElement::cross6(); },
      [] { return StructuringElement::cube26(); },
      [] { return StructuringElement::ball(1.0); },
      [] { return StructuringElement::ball(2.0); },
      [] { return StructuringElement::ball(Vec3(2.0, 1.0, 1.5)); },
      [] { return StructuringElement::ball_physical(2.0, Vec3(1.0, 1.0, 2.5)); },
  };
  for (int trial = 0; trial < 50; ++trial) {
    const Index3 dims = testutil::random_dims(1, 8, rng);
    const double density = std::uniform_real_distribution<double>(0.05, 0.9)(rng);
    const BinaryMask m = testutil::random_mask(dims, density, rng);
    const StructuringElement se = elements[std::size_t(trial) % elements.size()]();
    const std::string tag = "trial " + std::to_string(trial);

    const BinaryMask d = dilate(m, se), e = erode(m, se);
    c.expect(d == oracle::dilate(m, se.offsets()), tag + ": dilate differs from naive");
    c.expect(e == oracle::erode(m, se.offsets()), tag + ": erode differs from naive");
    c.expect(e == complement(dilate(complement(m), se)), tag + ": duality broken");
    const BinaryMask closed = erode(d, se);
    bool superset = true;
    for (std::size_t i = 0; i < m.size(); ++i) superset = superset && (!m[i] || closed[i]);
    c.expect(superset, tag + ": closing is not a superset");

    Volume v(dims);
    std::uniform_real_distribution<float> val(-50.0f, 50.0f);
    for (auto& x : v.data()) x = trial % 2 ? std::round(val(rng) / 25.0f) : val(rng);
    const Volume grad = morphological_gradient(v, se);
    c.expect(grad == oracle::gradient(v, se.offsets()), tag + ": gradient differs from naive");
    bool nonneg = true;
    for (float x : grad.data()) nonneg = nonneg && x >= 0.0f;
    c.expect(nonneg, tag + ": negative gradient");
  }
  return c.outcome("50/50 inputs equal; duality and closing hold");
}

// ---------------------------------------------------------------------------------------------

struct CaseResult {
  ConfusionCounts raw, masked;
};

CaseResult evaluate_case(const PhantomCase& pc, const PropagationConfig& cfg) {
  const auto anns = simulate_dragdrop(pc.phantom.gt, 0.0, pc.seed);
  const PseudoLabel pl = propagate(pc.phantom.volume, anns, cfg);
  const BinaryMask pred = to_mask(pl.foreground), gt = to_mask(pc.phantom.gt);
  const BinaryMask& ignore = pl.uncertain;
  return {pixel_counts(pred, gt), pixel_counts(pred, gt, &ignore)};
}

Outcome phantom_quality() {
  Checker c;
  const auto t0 = std::chrono::steady_clock::now();
  const PropagationConfig cfg;  // N = 0.2, M = 0.5
  c.expect(cfg.lesion_ratio == 0.2 && cfg.dilation_ratio == 0.5, "defaults are not N=0.2, M=0.5");
  double sum = 0.0, worst = 1.0, worst_sen = 1.0;
  for (std::size_t k = 0; k < kSuitePositiveCases; ++k) {
    const auto r = evaluate_case(suite()[k], cfg);
    const double dice = f1_score(r.raw).value_or(0.0);
    const double sen = sensitivity(r.masked).value_or(0.0);
    sum += dice;
    worst = std::min(worst, dice);
    worst_sen = std::min(worst_sen, sen);
    c.expect(dice >= kCaseDiceMin, "case " + std::to_string(k) + " Dice " + fmt(dice));
    c.expect(sen >= kMaskedSenMin, "case " + std::to_string(k) + " masked Sen " + fmt(sen));
  }
  const double mean = sum / double(kSuitePositiveCases);
  const double dt = seconds_since(t0);
  c.expect(mean >= kMeanDiceMin, "mean Dice " + fmt(mean));
  c.expect(dt < kPhantomBudgetS, "runtime " + fmt(dt) + " s over budget");
  return c.outcome("mean Dice " + fmt(mean) + ", min Dice " + fmt(worst) + ", min masked Sen " + fmt(worst_sen) +
                   ", " + fmt(dt, 2) + " s");
}

// ---------------------------------------------------------------------------------------------

Outcome table4_trends() {
  Checker c;
  auto pooled = [](const PropagationConfig& cfg) {
    CaseResult total;
    for (std::size_t k = 0; k < kSuitePositiveCases; ++k) {
      const auto r = evaluate_case(suite()[k], cfg);
      total.raw += r.raw;
      total.masked += r.masked;
    }
    return total;
  };
  std::map<double, double> sen;
  for (double n : {0.1, 0.2, 0.4}) {
    PropagationConfig cfg;
    cfg.lesion_ratio = n;
    sen[n] = sensitivity(pooled(cfg).raw).value_or(0.0);
  }
  c.expect(sen[0.4] >= sen[0.2], "Sen(N=0.4) " + fmt(sen[0.4], 6) + " < Sen(N=0.2) " + fmt(sen[0.2], 6));
  c.expect(sen[0.2] >= sen[0.1], "Sen(N=0.2) " + fmt(sen[0.2], 6) + " < Sen(N=0.1) " + fmt(sen[0.1], 6));

  std::map<double, double> dice;
  for (double m : {0.4, 0.5, 0.6}) {
    PropagationConfig cfg;
    cfg.dilation_ratio = m;
    dice[m] = f1_score(pooled(cfg).masked).value_or(0.0);
  }
  c.expect(dice[0.5] >= dice[0.4], "masked Dice(M=0.5) < masked Dice(M=0.4)");
  c.expect(dice[0.6] >= dice[0.5], "masked Dice(M=0.6) < masked Dice(M=0.5)");
  return c.outcome("Sen N=0.1/0.2/0.4: " + fmt(sen[0.1]) + "/" + fmt(sen[0.2]) + "/" + fmt(sen[0.4]) +
                   "; masked Dice M=0.4/0.5/0.6: " + fmt(dice[0.4], 6) + "/" + fmt(dice[0.5], 6) + "/" + fmt(dice[0.6], 6));
}

// ---------------------------------------------------------------------------------------------

struct Scenario {
  const char* name;
  // Voxel layout as a string over {T: tp, P: fp, N: fn, _: tn, x: ignored}, one char per voxel.
  const char* layout;
  ConfusionCounts expect;
  // Hand-computed ratios; NaN marks "undefined".
  double sen, spe, pre, f1;
};

constexpr double U = std::numeric_limits<double>::quiet_NaN();

const Scenario kScenarios[] = {
    {"textbook", "TPN_______", {1, 1, 1, 7}, 1.0 / 2, 7.0 / 8, 1.0 / 2, 1.0 / 2},
    {"perfect", "TTT_______", {3, 0, 0, 7}, 1.0, 1.0, 1.0, 1.0},
    {"all empty", "__________", {0, 0, 0, 10}, U, 1.0, U, U},
    {"all ignored", "xxxx", {0, 0, 0, 0}, U, U, U, U},
    {"full agreement", "TTTT", {4, 0, 0, 0}, 1.0, U, 1.0, 1.0},
    {"all false positive", "PPPP", {0, 4, 0, 0}, U, 0.0, 0.0, 0.0},
    {"all missed", "NNNN", {0, 0, 4, 0}, 0.0, U, U, 0.0},
    {"empty pred", "NN______", {0, 0, 2, 6}, 0.0, 1.0, U, 0.0},
    {"empty gt with fp", "PP______", {0, 2, 0, 6}, U, 6.0 / 8, 0.0, 0.0},
    {"miss and fp", "PN", {0, 1, 1, 0}, 0.0, 0.0, 0.0, 0.0},
    {"half hit", "TTNN____", {2, 0, 2, 4}, 2.0 / 4, 1.0, 1.0, 4.0 / 6},
    {"over segmentation", "TTPPP_____", {2, 3, 0, 5}, 1.0, 5.0 / 8, 2.0 / 5, 4.0 / 7},
    {"mixed", "TTTPNN____", {3, 1, 2, 4}, 3.0 / 5, 4.0 / 5, 3.0 / 4, 6.0 / 9},
    {"tn only with ignore", "xx___", {0, 0, 0, 3}, U, 1.0, U, U},
    {"ignore hides fp", "TxxN_", {1, 0, 1, 1}, 1.0 / 2, 1.0, 1.0, 2.0 / 3},
    {"ignore hides miss", "TPx__", {1, 1, 0, 2}, 1.0, 2.0 / 3, 1.0 / 2, 2.0 / 3},
    {"single tp", "T", {1, 0, 0, 0}, 1.0, U, 1.0, 1.0},
    {"single tn", "_", {0, 0, 0, 1}, U, 1.0, U, U},
    {"single fp", "P", {0, 1, 0, 0}, U, 0.0, 0.0, 0.0},
    {"large", "TTTTTTTTTTPPNNNNN_________________________", {10, 2, 5, 25}, 10.0 / 15, 25.0 / 27, 10.0 / 12,
     20.0 / 27},
};

bool same(std::optional<double> got, double want) {
  if (std::isnan(want)) return !got.has_value();
  return got.has_value() && std::abs(*got - want) <= kFormulaTol;
}

Outcome metric_formulas() {
  Checker c;
  int identities = 0;
  std::mt19937_64 rng(5);
  for (const Scenario& s : kScenarios) {
    const std::string layout = s.layout;
    // Scatter the layout over a random 3D shape to keep geometry out of the tally.
    std::vector<std::size_t> perm(layout.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Index3 dims(int(layout.size()), 1, 1);
    BinaryMask pred(dims), gt(dims), ignore(dims);
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const char ch = layout[perm[i]];
      pred[i] = ch == 'T' || ch == 'P';
      gt[i] = ch == 'T' || ch == 'N';
      ignore[i] = ch == 'x';
      if (ch == 'x') pred[i] = gt[i] = std::uint8_t(i % 2);  // hidden content must not count
    }
    const DetectionReport r = pixel_metrics(pred, gt, &ignore);
    const std::string tag = s.name;
    c.expect(r.counts == s.expect, tag + ": counts");
    c.expect(same(r.sensitivity, s.sen), tag + ": Sen");
    c.expect(same(r.specificity, s.spe), tag + ": Spe");
    c.expect(same(r.precision, s.pre), tag + ": Pre");
    c.expect(same(r.f1, s.f1), tag + ": F1");
    c.expect(same(r.dice, s.f1), tag + ": Dice");
    if (r.precision && r.sensitivity && *r.precision > 0 && *r.sensitivity > 0) {
      ++identities;
      const double h = 2.0 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
      c.expect(r.f1 && std::abs(*r.f1 - h) <= kFormulaTol, tag + ": harmonic identity");
    }
  }
  return c.outcome(std::to_string(std::size(kScenarios)) + " scenarios match; harmonic identity on " +
                   std::to_string(identities));
}

// ---------------------------------------------------------------------------------------------

Volume bumps(const Index3& dims, const std::vector<std::pair<Index3, float>>& peaks, double sigma) {
  Volume v(dims);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec3 p = v.coord(i).cast<double>();
    double s = 0.0;
    for (const auto& [c, a] : peaks) s += a * std::exp(-(p - c.cast<double>()).squaredNorm() / (2 * sigma * sigma));
    v[i] = float(s);
  }
  return v;
}

LabelVolume cube_gt(const Index3& dims, const std::vector<Index3>& centres, int half) {
  LabelVolume g(dims);
  std::uint32_t id = 1;
  for (const Index3& c : centres) {
    for (int z = c.z() - half; z <= c.z() + half; ++z)
      for (int y = c.y() - half; y <= c.y() + half; ++y)
        for (int x = c.x() - half; x <= c.x() + half; ++x)
          if (g.contains(Index3(x, y, z))) g(x, y, z) = id;
    ++id;
  }
  return g;
}

bool monotone(const FrocCurve& curve) {
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& hi = curve.points[i - 1];  // higher threshold
    const auto& lo = curve.points[i];
    if (!(hi.threshold > lo.threshold)) return false;
    if (hi.fp_per_case > lo.fp_per_case) return false;
    if (hi.sensitivity && lo.sensitivity && *hi.sensitivity > *lo.sensitivity) return false;
  }
  return true;
}

Outcome froc_properties() {
  Checker c;
  const MatchCriterion any = MatchCriterion::any_overlap();

  // Random smooth batches: monotone in threshold.
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Volume> conf;
    std::vector<LabelVolume> gts;
    for (int k = 0; k < 3; ++k) {
      std::vector<std::pair<Index3, float>> peaks;
      std::vector<Index3> lesions;
      std::uniform_int_distribution<int> pos(0, 11);
      std::uniform_real_distribution<float> amp(0.1f, 1.0f);
      for (int p = 0; p < 6; ++p) peaks.push_back({Index3(pos(rng), pos(rng), pos(rng)), amp(rng)});
      for (int l = 0; l < 2; ++l) lesions.emplace_back(pos(rng), pos(rng), pos(rng));
      conf.push_back(bumps(Index3(12, 12, 12), peaks, 1.5));
      gts.push_back(cube_gt(Index3(12, 12, 12), lesions, 1));
    }
    std::vector<FrocCase> cases;
    for (std::size_t k = 0; k < conf.size(); ++k) cases.push_back({&conf[k], &gts[k]});
    const FrocCurve curve = froc(cases, trial % 2 ? MatchCriterion::iou(0.1) : any);
    c.expect(!curve.points.empty() && monotone(curve), "random batch " + std::to_string(trial) + " not monotone");
  }

  // Perfect detector.
  {
    const LabelVolume g = cube_gt(Index3(16, 16, 16), {Index3(4, 4, 4), Index3(11, 11, 11)}, 1);
    Volume conf(g.dims());
    for (std::size_t i = 0; i < g.size(); ++i) conf[i] = g[i] ? 1.0f : 0.0f;
    const FrocCurve curve = froc({{&conf, &g}}, any);
    bool hit = false;
    for (const auto& p : curve.points) hit = hit || (p.fp_per_case == 0.0 && p.sensitivity == 1.0);
    c.expect(hit, "perfect detector misses (0, 1.0)");
  }

  // Planted two-case batch against the literal threshold sweep.
  {
    const Index3 dims(20, 12, 12);
    std::vector<Volume> conf = {
        bumps(dims, {{Index3(4, 6, 6), 0.9f}, {Index3(15, 6, 6), 0.6f}}, 1.2),
        bumps(dims, {{Index3(5, 5, 5), 0.75f}, {Index3(15, 6, 6), 0.3f}}, 1.2),
    };
    std::vector<LabelVolume> gts = {
        cube_gt(dims, {Index3(4, 6, 6)}, 1),
        cube_gt(dims, {Index3(5, 5, 5), Index3(15, 2, 2)}, 1),
    };
    const FrocCurve curve = froc({{&conf[0], &gts[0]}, {&conf[1], &gts[1]}}, any);
    const auto want = oracle::froc_sweep(conf, gts);
    c.expect(want.size() == 4, "planted batch should have 4 thresholds, oracle found " + std::to_string(want.size()));
    c.expect(curve.points.size() == want.size(), "point count differs from the sweep");
    for (std::size_t i = 0; i < std::min(curve.points.size(), want.size()); ++i) {
      const auto& p = curve.points[i];
      const auto& w = want[i];
      c.expect(std::abs(p.threshold - w.threshold) < 1e-9 && std::abs(p.fp_per_case - w.fp_per_case) < 1e-12 &&
                   p.sensitivity && std::abs(*p.sensitivity - w.sensitivity) < 1e-12,
               "point " + std::to_string(i) + " differs from the sweep");
    }
  }
  return c.outcome("monotone on 20 random batches; perfect detector reaches (0, 1.0); planted batch equals sweep");
}

// ---------------------------------------------------------------------------------------------

double angle_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

Outcome simulation_contracts() {
  Checker c;
  int annotations = 0;
  for (std::size_t k = 0; k < kSuitePositiveCases; ++k) {
    const PhantomCase& pc = suite()[k];
    const LabelVolume& gt = pc.phantom.gt;
    const Vec3 sp = gt.spacing();
    const std::string tag = "case " + std::to_string(k);
    BinaryMask fg = to_mask(gt);
    const auto cc = oracle::components(fg, oracle::offsets26());

    // Drag&Drop encompassment, with the default centre noise.
    const auto dd = simulate_dragdrop(gt, 0.05, pc.seed);
    c.expect(dd.size() == oracle::component_count(cc), tag + ": one annotation per lesion");
    for (const auto& a : dd) {
      ++annotations;
      for (std::size_t i = 0; i < gt.size(); ++i)
        if (cc[i] == a.lesion_id && (gt.physical(gt.coord(i)) - a.center_mm).norm() > a.radius_mm + 1e-9)
          c.expect(false, tag + ": voxel outside the drag&drop sphere");
    }

    // Boxes equal a min/max scan.
    const auto boxes = simulate_bbox(gt);
    for (const auto& b : boxes) {
      Index3 lo = Index3::Constant(1 << 20), hi = Index3::Constant(-1);
      for (std::size_t i = 0; i < gt.size(); ++i)
        if (cc[i] == b.lesion_id) {
          lo = lo.cwiseMin(gt.coord(i));
          hi = hi.cwiseMax(gt.coord(i));
        }
      c.expect(b.min == lo && b.max == hi, tag + ": bbox differs from scan");
    }

    // Points lie in the box and carry the mask lookup as their label.
    for (const auto& p : simulate_points(gt, 10, pc.seed)) {
      const auto& b = boxes[p.lesion_id - 1];
      c.expect(p.points.size() == 10, tag + ": point count");
      for (const auto& lp : p.points) {
        c.expect((lp.voxel.array() >= b.min.array()).all() && (lp.voxel.array() <= b.max.array()).all(),
                 tag + ": point outside bbox");
        c.expect(lp.positive == (cc[gt.index(lp.voxel)] == p.lesion_id), tag + ": point label disagrees with mask");
      }
    }

    // Scribbles: foreground inside the lesion, background off every lesion.
    for (const auto& s : simulate_scribbles(gt, pc.seed)) {
      c.expect(!s.foreground.empty() && !s.background.empty(), tag + ": empty scribble");
      for (const auto& px : s.foreground)
        c.expect(cc[gt.index(Index3(px.x(), px.y(), s.slice))] == s.lesion_id, tag + ": foreground scribble off lesion");
      for (const auto& px : s.background)
        c.expect(gt(px.x(), px.y(), s.slice) == 0, tag + ": background scribble on a lesion");
    }
  }

  // Planted ellipses.
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise(0.0, kEllipseNoiseSigma);
  double worst_exact = 0.0, worst_noisy = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double a = 3.0 + 0.7 * k, b = a * (0.4 + 0.035 * k), theta = std::fmod(0.3 * k + 0.1, std::numbers::pi);
    const Eigen::Vector2d ctr(1.5 * k - 4.0, 2.0 - 0.5 * k);
    std::vector<Eigen::Vector2d> exact, noisy;
    for (int i = 0; i < 40; ++i) {
      const double t = 2 * std::numbers::pi * i / 40.0;
      const Eigen::Vector2d p(a * std::cos(t), b * std::sin(t));
      const Eigen::Vector2d q = ctr + Eigen::Rotation2Dd(theta) * p;
      exact.push_back(q);
      noisy.push_back(q + Eigen::Vector2d(noise(rng), noise(rng)));
    }
    const EllipseParams e = fit_ellipse(exact);
    const double err = std::max({(e.center - ctr).norm(), std::abs(e.a - a), std::abs(e.b - b), angle_gap(e.theta, theta)});
    worst_exact = std::max(worst_exact, err);
    c.expect(err <= kEllipseExactTol, "noiseless ellipse " + std::to_string(k) + " error " + std::to_string(err));

    const EllipseParams n = fit_ellipse(noisy);
    const double rel = std::max({(n.center - ctr).norm() / a, std::abs(n.a - a) / a, std::abs(n.b - b) / b,
                                 angle_gap(n.theta, theta)});
    worst_noisy = std::max(worst_noisy, rel);
    c.expect(rel <= kEllipseNoisyRelTol, "noisy ellipse " + std::to_string(k) + " relative error " + std::to_string(rel));
  }
  std::ostringstream d;
  d << annotations << " annotations encompass their lesions; ellipse error " << worst_exact << " exact, "
    << fmt(worst_noisy) << " relative with noise";
  return c.outcome(d.str());
}

// ---------------------------------------------------------------------------------------------

using FileMap = std::map<std::string, std::string>;

FileMap snapshot_outputs(const testutil::fs::path& root) {
  FileMap out;
  for (const auto& e : testutil::fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = testutil::fs::relative(e.path(), root).string();
    if (rel.find("manifest.json") != std::string::npos) continue;  // carry wall time
    out[rel] = testutil::slurp(e.path().string());
  }
  return out;
}

struct Rooted {
  testutil::fs::path p;
  std::string operator/(const std::string& n) const { return (p / n).string(); }
};

/// phantom -> simulate -> propagate -> evaluate -> froc under `root`; returns the OR of exit codes.
int cli_pipeline(const Rooted& d) {
  const auto run = [](std::vector<std::string> args) { return testutil::run_cli(args).code; };
  int rc = 0;
  rc |= run({"phantom", "--suite", "--seed", std::to_string(kSuiteSeed), "--out-dir", d / "suite"});
  const std::string c0 = d / "suite/case_0";
  rc |= run({"simulate", "--gt", c0 + "/gt.json", "--kind", "dragdrop", "--seed", "3", "--out", d / "ann.json"});
  rc |= run({"propagate", "--volume", c0 + "/volume.json", "--annotations", d / "ann.json", "--out-dir", d / "prop"});
  rc |= run({"evaluate", "--pred", d / "prop/foreground.nii.gz", "--gt", c0 + "/gt.json", "--ignore",
             d / "prop/uncertain.nii.gz", "--level", "all", "--out-json", d / "eval.json", "--out-csv", d / "eval.csv"});
  io::write_text(d / "froc_cases.json",
                 json::array({{{"confidence", "suite/case_0/volume.json"}, {"gt", "suite/case_0/gt.json"}},
                              {{"confidence", "suite/case_1/volume.json"}, {"gt", "suite/case_1/gt.json"}}})
                     .dump());
  rc |= run({"froc", "--cases", d / "froc_cases.json", "--levels", "0.5,1,2", "--out-csv", d / "froc.csv", "--svg",
             d / "froc.svg"});
  return rc;
}

json get_json(httplib::Client& cli, const std::string& path) {
  auto r = cli.Get(path);
  if (!r || r->status != 200) throw std::runtime_error("GET " + path + " failed");
  return json::parse(r->body);
}

LabelVolume get_label(httplib::Client& cli, const std::string& path) {
  auto r = cli.Get(path + "?gzip=0");
  if (!r || r->status != 200) throw std::runtime_error("GET " + path + " failed");
  return io::decode_nifti_label(std::vector<std::uint8_t>(r->body.begin(), r->body.end()), path);
}

void await_done(httplib::Client& cli, const std::string& sid) {
  for (int i = 0; i < 2000; ++i) {
    const std::string state = get_json(cli, "/v1/sessions/" + sid + "/status").at("state");
    if (state == "done") return;
    if (state == "error") throw std::runtime_error("propagation failed");
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  throw std::runtime_error("propagation timed out");
}

Outcome determinism_and_replay() {
  Checker c;
  testutil::TempDir work("dd-accept");

  // CLI: same commands twice, byte-identical outputs.
  const auto root = work.path() / "run";
  FileMap first;
  for (int pass = 0; pass < 2; ++pass) {
    testutil::fs::remove_all(root);
    testutil::fs::create_directories(root);
    const int rc = cli_pipeline(Rooted{root});
    c.expect(rc == 0, "CLI pipeline pass " + std::to_string(pass) + " failed");
    if (pass == 0)
      first = snapshot_outputs(root);
    else
      c.expect(first == snapshot_outputs(root), "CLI outputs differ between identical runs");
  }
  const std::size_t files = first.size();

  // Service with the same inputs.
  const std::string c0 = (root / "suite/case_0").string();
  const Volume vol = io::load_volume(c0 + "/volume.json");
  const auto anns = load_annotations((root / "ann.json").string());
  const LabelVolume cli_fg = io::load_label((root / "prop/foreground.nii.gz").string());
  const LabelVolume cli_unc = io::load_label((root / "prop/uncertain.nii.gz").string());
  const std::string data_dir = (work.path() / "data").string();

  std::string sid;
  LabelVolume refined_fg, refined_unc;
  {
    service::Server server({data_dir});
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);
    const auto nii = io::encode_nifti(vol, false);
    auto up = cli.Post("/v1/volumes", std::string(nii.begin(), nii.end()), "application/octet-stream");
    c.expect(up && up->status == 201, "volume upload");
    const std::string vid = json::parse(up->body).at("volume_id");
    auto sr = cli.Post("/v1/sessions", json{{"volume_id", vid}}.dump(), "application/json");
    c.expect(sr && sr->status == 201, "session create");
    sid = json::parse(sr->body).at("session_id");
    const std::string base = "/v1/sessions/" + sid;
    for (const auto& a : std::get<std::vector<DragDropAnnotation>>(anns.items)) {
      auto ar = cli.Post(base + "/annotations", to_json(a).dump(), "application/json");
      c.expect(ar && ar->status == 201, "annotation upload");
    }
    auto pr = cli.Post(base + "/propagate", "", "application/json");
    c.expect(pr && pr->status == 202, "propagate accepted");
    await_done(cli, sid);
    c.expect(get_label(cli, base + "/export/foreground") == cli_fg, "service foreground differs from CLI");
    c.expect(get_label(cli, base + "/export/uncertain") == cli_unc, "service uncertain differs from CLI");

    // A refinement, then replay the log.
    const Index3 ctr = nearest_voxel(std::get<std::vector<DragDropAnnotation>>(anns.items)[0].center_mm, vol.spacing());
    const json clicks = {{"clicks",
                          {{{"voxel", {ctr.x(), ctr.y(), ctr.z()}}, {"polarity", "background"}},
                           {{"voxel", {ctr.x() + 1, ctr.y(), ctr.z()}}, {"polarity", "foreground"}}}}};
    auto rr = cli.Post(base + "/refine", clicks.dump(), "application/json");
    c.expect(rr && rr->status == 200, "refine accepted");
    refined_fg = get_label(cli, base + "/export/foreground");
    refined_unc = get_label(cli, base + "/export/uncertain");
    const auto replayed = service::replay(get_json(cli, base + "/log"), vol);
    c.expect(replayed.label && replayed.label->foreground == refined_fg, "log replay foreground differs");
    c.expect(replayed.label && service::uncertain_labels(*replayed.label) == refined_unc, "log replay uncertain differs");
    server.stop();
  }
  {
    // Reload from the data directory.
    service::Server server({data_dir});
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);
    const std::string base = "/v1/sessions/" + sid;
    c.expect(get_label(cli, base + "/export/foreground") == refined_fg, "reloaded foreground differs");
    c.expect(get_label(cli, base + "/export/uncertain") == refined_unc, "reloaded uncertain differs");
    server.stop();
  }
  return c.outcome(std::to_string(files) + " CLI outputs byte-identical; service equals CLI; replay and reload exact");
}

// ---------------------------------------------------------------------------------------------

Outcome negative_cases() {
  Checker c;
  std::vector<LabelVolume> preds;
  preds.reserve(kSuiteNegativeCases);
  std::vector<EvalCase> cases;
  for (std::size_t k = kSuitePositiveCases; k < kSuitePositiveCases + kSuiteNegativeCases; ++k) {
    const PhantomCase& pc = suite()[k];
    c.expect(pc.spec.negative_case, "case " + std::to_string(k) + " is not negative");
    const auto anns = simulate_dragdrop(pc.phantom.gt, 0.05, pc.seed);
    c.expect(anns.empty(), "case " + std::to_string(k) + " produced annotations");
    const PseudoLabel pl = propagate(pc.phantom.volume, anns, PropagationConfig{});
    c.expect(count(to_mask(pl.foreground)) == 0 && count(pl.uncertain) == 0,
             "case " + std::to_string(k) + " has a non-empty label");
    preds.push_back(pl.foreground);
  }
  for (std::size_t i = 0; i < preds.size(); ++i)
    cases.push_back({&preds[i], &suite()[kSuitePositiveCases + i].phantom.gt, true});
  const DetectionReport r = patient_level_metrics(cases);
  c.expect(r.specificity == 1.0, "patient Spe " + (r.specificity ? fmt(*r.specificity) : std::string("undefined")));
  return c.outcome("10 empty labels; patient-level TN " + std::to_string(r.counts.tn) + ", FP " +
                   std::to_string(r.counts.fp) + ", Spe 1.0");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"watershed equals brute-force flood", watershed_oracle},
      {"morphology equals naive definitions", morphology_oracle},
      {"phantom propagation quality", phantom_quality},
      {"N and M trends", table4_trends},
      {"metric formulas", metric_formulas},
      {"FROC properties", froc_properties},
      {"simulation contracts", simulation_contracts},
      {"determinism and replay", determinism_and_replay},
      {"negative cases", negative_cases},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  return failed ? 1 : 0;
}
