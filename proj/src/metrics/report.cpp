#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dragdrop/metrics/report.hpp"

namespace dragdrop {

using nlohmann::json;

namespace {

json ratio_json(const std::optional<double>& v) { return v ? json(*v) : json("undefined"); }

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_ratio(const std::optional<double>& v) { return v ? fixed(*v) : "undefined"; }

json to_json(const DetectionReport& r) {
  json j = {{"level", to_string(r.level)},
            {"cases", r.cases},
            {"TP", r.counts.tp},
            {"FP", r.counts.fp},
            {"FN", r.counts.fn},
            {"TN", r.counts.tn},
            {"sensitivity", ratio_json(r.sensitivity)},
            {"specificity", ratio_json(r.specificity)},
            {"precision", ratio_json(r.precision)},
            {"f1", ratio_json(r.f1)}};
  if (r.level == Level::pixel) j["dice"] = ratio_json(r.dice);
  return j;
}

json report_json(const std::vector<ReportRow>& rows, const MatchCriterion& crit) {
  json out = {{"criterion", crit.str()},
              {"lesion_tn", "negative case with zero predicted components"},
              {"rows", json::array()}};
  for (const auto& row : rows) {
    json j = to_json(row.report);
    if (!row.group.empty()) j["group"] = row.group;
    out["rows"].push_back(std::move(j));
  }
  return out;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  const bool grouped = std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.group.empty(); });
  std::ostringstream os;
  if (grouped) os << "group,";
  os << "level,TP,FP,FN,TN,sen,spe,pre,f1,dice\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    if (grouped) os << row.group << ',';
    os << to_string(r.level) << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn
       << ',' << format_ratio(r.sensitivity) << ',' << format_ratio(r.specificity) << ',' << format_ratio(r.precision)
       << ',' << format_ratio(r.f1) << ',' << (r.level == Level::pixel ? format_ratio(r.dice) : std::string()) << '\n';
  }
  return os.str();
}

json to_json(const FrocCurve& c) {
  json j = {{"criterion", c.criterion.str()},
            {"cases", c.cases},
            {"gt_lesions", c.gt_lesions},
            {"degenerate", c.degenerate},
            {"points", json::array()}};
  for (const auto& p : c.points)
    j["points"].push_back({{"threshold", p.threshold}, {"fp_per_case", p.fp_per_case}, {"sensitivity", ratio_json(p.sensitivity)}});
  if (!c.levels.empty()) {
    j["levels"] = json::array();
    for (std::size_t i = 0; i < c.levels.size(); ++i)
      j["levels"].push_back({{"fp_per_case", c.levels[i]}, {"sensitivity", ratio_json(c.sensitivity_at_levels[i])}});
  }
  return j;
}

std::string froc_csv(const FrocCurve& c) {
  std::ostringstream os;
  os << "threshold,fp_per_case,sensitivity\n";
  for (const auto& p : c.points) os << fixed(p.threshold) << ',' << fixed(p.fp_per_case) << ',' << format_ratio(p.sensitivity) << '\n';
  return os.str();
}

std::string froc_svg(const FrocCurve& c) {
  const double w = 480, h = 360, left = 60, right = 20, top = 20, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double xmax = 1.0;
  for (const auto& p : c.points) xmax = std::max(xmax, p.fp_per_case);
  auto sx = [&](double x) { return left + pw * x / xmax; };
  auto sy = [&](double y) { return top + ph * (1.0 - y); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<g stroke=\"#888\" stroke-width=\"1\" fill=\"none\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  os << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = k / 4.0, x = xmax * k / 4.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << fixed(sy(y) + 4, 1) << "\" text-anchor=\"end\">" << fixed(y, 2) << "</text>\n";
    os << "<text x=\"" << fixed(sx(x), 1) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fixed(x, 2) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">false positives per case</text>\n";
  os << "<text x=\"15\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << top + ph / 2
     << ")\">sensitivity</text>\n</g>\n";

  std::vector<std::pair<double, double>> pts;
  for (const auto& p : c.points)
    if (p.sensitivity) pts.emplace_back(p.fp_per_case, *p.sensitivity);
  if (!pts.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      os << (i ? " " : "") << fixed(sx(pts[i].first), 2) << ',' << fixed(sy(pts[i].second), 2);
    os << "\"/>\n";
    for (const auto& [x, y] : pts)
      os << "<circle cx=\"" << fixed(sx(x), 2) << "\" cy=\"" << fixed(sy(y), 2) << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
  }
  if (c.degenerate)
    os << "<text x=\"" << left + 10 << "\" y=\"" << top + 14
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#c00\">degenerate: no local maxima</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace dragdrop
