#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dragdrop/metrics/froc.hpp"

namespace dragdrop {

struct ReportRow {
  std::string group;  // empty when not grouped
  DetectionReport report;
};

/// Ratios render as numbers or the string "undefined"; dice is omitted off the pixel level.
nlohmann::json to_json(const DetectionReport& r);
nlohmann::json report_json(const std::vector<ReportRow>& rows, const MatchCriterion& crit);
/// Columns level,TP,FP,FN,TN,sen,spe,pre,f1,dice, with a leading group column when any row is grouped.
std::string report_csv(const std::vector<ReportRow>& rows);

nlohmann::json to_json(const FrocCurve& c);
/// Columns threshold,fp_per_case,sensitivity in descending threshold order.
std::string froc_csv(const FrocCurve& c);
/// Standalone SVG plot of sensitivity against FP/case.
std::string froc_svg(const FrocCurve& c);

/// Fixed six-decimal rendering used by every text report.
std::string format_ratio(const std::optional<double>& v);

}  // namespace dragdrop
