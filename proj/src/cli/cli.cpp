#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dragdrop/annotation/simulate.hpp"
#include "dragdrop/cli/cli.hpp"
#include "dragdrop/core/error.hpp"
#include "dragdrop/io/volume_io.hpp"
#include "dragdrop/metrics/report.hpp"
#include "dragdrop/phantom/phantom.hpp"
#include "dragdrop/propagation/propagate.hpp"
#include "dragdrop/service/server.hpp"
#include "dragdrop/service/session.hpp"

namespace dragdrop::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the failure with the lowest index.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::size_t(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (i < failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void ensure_parent(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  json config = nullptr;
  json inputs = json::object();
  json outputs = json::array();
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write(const std::string& path) const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json j = {{"command", command}, {"args", args},       {"config", config},   {"inputs", inputs},
              {"outputs", outputs}, {"seed", seed},       {"tool_version", DRAGDROP_VERSION},
              {"wall_time_s", wall}};
    ensure_parent(path);
    io::write_text(path, j.dump(2) + "\n");
  }
};

json read_json_file(const std::string& path) {
  const auto bytes = io::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
}

/// Case list from a manifest: {"cases": [...]} or a bare array. Relative paths resolve against
/// the manifest's directory.
std::vector<json> load_cases(const std::string& path, const std::vector<std::string>& path_keys) {
  const json doc = read_json_file(path);
  const json& arr = doc.is_object() && doc.contains("cases") ? doc["cases"] : doc;
  if (!arr.is_array()) throw SchemaError("/cases", "expected an array of cases (in " + path + ")");
  const fs::path base = fs::path(path).parent_path();
  std::vector<json> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    json c = arr[i];
    const std::string ptr = "/cases/" + std::to_string(i);
    if (!c.is_object()) throw SchemaError(ptr, "expected an object (in " + path + ")");
    for (const auto& key : path_keys) {
      if (!c.contains(key)) continue;
      if (!c[key].is_string()) throw SchemaError(ptr + "/" + key, "expected a path string (in " + path + ")");
      const fs::path p = c[key].get<std::string>();
      if (p.is_relative()) c[key] = (base / p).string();
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string require_path(const json& c, const char* key, std::size_t i) {
  if (!c.contains(key)) throw SchemaError("/cases/" + std::to_string(i) + "/" + key, "missing required field");
  return c[key];
}

// --- simulate

struct SimulateArgs {
  std::string gt, kind = "dragdrop", out;
  double sigma_frac = 0.05;
  int points = 5;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest m{"simulate", argv};
  m.seed = a.seed;
  m.inputs = {{"gt", a.gt}};
  const LabelVolume gt = io::load_label(a.gt);
  WeakAnnotationSet set;
  set.volume = a.gt;
  set.provenance = {true, a.seed, a.kind == "dragdrop" ? a.sigma_frac : 0.0};
  switch (parse_kind(a.kind)) {
    case AnnotationKind::dragdrop: set.items = simulate_dragdrop(gt, a.sigma_frac, a.seed); break;
    case AnnotationKind::bbox: set.items = simulate_bbox(gt); break;
    case AnnotationKind::points: set.items = simulate_points(gt, a.points, a.seed); break;
    case AnnotationKind::ellipse: set.items = simulate_ellipse(gt); break;
    case AnnotationKind::scribble: set.items = simulate_scribbles(gt, a.seed); break;
  }
  ensure_parent(a.out);
  save_annotations(set, a.out);
  m.outputs.push_back(a.out);
  m.config = {{"kind", a.kind}, {"sigma_frac", a.sigma_frac}, {"points", a.points}};
  m.write(a.out + ".manifest.json");
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

// --- propagate

struct PropagateArgs {
  std::string volume, annotations, config, out_dir, format = "nifti";
};

int cmd_propagate(const PropagateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest m{"propagate", argv};
  m.inputs = {{"volume", a.volume}, {"annotations", a.annotations}};
  const PropagationConfig cfg = a.config.empty() ? PropagationConfig{} : load_config(a.config);
  if (!a.config.empty()) m.inputs["config"] = a.config;
  m.config = to_json(cfg);
  m.seed = cfg.seed;
  const Volume vol = io::load_volume(a.volume);
  const WeakAnnotationSet set = load_annotations(a.annotations);
  const auto* anns = std::get_if<std::vector<DragDropAnnotation>>(&set.items);
  if (!anns)
    throw DataError(a.annotations + ": propagation needs dragdrop annotations, got " + to_string(set.kind()));
  for (const auto& ann : *anns)
    for (const auto& w : check_annotation(ann, vol.dims(), vol.spacing())) spdlog::warn("{}", w);

  const PseudoLabel pl = propagate(vol, *anns, cfg);
  fs::create_directories(a.out_dir);
  const std::string ext = a.format == "nifti" ? ".nii.gz" : ".f32";
  const std::string fg = a.out_dir + "/foreground" + ext, unc = a.out_dir + "/uncertain" + ext;
  if (a.format == "nifti") {
    io::write_file(fg, io::encode_nifti(pl.foreground, true));
    io::write_file(unc, io::encode_nifti(service::uncertain_labels(pl), true));
  } else {
    io::save_label(pl.foreground, fg, io::VolumeFormat::raw_json);
    io::save_label(service::uncertain_labels(pl), unc, io::VolumeFormat::raw_json);
  }
  const json summary = service::label_summary(pl);
  io::write_text(a.out_dir + "/summary.json", summary.dump(2) + "\n");
  m.outputs = {fg, unc, a.out_dir + "/summary.json"};
  m.write(a.out_dir + "/run_manifest.json");
  out << summary.dump() << "\n";
  return kExitOk;
}

// --- evaluate

struct EvaluateArgs {
  std::string pred, gt, ignore, cases, level = "all", criterion = "any_overlap", group_by, out_json, out_csv;
  int jobs = 1;
};

struct LoadedCase {
  LabelVolume pred, gt;
  std::optional<BinaryMask> ignore;
  bool negative = false;
  std::string group;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest m{"evaluate", argv};
  const MatchCriterion crit = MatchCriterion::parse(a.criterion);
  std::vector<json> specs;
  if (!a.cases.empty()) {
    specs = load_cases(a.cases, {"pred", "gt", "ignore"});
    m.inputs = {{"cases", a.cases}};
  } else {
    json c = {{"pred", a.pred}, {"gt", a.gt}};
    if (!a.ignore.empty()) c["ignore"] = a.ignore;
    specs.push_back(c);
    m.inputs = c;
  }
  std::vector<LoadedCase> cases(specs.size());
  parallel_for(specs.size(), a.jobs, [&](std::size_t i) {
    const json& s = specs[i];
    LoadedCase& c = cases[i];
    c.pred = io::load_label(require_path(s, "pred", i));
    c.gt = io::load_label(require_path(s, "gt", i));
    if (!c.pred.same_shape(c.gt))
      throw DataError("case " + std::to_string(i) + ": prediction " + s["pred"].get<std::string>() + " and ground truth " +
                      s["gt"].get<std::string>() + " have different dims");
    if (s.contains("ignore")) {
      c.ignore = to_mask(io::load_label(s["ignore"]));
      if (!c.ignore->same_shape(c.gt)) throw DataError("case " + std::to_string(i) + ": ignore mask dims differ");
    }
    c.negative = std::none_of(c.gt.data().begin(), c.gt.data().end(), [](std::uint32_t v) { return v != 0; });
    if (!a.group_by.empty()) {
      if (!s.contains(a.group_by)) throw SchemaError("/cases/" + std::to_string(i) + "/" + a.group_by, "missing group-by key");
      c.group = s[a.group_by].is_string() ? s[a.group_by].get<std::string>() : s[a.group_by].dump();
    }
  });

  std::vector<std::string> levels;
  if (a.level == "all") levels = {"pixel", "lesion", "patient"};
  else levels = {a.level};

  std::map<std::string, std::vector<std::size_t>> groups;
  if (!a.group_by.empty())
    for (std::size_t i = 0; i < cases.size(); ++i) groups[cases[i].group].push_back(i);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> selections;
  std::vector<std::size_t> all(cases.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  selections.emplace_back(a.group_by.empty() ? "" : "all", all);
  for (auto& [g, idx] : groups) selections.emplace_back(g, idx);

  std::vector<ReportRow> rows;
  for (const auto& [group, idx] : selections) {
    std::vector<EvalCase> ev;
    for (auto i : idx) ev.push_back({&cases[i].pred, &cases[i].gt, cases[i].negative});
    for (const auto& level : levels) {
      if (level == "pixel") {
        ConfusionCounts total;
        for (auto i : idx)
          total += pixel_counts(to_mask(cases[i].pred), to_mask(cases[i].gt), cases[i].ignore ? &*cases[i].ignore : nullptr);
        rows.push_back({group, DetectionReport::from_counts(Level::pixel, total, idx.size())});
      } else if (level == "lesion") {
        rows.push_back({group, lesion_level_metrics(ev, crit)});
      } else {
        rows.push_back({group, patient_level_metrics(ev)});
      }
    }
  }
  const std::string csv = report_csv(rows);
  if (!a.out_csv.empty()) {
    ensure_parent(a.out_csv);
    io::write_text(a.out_csv, csv);
    m.outputs.push_back(a.out_csv);
  }
  if (!a.out_json.empty()) {
    ensure_parent(a.out_json);
    io::write_text(a.out_json, report_json(rows, crit).dump(2) + "\n");
    m.outputs.push_back(a.out_json);
  }
  m.config = {{"level", a.level}, {"criterion", crit.str()}, {"group_by", a.group_by}};
  const std::string target = !a.out_json.empty() ? a.out_json : a.out_csv;
  if (!target.empty()) m.write(target + ".manifest.json");
  out << csv;
  return kExitOk;
}

// --- froc

struct FrocArgs {
  std::string cases, criterion = "any_overlap", out_csv, out_json, svg;
  std::vector<double> levels;
  int jobs = 1;
};

int cmd_froc(const FrocArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest m{"froc", argv};
  m.inputs = {{"cases", a.cases}};
  const MatchCriterion crit = MatchCriterion::parse(a.criterion);
  const auto specs = load_cases(a.cases, {"confidence", "gt"});
  std::vector<Volume> conf(specs.size());
  std::vector<LabelVolume> gts(specs.size());
  parallel_for(specs.size(), a.jobs, [&](std::size_t i) {
    conf[i] = io::load_volume(require_path(specs[i], "confidence", i));
    gts[i] = io::load_label(require_path(specs[i], "gt", i));
    if (!conf[i].same_shape(gts[i])) throw DataError("case " + std::to_string(i) + ": confidence and ground truth dims differ");
  });
  std::vector<FrocCase> cases;
  for (std::size_t i = 0; i < specs.size(); ++i) cases.push_back({&conf[i], &gts[i]});
  const FrocCurve curve = froc(cases, crit, a.levels);
  if (curve.degenerate) spdlog::warn("no local maxima in any confidence volume; FROC curve is a single degenerate point");
  const std::string csv = froc_csv(curve);
  if (!a.out_csv.empty()) {
    ensure_parent(a.out_csv);
    io::write_text(a.out_csv, csv);
    m.outputs.push_back(a.out_csv);
  }
  if (!a.out_json.empty()) {
    ensure_parent(a.out_json);
    io::write_text(a.out_json, to_json(curve).dump(2) + "\n");
    m.outputs.push_back(a.out_json);
  }
  if (!a.svg.empty()) {
    ensure_parent(a.svg);
    io::write_text(a.svg, froc_svg(curve));
    m.outputs.push_back(a.svg);
  }
  m.config = {{"criterion", crit.str()}, {"levels", a.levels}};
  const std::string target = !a.out_csv.empty() ? a.out_csv : !a.out_json.empty() ? a.out_json : a.svg;
  if (!target.empty()) m.write(target + ".manifest.json");
  out << csv;
  return kExitOk;
}

// --- phantom

struct PhantomArgs {
  bool suite = false;
  std::string spec, out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
};

int cmd_phantom(const PhantomArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.suite == !a.spec.empty()) throw UsageError("phantom needs exactly one of --suite or --spec");
  Manifest m{"phantom", argv};
  m.seed = a.seed;
  fs::create_directories(a.out_dir);
  if (a.suite) {
    const auto specs = phantom_suite_specs(a.seed);
    parallel_for(specs.size(), a.jobs, [&](std::size_t k) {
      const auto s = suite_case_seed(a.seed, k);
      write_phantom_case(a.out_dir + "/case_" + std::to_string(k), specs[k], s, generate_phantom(specs[k], s));
    });
    json index = json::array();
    for (std::size_t k = 0; k < specs.size(); ++k)
      index.push_back({{"case", k},
                       {"dir", "case_" + std::to_string(k)},
                       {"negative_case", specs[k].negative_case},
                       {"seed", suite_case_seed(a.seed, k)}});
    io::write_text(a.out_dir + "/suite.json", json({{"seed", a.seed}, {"cases", index}}).dump(2) + "\n");
    out << "wrote " << specs.size() << " cases to " << a.out_dir << "\n";
  } else {
    m.inputs = {{"spec", a.spec}};
    PhantomSpec spec;
    try {
      spec = phantom_spec_from_json(read_json_file(a.spec));
    } catch (const SchemaError& e) {
      throw SchemaError(e.pointer(), e.detail() + " (in " + a.spec + ")");
    }
    write_phantom_case(a.out_dir, spec, a.seed, generate_phantom(spec, a.seed));
    out << "wrote " << a.out_dir << "\n";
  }
  m.write(a.out_dir + "/run_manifest.json");
  return kExitOk;
}

// --- serve

struct ServeArgs {
  std::string data_dir, host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs& a) {
  service::ServerOptions opts;
  opts.data_dir = a.data_dir;
  opts.host = a.host;
  opts.port = a.port;
  service::Server server(opts);
  server.bind();
  server.listen();
  return kExitOk;
}

}  // namespace

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("dragdrop");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
  });
  if (const char* env = std::getenv("DRAGDROP_LOG")) {
    const auto lvl = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept "off" when it was asked for.
    if (lvl != spdlog::level::off || std::string(env) == "off") spdlog::set_level(lvl);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Drag&Drop weak-annotation propagation and evaluation toolkit", "dragdrop"};
  app.set_version_flag("--version", DRAGDROP_VERSION);
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "simulate weak annotations from a ground-truth label");
  SimulateArgs sa;
  sim->add_option("--gt", sa.gt, "ground-truth label volume")->required();
  sim->add_option("--kind", sa.kind, "annotation kind")
      ->check(CLI::IsMember({"dragdrop", "bbox", "points", "ellipse", "scribble"}));
  sim->add_option("--sigma-frac", sa.sigma_frac, "centre noise as a fraction of the lesion radius")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--points", sa.points, "points per lesion for --kind points")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed, "random seed");
  sim->add_option("--out", sa.out, "output annotation JSON")->required();

  auto* prop = app.add_subcommand("propagate", "propagate drag&drop annotations into pseudo-labels");
  PropagateArgs pa;
  prop->add_option("--volume", pa.volume, "image volume")->required();
  prop->add_option("--annotations", pa.annotations, "dragdrop annotation JSON")->required();
  prop->add_option("--config", pa.config, "propagation config JSON");
  prop->add_option("--out-dir", pa.out_dir, "output directory")->required();
  prop->add_option("--format", pa.format, "label file format")->check(CLI::IsMember({"nifti", "raw_json"}));

  auto* eval = app.add_subcommand("evaluate", "pixel, lesion and patient level metrics");
  EvaluateArgs ea;
  auto* pred_opt = eval->add_option("--pred", ea.pred, "predicted label volume");
  auto* gt_opt = eval->add_option("--gt", ea.gt, "ground-truth label volume");
  auto* ign_opt = eval->add_option("--ignore", ea.ignore, "voxels to leave out of pixel metrics");
  auto* cases_opt = eval->add_option("--cases", ea.cases, "JSON list of {pred, gt, ignore?, ...} cases");
  pred_opt->needs(gt_opt);
  gt_opt->needs(pred_opt);
  ign_opt->needs(pred_opt);
  cases_opt->excludes(pred_opt)->excludes(gt_opt)->excludes(ign_opt);
  eval->add_option("--level", ea.level, "report level")->check(CLI::IsMember({"pixel", "lesion", "patient", "all"}));
  eval->add_option("--criterion", ea.criterion, "lesion hit rule: any_overlap or iou:<tau>")
      ->check([](const std::string& s) {
        try {
          MatchCriterion::parse(s);
          return std::string();
        } catch (const std::invalid_argument& e) {
          return std::string(e.what());
        }
      });
  eval->add_option("--group-by", ea.group_by, "case key to group rows by")->needs(cases_opt);
  eval->add_option("--out-json", ea.out_json, "write the JSON report here");
  eval->add_option("--out-csv", ea.out_csv, "write the CSV report here");
  eval->add_option("--jobs", ea.jobs, "cases loaded in parallel")->check(CLI::PositiveNumber);

  auto* fr = app.add_subcommand("froc", "FROC curve from confidence volumes");
  FrocArgs fa;
  fr->add_option("--cases", fa.cases, "JSON list of {confidence, gt} cases")->required();
  fr->add_option("--criterion", fa.criterion, "lesion hit rule: any_overlap or iou:<tau>")
      ->check([](const std::string& s) {
        try {
          MatchCriterion::parse(s);
          return std::string();
        } catch (const std::invalid_argument& e) {
          return std::string(e.what());
        }
      });
  fr->add_option("--levels", fa.levels, "FP/case levels to report sensitivity at")->delimiter(',');
  fr->add_option("--out-csv", fa.out_csv, "write the curve CSV here");
  fr->add_option("--out-json", fa.out_json, "write the curve JSON here");
  fr->add_option("--svg", fa.svg, "write an SVG plot here");
  fr->add_option("--jobs", fa.jobs, "cases loaded in parallel")->check(CLI::PositiveNumber);

  auto* ph = app.add_subcommand("phantom", "generate synthetic phantoms");
  PhantomArgs ha;
  ph->add_flag("--suite", ha.suite, "the fixed 30-case acceptance suite");
  ph->add_option("--spec", ha.spec, "a single PhantomSpec JSON");
  ph->add_option("--seed", ha.seed, "random seed");
  ph->add_option("--out-dir", ha.out_dir, "output directory")->required();
  ph->add_option("--jobs", ha.jobs, "cases generated in parallel")->check(CLI::PositiveNumber);

  auto* sv = app.add_subcommand("serve", "run the HTTP annotation service");
  ServeArgs va;
  sv->add_option("--data-dir", va.data_dir, "directory for uploaded volumes and session logs");
  sv->add_option("--port", va.port, "listening port")->check(CLI::Range(0, 65535));
  sv->add_option("--host", va.host, "listening address");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (eval->parsed() && ea.cases.empty() && ea.pred.empty()) {
    err << "evaluate: give either --pred/--gt or --cases\n";
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sa, args, out);
    if (prop->parsed()) return cmd_propagate(pa, args, out);
    if (eval->parsed()) return cmd_evaluate(ea, args, out);
    if (fr->parsed()) return cmd_froc(fa, args, out);
    if (ph->parsed()) return cmd_phantom(ha, args, out);
    if (sv->parsed()) return cmd_serve(va);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dragdrop::cli
