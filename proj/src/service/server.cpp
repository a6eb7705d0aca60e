#include <algorithm>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "dragdrop/core/error.hpp"
#include "dragdrop/io/png.hpp"
#include "dragdrop/io/volume_io.hpp"
#include "dragdrop/service/server.hpp"
#include "dragdrop/service/session.hpp"

// After Eigen: glibc's resolv.h, pulled in by httplib, defines _res as a macro.
#include <httplib.h>

namespace dragdrop::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Raised inside handlers to produce a specific status code.
struct HttpError {
  int status;
  std::string message;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw HttpError{422, std::string("request body is not valid JSON: ") + e.what()};
  }
}

std::string volume_id_for(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int int_param(const httplib::Request& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw HttpError{422, std::string("query parameter '") + key + "' must be an integer"};
  return out;
}

double double_param(const httplib::Request& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw HttpError{422, std::string("query parameter '") + key + "' must be a number"};
  return out;
}

Axis axis_param(const httplib::Request& req) {
  try {
    return parse_axis(req.has_param("axis") ? req.get_param_value("axis") : "z");
  } catch (const std::invalid_argument& e) {
    throw HttpError{422, e.what()};
  }
}

json volume_info(const std::string& id, const Volume& v) {
  return {{"volume_id", id},
          {"dims", json::array({v.dims().x(), v.dims().y(), v.dims().z()})},
          {"spacing", json::array({v.spacing().x(), v.spacing().y(), v.spacing().z()})}};
}

struct Session {
  std::string id;
  std::string volume_id;
  std::shared_ptr<const Volume> volume;

  std::mutex writer;      // one mutation at a time; contenders get 409
  mutable std::mutex mu;  // guards the fields below
  SessionSnapshot snapshot;
  json events = json::array();
  std::string state = "idle";
};

}  // namespace

struct Server::Impl {
  ServerOptions opts;
  httplib::Server http;
  std::thread listener;
  int port = -1;

  std::mutex registry_mu;
  std::map<std::string, std::shared_ptr<const Volume>> volumes;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  int next_session = 1;

  std::mutex jobs_mu;
  std::vector<std::thread> jobs;

  explicit Impl(ServerOptions o) : opts(std::move(o)) {
    load_data_dir();
    routes();
  }

  // --- persistence

  std::string volume_path(const std::string& id) const { return opts.data_dir + "/volumes/" + id + ".nii"; }
  std::string session_path(const std::string& id) const { return opts.data_dir + "/sessions/" + id + ".json"; }

  json log_json(const Session& s) const {
    return {{"session_id", s.id}, {"volume_id", s.volume_id}, {"events", s.events}};
  }

  void persist(const Session& s) const {
    if (opts.data_dir.empty()) return;
    io::write_text(session_path(s.id), log_json(s).dump(2) + "\n");
  }

  void load_data_dir() {
    if (opts.data_dir.empty()) return;
    fs::create_directories(opts.data_dir + "/volumes");
    fs::create_directories(opts.data_dir + "/sessions");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(opts.data_dir + "/volumes")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      if (p.extension() != ".nii") continue;
      volumes[p.stem().string()] = std::make_shared<const Volume>(io::decode_nifti_volume(io::read_file(p.string()), p.string()));
    }
    files.clear();
    for (const auto& e : fs::directory_iterator(opts.data_dir + "/sessions")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      if (p.extension() != ".json") continue;
      const auto bytes = io::read_file(p.string());
      const json log = json::parse(bytes.begin(), bytes.end());
      auto s = std::make_shared<Session>();
      s->id = log.at("session_id");
      s->volume_id = log.at("volume_id");
      auto vit = volumes.find(s->volume_id);
      if (vit == volumes.end()) {
        spdlog::warn("session {} refers to missing volume {}; skipped", s->id, s->volume_id);
        continue;
      }
      s->volume = vit->second;
      s->events = log.at("events");
      s->snapshot = replay(s->events, *s->volume);
      bool propagated = false;
      for (const auto& e : s->events) propagated = propagated || e.at("op") == "propagate";
      s->state = s->snapshot.last_error ? "error" : propagated ? "done" : "idle";
      sessions[s->id] = s;
      if (s->id.rfind("session-", 0) == 0) {
        try {
          next_session = std::max(next_session, std::stoi(s->id.substr(8)) + 1);
        } catch (const std::exception&) {
        }
      }
      spdlog::info("restored session {} ({} events)", s->id, s->events.size());
    }
  }

  // --- lookup

  std::shared_ptr<const Volume> find_volume(const std::string& id) {
    std::lock_guard lock(registry_mu);
    auto it = volumes.find(id);
    if (it == volumes.end()) throw HttpError{404, "unknown volume '" + id + "'"};
    return it->second;
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::lock_guard lock(registry_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "unknown session '" + id + "'"};
    return it->second;
  }

  // --- mutation plumbing

  /// Applies `event` to a copy of the snapshot and commits it with the log entry.
  void commit(Session& s, const json& event) {
    SessionSnapshot next;
    {
      std::lock_guard lock(s.mu);
      next = s.snapshot;
    }
    apply_event(next, event, *s.volume);
    std::lock_guard lock(s.mu);
    s.snapshot = std::move(next);
    json e = event;
    e["seq"] = s.events.size();
    s.events.push_back(std::move(e));
    persist(s);
  }

  std::unique_lock<std::mutex> acquire_writer(Session& s, const std::string& op) {
    std::unique_lock w(s.writer, std::try_to_lock);
    if (!w.owns_lock()) throw HttpError{409, "another edit on this session is in progress"};
    {
      std::lock_guard lock(s.mu);
      if (s.state == "propagating") throw HttpError{409, "session is propagating"};
    }
    if (opts.during_mutation) opts.during_mutation(s.id, op);
    return w;
  }

  void start_propagation(const std::shared_ptr<Session>& s) {
    json event = {{"op", "propagate"}};
    {
      std::lock_guard lock(s->mu);
      if (s->snapshot.annotations.empty()) throw HttpError{422, "propagation needs at least one annotation"};
      s->state = "propagating";
      event["seq"] = s->events.size();
      s->events.push_back(event);
      persist(*s);
    }
    std::lock_guard lock(jobs_mu);
    jobs.emplace_back([this, s, event] {
      if (opts.before_propagate) opts.before_propagate(s->id);
      SessionSnapshot next;
      {
        std::lock_guard l(s->mu);
        next = s->snapshot;
      }
      apply_event(next, event, *s->volume);
      std::lock_guard l(s->mu);
      s->state = next.last_error ? "error" : "done";
      if (next.last_error) spdlog::warn("session {}: propagation failed: {}", s->id, *next.last_error);
      s->snapshot = std::move(next);
    });
  }

  PseudoLabel current_label(const Session& s) const {
    std::lock_guard lock(s.mu);
    if (!s.snapshot.label) throw HttpError{409, "session has no pseudo-label yet"};
    return *s.snapshot.label;
  }

  // --- routes

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const HttpError& e) {
        send_json(res, e.status, {{"error", e.message}});
      } catch (const SchemaError& e) {
        send_json(res, 422, {{"error", e.what()}, {"pointer", e.pointer()}});
      } catch (const DataError& e) {
        send_json(res, 422, {{"error", e.what()}});
      } catch (const GeometryError& e) {
        send_json(res, 422, {{"error", e.what()}});
      } catch (const std::invalid_argument& e) {
        send_json(res, 422, {{"error", e.what()}});
      } catch (const std::out_of_range& e) {
        send_json(res, 422, {{"error", e.what()}});
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_json(res, 500, {{"error", e.what()}});
      }
    };
  }

  void routes() {
    http.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
    http.set_payload_max_length(std::size_t(2) << 30);

    http.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, {{"status", "ok"}, {"version", DRAGDROP_VERSION}});
             }));

    http.Post("/v1/volumes", guarded([this](const httplib::Request& req, httplib::Response& res) {
                if (req.body.empty()) throw HttpError{422, "empty upload; send a NIfTI-1 file as the request body"};
                const std::string id = volume_id_for(req.body);
                const std::vector<std::uint8_t> bytes(req.body.begin(), req.body.end());
                auto vol = std::make_shared<const Volume>(io::decode_nifti_volume(bytes, "upload"));
                {
                  std::lock_guard lock(registry_mu);
                  if (!volumes.count(id)) {
                    volumes[id] = vol;
                    if (!opts.data_dir.empty()) io::write_file(volume_path(id), bytes);
                  }
                }
                send_json(res, 201, volume_info(id, *vol));
              }));

    http.Get("/v1/volumes/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.path_params.at("id");
               send_json(res, 200, volume_info(id, *find_volume(id)));
             }));

    http.Get("/v1/volumes/:id/slice", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto vol = find_volume(req.path_params.at("id"));
               const Axis axis = axis_param(req);
               const int index = int_param(req, "index", vol->dims()[int(axis)] / 2);
               double lo = double_param(req, "lo", vol->array().minCoeff());
               double hi = double_param(req, "hi", vol->array().maxCoeff());
               if (!req.has_param("lo") && !req.has_param("hi") && hi <= lo) hi = lo + 1.0;
               const auto png = io::encode_png(render_slice(*vol, axis, index, lo, hi));
               res.set_content(std::string(png.begin(), png.end()), "image/png");
             }));

    http.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                if (!body.contains("volume_id") || !body["volume_id"].is_string())
                  throw SchemaError("/volume_id", "missing required string field");
                const std::string vid = body["volume_id"];
                auto vol = find_volume(vid);
                const PropagationConfig cfg = body.contains("config") ? config_from_json(body["config"]) : PropagationConfig{};
                auto s = std::make_shared<Session>();
                s->volume_id = vid;
                s->volume = vol;
                {
                  std::lock_guard lock(registry_mu);
                  s->id = "session-" + std::to_string(next_session++);
                  sessions[s->id] = s;
                }
                commit(*s, {{"op", "create"}, {"volume_id", vid}, {"config", to_json(cfg)}});
                send_json(res, 201, {{"session_id", s->id}, {"volume_id", vid}, {"config", to_json(cfg)}});
              }));

    http.Get("/v1/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto s = find_session(req.path_params.at("id"));
               std::lock_guard lock(s->mu);
               json anns = json::array();
               for (const auto& a : s->snapshot.annotations) anns.push_back(to_json(a));
               json body = {{"session_id", s->id},
                            {"volume_id", s->volume_id},
                            {"state", s->state},
                            {"config", to_json(s->snapshot.config)},
                            {"annotations", anns},
                            {"has_label", s->snapshot.label.has_value()}};
               if (s->snapshot.last_error) body["error"] = *s->snapshot.last_error;
               send_json(res, 200, body);
             }));

    http.Post("/v1/sessions/:id/config", guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto s = find_session(req.path_params.at("id"));
                auto w = acquire_writer(*s, "config");
                const PropagationConfig cfg = config_from_json(parse_body(req));
                commit(*s, {{"op", "config"}, {"config", to_json(cfg)}});
                send_json(res, 200, {{"config", to_json(cfg)}});
              }));

    http.Get("/v1/sessions/:id/config", guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto s = find_session(req.path_params.at("id"));
               std::lock_guard lock(s->mu);
               send_json(res, 200, to_json(s->snapshot.config));
             }));

    http.Post("/v1/sessions/:id/annotations", guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto s = find_session(req.path_params.at("id"));
                auto w = acquire_writer(*s, "annotate");
                json body = parse_body(req);
                if (!body.is_object()) throw SchemaError("", "expected an object");
                std::vector<std::uint32_t> used;
                {
                  std::lock_guard lock(s->mu);
                  for (const auto& a : s->snapshot.annotations) used.push_back(a.lesion_id);
                }
                if (!body.contains("class_id")) body["class_id"] = 1;
                if (!body.contains("lesion_id"))
                  body["lesion_id"] = used.empty() ? 0u : *std::max_element(used.begin(), used.end()) + 1;
                const DragDropAnnotation ann = dragdrop_from_json(body);
                if (std::find(used.begin(), used.end(), ann.lesion_id) != used.end())
                  throw SchemaError("/lesion_id", "duplicate lesion_id " + std::to_string(ann.lesion_id));
                const auto warnings = check_annotation(ann, s->volume->dims(), s->volume->spacing());
                commit(*s, {{"op", "annotate"}, {"annotation", to_json(ann)}});
                send_json(res, 201, {{"annotation", to_json(ann)}, {"warnings", warnings}});
              }));

    http.Post("/v1/sessions/:id/propagate", guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto s = find_session(req.path_params.at("id"));
                auto w = acquire_writer(*s, "propagate");
                start_propagation(s);
                send_json(res, 202, {{"session_id", s->id}, {"state", "propagating"}});
              }));

    http.Get("/v1/sessions/:id/status", guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto s = find_session(req.path_params.at("id"));
               std::lock_guard lock(s->mu);
               json body = {{"state", s->state}};
               if (s->state == "error" && s->snapshot.last_error) body["error"] = *s->snapshot.last_error;
               send_json(res, 200, body);
             }));

    http.Get("/v1/sessions/:id/label", guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto s = find_session(req.path_params.at("id"));
               const PseudoLabel label = current_label(*s);
               if (req.has_param("format") && req.get_param_value("format") == "json") {
                 send_json(res, 200, label_summary(label));
                 return;
               }
               const Axis axis = axis_param(req);
               const int index = int_param(req, "index", label.foreground.dims()[int(axis)] / 2);
               const auto png = io::encode_png(label_overlay(label, axis, index));
               res.set_content(std::string(png.begin(), png.end()), "image/png");
             }));

    http.Post("/v1/sessions/:id/refine", guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto s = find_session(req.path_params.at("id"));
                auto w = acquire_writer(*s, "refine");
                const json body = parse_body(req);
                if (!body.contains("clicks") || !body["clicks"].is_array()) throw SchemaError("/clicks", "expected an array");
                json clicks = json::array();
                for (std::size_t i = 0; i < body["clicks"].size(); ++i)
                  clicks.push_back(to_json(click_from_json(body["clicks"][i], "/clicks/" + std::to_string(i))));
                current_label(*s);
                commit(*s, {{"op", "refine"}, {"clicks", clicks}});
                send_json(res, 200, label_summary(current_label(*s)));
              }));

    http.Get("/v1/sessions/:id/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto s = find_session(req.path_params.at("id"));
               const PseudoLabel label = current_label(*s);
               const std::string base = "/v1/sessions/" + s->id + "/export/";
               send_json(res, 200,
                         {{"summary", label_summary(label)},
                          {"files", {{"foreground", base + "foreground"}, {"uncertain", base + "uncertain"}}}});
             }));

    auto export_file = [this](bool foreground) {
      return guarded([this, foreground](const httplib::Request& req, httplib::Response& res) {
        auto s = find_session(req.path_params.at("id"));
        const PseudoLabel label = current_label(*s);
        const bool gz = !req.has_param("gzip") || req.get_param_value("gzip") != "0";
        const auto bytes = io::encode_nifti(foreground ? label.foreground : uncertain_labels(label), gz);
        const std::string name = std::string(foreground ? "foreground" : "uncertain") + (gz ? ".nii.gz" : ".nii");
        res.set_header("Content-Disposition", "attachment; filename=\"" + name + "\"");
        res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
      });
    };
    http.Get("/v1/sessions/:id/export/foreground", export_file(true));
    http.Get("/v1/sessions/:id/export/uncertain", export_file(false));

    http.Get("/v1/sessions/:id/log", guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto s = find_session(req.path_params.at("id"));
               std::lock_guard lock(s->mu);
               send_json(res, 200, log_json(*s));
             }));
  }

  void join_jobs() {
    std::vector<std::thread> pending;
    {
      std::lock_guard lock(jobs_mu);
      pending.swap(jobs);
    }
    for (auto& t : pending)
      if (t.joinable()) t.join();
  }
};

Server::Server(ServerOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}

Server::~Server() { stop(); }

int Server::bind() {
  auto& im = *impl_;
  im.port = im.opts.port == 0 ? im.http.bind_to_any_port(im.opts.host) : (im.http.bind_to_port(im.opts.host, im.opts.port) ? im.opts.port : -1);
  if (im.port < 0) throw std::runtime_error("cannot bind " + im.opts.host + ":" + std::to_string(im.opts.port));
  return im.port;
}

void Server::listen() {
  spdlog::info("serving on http://{}:{}/v1", impl_->opts.host, impl_->port);
  impl_->http.listen_after_bind();
}

int Server::start() {
  const int port = bind();
  impl_->listener = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  impl_->join_jobs();
}

void Server::wait_idle() { impl_->join_jobs(); }

}  // namespace dragdrop::service
