#pragma once

#include <functional>
#include <memory>
#include <string>

namespace dragdrop::service {

struct ServerOptions {
  /// Uploaded volumes and session logs live here; empty keeps everything in memory.
  std::string data_dir;
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 0;
  /// Runs on the job thread before a propagation starts. Tests use it to hold a job open.
  std::function<void(const std::string& session_id)> before_propagate;
  /// Runs while a mutation holds the session's writer slot.
  std::function<void(const std::string& session_id, const std::string& op)> during_mutation;
};

/// HTTP backend under /v1. Sessions reload from `data_dir` by replaying their edit logs.
class Server {
 public:
  explicit Server(ServerOptions opts);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the listening socket and returns the port.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void listen();
  /// bind() and listen() on a background thread; returns the port.
  int start();
  void stop();
  /// Blocks until every propagation job has finished.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dragdrop::service
