#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "doremi/loop.hpp"

namespace httplib {
class Server;
}

namespace doremi::service {

struct server_options {
  std::string run_id;
  std::optional<std::string> token;  // static bearer token; unset disables auth
  std::optional<std::filesystem::path> static_dir;
};

// HTTP front of a loop run in serve mode. All run mutations go through one
// lock; /api/status answers from a snapshot so it stays responsive while an
// iteration trains.
//
//   GET  /api/queue/next?annotator=NAME
//   POST /api/annotations          {"title","h_idx","t_idx","labels":[...],"annotator"}
//   GET  /api/status
//   POST /api/iterations/advance
//   GET  /api/docs/{id}
//   GET  /api/relations
class annotation_server {
 public:
  annotation_server(loop_runner& runner, server_options options);
  ~annotation_server();

  annotation_server(const annotation_server&) = delete;
  annotation_server& operator=(const annotation_server&) = delete;

  // Binds to host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  bool serve();
  void stop();
  void wait_until_ready() const;

  nlohmann::json status() const;

 private:
  void install_routes();
  void refresh_snapshot(bool training);

  loop_runner& runner_;
  server_options options_;
  std::unique_ptr<httplib::Server> http_;
  std::mutex run_mutex_;
  mutable std::mutex snapshot_mutex_;
  nlohmann::json snapshot_;
};

// Status document shared by the service and `doremi stats --run`.
nlohmann::json status_json(const loop_runner& runner, const std::string& run_id, bool training);

}  // namespace doremi::service
