#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "sngan/trainer.hpp"

namespace httplib {
class Server;
}

namespace sngan::service {

inline constexpr std::size_t kMaxCount = 64;
inline constexpr std::size_t kMaxMetricsRows = 1000;

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Conditional sampler over a read-only generator. Handlers are safe to call
/// concurrently; each request owns its random stream.
class SamplerService {
 public:
  explicit SamplerService(std::optional<std::filesystem::path> loss_log = std::nullopt);
  ~SamplerService();

  void load(const std::filesystem::path& checkpoint);
  void load(train::TrainState state);
  bool loaded() const;

  /// POST /sample. Body: attribute flags plus optional "count" (1..64) and
  /// "seed". PNG by default; {image_png_base64, y, latency_ms} when `accept`
  /// asks for application/json.
  Response sample(const std::string& body, const std::string& accept) const;
  /// GET /schema.
  Response schema() const;
  /// GET /metrics?k=N: the last min(N, 1000) loss-log rows.
  Response metrics(std::optional<std::string> k) const;

  /// Registers the endpoints on an httplib server.
  void mount(httplib::Server& server) const;
  /// Blocks serving on host:port until stop() is called.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

 private:
  struct Model {
    train::TrainState state;
  };
  std::optional<std::filesystem::path> loss_log_;
  mutable std::shared_mutex mutex_;
  std::shared_ptr<Model> model_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::atomic<std::uint64_t> request_counter_{0};
};

}  // namespace sngan::service
