#include "sngan/sampler_service.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <random>

#include "httplib.h"
#include "json.hpp"

namespace sngan::service {

using json = nlohmann::json;
using nn::Tensor;

namespace {

Response error(int status, const std::string& message) {
  Response r;
  r.status = status;
  r.body = json{{"error", message}}.dump();
  return r;
}

Response not_loaded() { return error(503, "no model loaded"); }

}  // namespace

SamplerService::SamplerService(std::optional<std::filesystem::path> loss_log) : loss_log_(std::move(loss_log)) {}

SamplerService::~SamplerService() = default;

void SamplerService::load(const std::filesystem::path& checkpoint) { load(train::load_checkpoint(checkpoint)); }

void SamplerService::load(train::TrainState state) {
  auto model = std::make_shared<Model>(Model{std::move(state)});
  std::unique_lock lock(mutex_);
  model_ = std::move(model);
}

bool SamplerService::loaded() const {
  std::shared_lock lock(mutex_);
  return model_ != nullptr;
}

Response SamplerService::sample(const std::string& body, const std::string& accept) const {
  const auto started = std::chrono::steady_clock::now();
  std::shared_ptr<Model> model;
  {
    std::shared_lock lock(mutex_);
    model = model_;
  }
  if (!model) return not_loaded();
  auto& state = model->state;

  json request;
  try {
    request = body.empty() ? json::object() : json::parse(body);
  } catch (const json::exception& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }
  if (!request.is_object()) return error(400, "request body must be a JSON object");

  std::size_t count = 1;
  std::optional<std::uint64_t> seed;
  cond::Flags flags;
  for (const auto& [key, value] : request.items()) {
    if (key == "count") {
      if (!value.is_number_integer() || value.get<long long>() < 1 || value.get<long long>() > static_cast<long long>(kMaxCount))
        return error(400, "count must be an integer in [1, " + std::to_string(kMaxCount) + "]");
      count = value.get<std::size_t>();
    } else if (key == "seed") {
      if (!value.is_number_integer() || value.get<long long>() < 0) return error(400, "seed must be a non-negative integer");
      seed = value.get<std::uint64_t>();
    } else if (value.is_boolean()) {
      flags[key] = value.get<bool>() ? 1 : 0;
    } else if (value.is_number_integer()) {
      flags[key] = static_cast<int>(std::clamp<long long>(value.get<long long>(), -1, 2));
    } else {
      return error(400, "attribute " + key + " must be 0, 1, true or false");
    }
  }

  std::optional<cond::ConditionVector> y;
  if (state.schema) {
    try {
      y = cond::encode(*state.schema, flags);
    } catch (const cond::ValidationError& e) {
      return error(400, e.what());
    }
  } else if (!flags.empty()) {
    return error(400, "the loaded model is unconditional and takes no attributes");
  }

  const std::uint64_t stream = seed ? *seed : std::random_device{}() ^ (request_counter_.fetch_add(1) << 32);
  Rng rng(stream);
  const Tensor z = arch::sample_z(count, state.config.model.z_dim, rng);
  std::optional<Tensor> ys;
  if (y) ys = cond::to_tensor(std::vector<cond::ConditionVector>(count, *y), y->size());
  // The generator is read-only in eval mode, so concurrent requests share it.
  const Tensor images = train::generate(state.pair, z, ys ? &*ys : nullptr);
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const std::string png = img::encode_png(data::tile_grid(images, cols));
  const double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

  json y_json = json::array();
  if (y)
    for (float v : *y) y_json.push_back(static_cast<int>(v));
  Response r;
  r.headers["X-Condition"] = y_json.dump();
  r.headers["X-Latency-Ms"] = std::to_string(latency);
  if (accept.find("application/json") != std::string::npos) {
    r.content_type = "application/json";
    r.body = json{{"image_png_base64", httplib::detail::base64_encode(png)}, {"y", y_json}, {"latency_ms", latency}}
                 .dump();
  } else {
    r.content_type = "image/png";
    r.body = png;
  }
  return r;
}

Response SamplerService::schema() const {
  std::shared_ptr<Model> model;
  {
    std::shared_lock lock(mutex_);
    model = model_;
  }
  if (!model) return not_loaded();
  const auto& s = model->state.schema;
  json attrs = json::array();
  json exclusive = json::array();
  if (s) {
    for (const auto& a : s->attributes)
      attrs.push_back({{"name", a}, {"display_name", cond::display_name(a)}, {"type", "binary"}});
    for (const auto& [a, b] : s->exclusive) exclusive.push_back({a, b});
  }
  Response r;
  r.body = json{{"conditional", s.has_value()},
                {"schema", s ? s->name : ""},
                {"encoding", s ? cond::to_string(s->encoding) : ""},
                {"attributes", attrs},
                {"exclusive", exclusive},
                {"max_count", kMaxCount},
                {"resolution", model->state.config.model.resolution}}
               .dump();
  return r;
}

Response SamplerService::metrics(std::optional<std::string> k) const {
  if (!loss_log_) return error(404, "no loss log configured");
  std::size_t limit = kMaxMetricsRows;
  if (k) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(*k, &pos);
      if (pos != k->size() || v < 1) throw std::invalid_argument("k");
      limit = std::min<std::size_t>(static_cast<std::size_t>(v), kMaxMetricsRows);
    } catch (const std::exception&) {
      return error(400, "k must be a positive integer");
    }
  }
  std::vector<train::LossRecord> rows;
  if (std::filesystem::exists(*loss_log_)) {
    try {
      rows = train::read_loss_log(*loss_log_);
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }
  const std::size_t first = rows.size() > limit ? rows.size() - limit : 0;
  json out = json::array();
  for (std::size_t i = first; i < rows.size(); ++i)
    out.push_back({{"iteration", rows[i].iteration}, {"d_loss", rows[i].d_loss}, {"g_loss", rows[i].g_loss}});
  Response r;
  r.body = json{{"rows", out}, {"count", out.size()}}.dump();
  return r;
}

namespace {

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  for (const auto& [k, v] : r.headers) res.set_header(k, v);
  res.set_header("Access-Control-Allow-Origin", "*");
  res.set_header("Access-Control-Expose-Headers", "X-Condition, X-Latency-Ms");
  res.set_content(r.body, r.content_type);
}

}  // namespace

void SamplerService::mount(httplib::Server& server) const {
  server.Post("/sample", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, sample(req.body, req.get_header_value("Accept")));
  });
  server.Get("/schema", [this](const httplib::Request&, httplib::Response& res) { send(res, schema()); });
  server.Get("/metrics", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> k;
    if (req.has_param("k")) k = req.get_param_value("k");
    send(res, metrics(k));
  });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Accept");
    res.status = 204;
  });
}

bool SamplerService::listen(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  return server_->listen(host, port);
}

int SamplerService::bind_any_port(const std::string& host) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  return server_->bind_to_any_port(host);
}

bool SamplerService::listen_after_bind() { return server_ && server_->listen_after_bind(); }

void SamplerService::stop() {
  if (server_) server_->stop();
}

}  // namespace sngan::service
