#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "sngan/sampler_service.hpp"

using namespace sngan;
using namespace sngan::service;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

train::TrainState tiny_state(std::optional<cond::ConditionSchema> schema) {
  train::TrainConfig c = train::default_config(arch::Variant::sn);
  c.model.width = 0.125;
  c.model.z_dim = 16;
  c.model.y_dim = schema ? schema->dim() : 0;
  c.model.wiring = schema ? arch::Wiring::tile_conv1_dense : arch::Wiring::none;
  return train::init_state(c, schema);
}

std::string base64_decode(const std::string& in) {
  static const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  unsigned buffer = 0;
  int bits = 0;
  for (char ch : in) {
    if (ch == '=') break;
    buffer = (buffer << 6) | static_cast<unsigned>(alphabet.find(ch));
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

// Service bound to an ephemeral port for the lifetime of the object.
struct Server {
  SamplerService& svc;
  int port;
  std::thread thread;
  explicit Server(SamplerService& s) : svc(s), port(s.bind_any_port("127.0.0.1")) {
    thread = std::thread([this] { svc.listen_after_bind(); });
  }
  ~Server() {
    svc.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    return c;
  }
};

}  // namespace

TEST_SUITE("sampler_service") {
  TEST_CASE("endpoints answer 503 until a model is loaded") {
    SamplerService svc;
    CHECK(svc.sample("{}", "").status == 503);
    CHECK(svc.schema().status == 503);
    svc.load(tiny_state(cond::face_schema()));
    CHECK(svc.loaded());
    CHECK(svc.schema().status == 200);
  }

  TEST_CASE("schema lists attributes in order with display names") {
    SamplerService face;
    face.load(tiny_state(cond::face_schema()));
    const auto j = json::parse(face.schema().body);
    CHECK(j["conditional"] == true);
    CHECK(j["encoding"] == "multi_hot");
    REQUIRE(j["attributes"].size() == 6);
    CHECK(j["attributes"][0]["name"] == "gender");
    CHECK(j["attributes"][2]["display_name"] == "Age 0-9");
    CHECK(j["attributes"][4]["name"] == "blond_hair");
    CHECK(j["exclusive"][0] == json::array({"black_hair", "blond_hair"}));

    SamplerService lp;
    lp.load(tiny_state(cond::landscape_portrait_schema()));
    CHECK(json::parse(lp.schema().body)["attributes"].size() == 2);

    SamplerService plain;
    plain.load(tiny_state(std::nullopt));
    const auto p = json::parse(plain.schema().body);
    CHECK(p["conditional"] == false);
    CHECK(p["attributes"].empty());
  }

  TEST_CASE("seeded requests are byte-identical and echo the encoded condition") {
    SamplerService svc;
    svc.load(tiny_state(cond::face_schema()));
    const std::string body = R"({"gender":0,"blond_hair":1,"count":4,"seed":7})";
    const auto a = svc.sample(body, "image/png");
    const auto b = svc.sample(body, "image/png");
    REQUIRE(a.status == 200);
    CHECK(a.content_type == "image/png");
    CHECK(a.body == b.body);
    CHECK(a.headers.at("X-Condition") == "[0,0,0,0,1,0]");
    const auto im = img::decode_png(a.body);
    CHECK(im.width == 64);
    CHECK(im.height == 64);
    const auto other = svc.sample(R"({"gender":0,"blond_hair":1,"count":4,"seed":8})", "");
    CHECK(other.body != a.body);
  }

  TEST_CASE("the JSON form carries the same image and y") {
    SamplerService svc;
    svc.load(tiny_state(cond::face_schema()));
    const std::string body = R"({"gender":true,"facial_hair":1,"count":2,"seed":3})";
    const auto raw = svc.sample(body, "");
    const auto wrapped = svc.sample(body, "application/json");
    REQUIRE(wrapped.status == 200);
    const auto j = json::parse(wrapped.body);
    CHECK(base64_decode(j["image_png_base64"]) == raw.body);
    const auto expected = cond::encode(cond::face_schema(), {{"gender", 1}, {"facial_hair", 1}});
    CHECK(j["y"].get<std::vector<float>>() == expected);
    CHECK(j["latency_ms"].get<double>() >= 0.0);
  }

  TEST_CASE("invalid requests are rejected with 400") {
    SamplerService svc;
    svc.load(tiny_state(cond::face_schema()));
    const auto both = svc.sample(R"({"black_hair":1,"blond_hair":1})", "");
    CHECK(both.status == 400);
    CHECK(json::parse(both.body)["error"].get<std::string>().find("blond_hair") != std::string::npos);
    CHECK(svc.sample(R"({"count":65})", "").status == 400);
    CHECK(svc.sample(R"({"count":0})", "").status == 400);
    CHECK(svc.sample(R"({"count":"4"})", "").status == 400);
    CHECK(svc.sample(R"({"seed":-1})", "").status == 400);
    CHECK(svc.sample(R"({"hat":1})", "").status == 400);
    CHECK(svc.sample(R"({"gender":2})", "").status == 400);
    CHECK(svc.sample(R"({"gender":"yes"})", "").status == 400);
    CHECK(svc.sample("{not json", "").status == 400);
    CHECK(svc.sample("[1,2]", "").status == 400);
    SamplerService plain;
    plain.load(tiny_state(std::nullopt));
    CHECK(plain.sample(R"({"gender":1})", "").status == 400);
    CHECK(plain.sample(R"({"count":2,"seed":1})", "").status == 200);
  }

  TEST_CASE("64 samples form an 8x8 grid") {
    SamplerService svc;
    svc.load(tiny_state(cond::shapes_schema()));
    const auto r = svc.sample(R"({"circle":1,"count":64,"seed":1})", "");
    const auto im = img::decode_png(r.body);
    CHECK(im.width == 8 * 32);
    CHECK(im.height == 8 * 32);
  }

  TEST_CASE("metrics return the most recent rows up to the cap") {
    const fs::path log = fs::temp_directory_path() / "sngan_metrics.tsv";
    std::vector<train::LossRecord> rows;
    for (std::uint64_t i = 1; i <= 5; ++i) rows.push_back({i * 10, 1.0 / i, 2.0});
    train::write_loss_log(log, rows);
    SamplerService svc(log);
    auto j = json::parse(svc.metrics(std::nullopt).body);
    CHECK(j["rows"].size() == 5);
    CHECK(j["rows"][4]["iteration"] == 50);
    for (std::uint64_t i = 6; i <= 1500; ++i) rows.push_back({i * 10, 1.0, 2.0});
    train::write_loss_log(log, rows);
    j = json::parse(svc.metrics(std::nullopt).body);
    CHECK(j["rows"].size() == 1000);
    CHECK(j["rows"][999]["iteration"] == 15000);
    for (std::size_t i = 1; i < 1000; ++i) CHECK(j["rows"][i]["iteration"] > j["rows"][i - 1]["iteration"]);
    CHECK(json::parse(svc.metrics("10").body)["rows"].size() == 10);
    CHECK(json::parse(svc.metrics("5000").body)["rows"].size() == 1000);
    CHECK(svc.metrics("abc").status == 400);
    CHECK(SamplerService().metrics(std::nullopt).status == 404);
    fs::remove(log);
  }

  TEST_CASE("HTTP transport, concurrency and a read-only checkpoint") {
    const fs::path dir = fs::temp_directory_path() / "sngan_service_http";
    fs::create_directories(dir);
    const fs::path ckpt = dir / "m.ckpt";
    train::save_checkpoint(tiny_state(cond::face_schema()), ckpt);
    const auto bytes_before = [&] {
      std::ifstream in(ckpt, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    }();

    SamplerService svc(dir / "missing_log.tsv");
    svc.load(ckpt);
    Server server(svc);
    auto c = server.client();

    auto schema = c.Get("/schema");
    REQUIRE(schema);
    CHECK(schema->status == 200);
    CHECK(schema->get_header_value("Access-Control-Allow-Origin") == "*");

    auto res = c.Post("/sample", R"({"gender":0,"blond_hair":1,"count":4,"seed":7})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "image/png");
    CHECK(res->get_header_value("X-Condition") == "[0,0,0,0,1,0]");
    CHECK_FALSE(res->get_header_value("X-Latency-Ms").empty());

    auto bad = c.Post("/sample", R"({"count":65})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    auto metrics = c.Get("/metrics");
    REQUIRE(metrics);
    CHECK(metrics->status == 200);
    CHECK(json::parse(metrics->body)["rows"].empty());

    std::vector<std::future<std::pair<int, std::string>>> futures;
    for (int i = 0; i < 16; ++i)
      futures.push_back(std::async(std::launch::async, [&] {
        auto cl = server.client();
        auto r = cl.Post("/sample", R"({"happiness":1,"count":2})", "application/json");
        return r ? std::pair{r->status, r->body} : std::pair{0, std::string()};
      }));
    std::set<std::string> distinct;
    for (auto& f : futures) {
      const auto [status, body] = f.get();
      CHECK(status == 200);
      CHECK_NOTHROW(img::decode_png(body));
      distinct.insert(body);
    }
    CHECK(distinct.size() == 16);

    const auto bytes_after = [&] {
      std::ifstream in(ckpt, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    CHECK(bytes_after == bytes_before);
    fs::remove_all(dir);
  }
}
