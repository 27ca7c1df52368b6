#include <set>

#include "doctest.h"
#include "sngan/conditioning.hpp"

using namespace sngan;
using namespace sngan::cond;

TEST_SUITE("conditioning") {
  TEST_CASE("face schema lists six attributes in order") {
    const auto s = face_schema();
    CHECK(s.attributes ==
          std::vector<std::string>{"gender", "happiness", "age_0_9", "black_hair", "blond_hair", "facial_hair"});
    CHECK(s.encoding == Encoding::multi_hot);
    CHECK(landscape_portrait_schema().dim() == 2);
    CHECK(digit_schema().dim() == 10);
  }

  TEST_CASE("display names are readable") {
    CHECK(display_name("black_hair") == "Black hair");
    CHECK(display_name("age_0_9") == "Age 0-9");
    CHECK(display_name("gender") == "Gender");
  }

  TEST_CASE("blond female request encodes with unspecified flags at zero") {
    const auto y = encode(face_schema(), {{"gender", 0}, {"blond_hair", 1}});
    CHECK(y == ConditionVector{0, 0, 0, 0, 1, 0});
  }

  TEST_CASE("encoding rejects invalid requests") {
    const auto face = face_schema();
    CHECK_THROWS_WITH_AS(encode(face, {{"black_hair", 1}, {"blond_hair", 1}}), doctest::Contains("black_hair"),
                         ValidationError);
    CHECK_THROWS_AS(encode(face, {{"hat", 1}}), ValidationError);
    CHECK_THROWS_AS(encode(face, {{"gender", 2}}), ValidationError);
    CHECK_THROWS_AS(encode(shapes_schema(), {{"circle", 1}, {"square", 1}}), ValidationError);
    CHECK(encode(shapes_schema(), {}) == ConditionVector{0, 0});
  }

  TEST_CASE("validate checks width, values and exclusivity") {
    const auto face = face_schema();
    CHECK_NOTHROW(face.validate({1, 1, 1, 1, 0, 1}));
    CHECK_THROWS_AS(face.validate({1, 1, 1}), ValidationError);
    CHECK_THROWS_AS(face.validate({0.5f, 0, 0, 0, 0, 0}), ValidationError);
    CHECK_THROWS_AS(face.validate({0, 0, 0, 1, 1, 0}), ValidationError);
  }

  TEST_CASE("schema definitions are checked") {
    ConditionSchema s{"x", Encoding::multi_hot, {"a", "a"}, {}};
    CHECK_THROWS_AS(s.check(), ValidationError);
    ConditionSchema t{"x", Encoding::multi_hot, {"a", "b"}, {{"a", "c"}}};
    CHECK_THROWS_AS(t.check(), ValidationError);
    CHECK_THROWS_AS(schema_by_name("nope"), std::invalid_argument);
  }

  TEST_CASE("grid conditions split the batch in halves") {
    for (const auto& [schema, split] : std::vector<std::pair<ConditionSchema, std::string>>{
             {face_schema(), "blond_hair"}, {shapes_schema(), "circle"}, {digit_schema(), "digit_3"}}) {
      CAPTURE(schema.name);
      const auto rows = grid_conditions(schema, split, 64, 5);
      REQUIRE(rows.size() == 64);
      const auto idx = *schema.index_of(split);
      for (std::size_t i = 0; i < 64; ++i) {
        CHECK(rows[i][idx] == (i < 32 ? 1.0f : 0.0f));
        CHECK_NOTHROW(schema.validate(rows[i]));
      }
      CHECK(grid_conditions(schema, split, 64, 5) == rows);
    }
    CHECK_THROWS_AS(grid_conditions(shapes_schema(), "circle", 7, 1), std::invalid_argument);
    CHECK_THROWS_AS(grid_conditions(shapes_schema(), "hexagon", 8, 1), ValidationError);
  }

  TEST_CASE("one-hot second halves draw a different class") {
    const auto rows = grid_conditions(digit_schema(), "digit_0", 200, 9);
    std::set<std::size_t> seen;
    for (std::size_t i = 100; i < 200; ++i) {
      float sum = 0;
      for (std::size_t k = 0; k < 10; ++k) {
        sum += rows[i][k];
        if (rows[i][k] == 1.0f) seen.insert(k);
      }
      CHECK(sum == 1.0f);
    }
    CHECK(seen.count(0) == 0);
    CHECK(seen.size() == 9);
  }

  TEST_CASE("to_tensor stacks rows") {
    const auto t = to_tensor({{1, 0}, {0, 1}, {0, 0}}, 2);
    CHECK(t.shape() == nn::Shape{3, 2});
    CHECK(t[3] == 1.0f);
  }
}
