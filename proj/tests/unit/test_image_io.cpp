#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sngan/image_io.hpp"

using namespace sngan::img;
namespace fs = std::filesystem;

TEST_SUITE("image_io") {
  TEST_CASE("PNG round trip preserves pixels for gray and RGB") {
    for (std::size_t c : {1u, 3u}) {
      Image im(5, 3, c);
      for (std::size_t i = 0; i < im.pixels.size(); ++i) im.pixels[i] = static_cast<std::uint8_t>(i * 7);
      const Image back = decode_png(encode_png(im));
      CHECK(back.width == 5);
      CHECK(back.height == 3);
      CHECK(back.channels == c);
      CHECK(back.pixels == im.pixels);
    }
  }

  TEST_CASE("encoding is byte-stable") {
    Image im(4, 4, 3);
    im.at(1, 2, 0) = 200;
    CHECK(encode_png(im) == encode_png(im));
  }

  TEST_CASE("corrupt and missing files raise ImageError") {
    CHECK_THROWS_AS(decode_png("not a png"), ImageError);
    std::string bytes = encode_png(Image(4, 4, 3));
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(decode_png(bytes), ImageError);
    CHECK_THROWS_AS(read_png("/nonexistent/x.png"), ImageError);
  }

  TEST_CASE("files round trip") {
    const fs::path p = fs::temp_directory_path() / "sngan_io_test.png";
    Image im(2, 2, 3);
    im.at(1, 1, 2) = 99;
    write_png(p, im);
    CHECK(read_png(p).pixels == im.pixels);
    fs::remove(p);
  }
}
