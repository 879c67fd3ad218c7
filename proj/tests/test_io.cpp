#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "omnisal/error.hpp"
#include "omnisal/nn/tensor_io.hpp"
#include "omnisal/raster_io.hpp"

using namespace omnisal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("omnisal_io_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("little endian helpers") {
  std::vector<std::uint8_t> buf;
  le::put_u32(buf, 0x01020304u);
  CHECK(buf == std::vector<std::uint8_t>{4, 3, 2, 1});
  CHECK(le::get_u32(buf.data()) == 0x01020304u);
  buf.clear();
  le::put_f32(buf, -1.5f);
  CHECK(le::get_f32(buf.data()) == -1.5f);
}

TEST_CASE("png round trip") {
  TempDir dir;
  Raster rgb(7, 5, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<float>((i * 37) % 256);
  write_png(dir.path / "rgb.png", rgb);
  const auto back = read_png(dir.path / "rgb.png");
  REQUIRE(back.same_dims(rgb));
  CHECK(back.data == rgb.data);

  Raster gray(4, 3, 1);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<float>(i * 20);
  write_png(dir.path / "gray.png", gray);
  const auto g = read_png(dir.path / "gray.png");
  CHECK(g.channels == 1);
  CHECK(g.data == gray.data);

  CHECK(code_of([&] { write_png(dir.path / "x.png", Raster(2, 2, 2)); }) == Errc::InvalidArgument);
}

TEST_CASE("saliency png is max scaled") {
  TempDir dir;
  Raster m(3, 1, 1);
  m.data = {0.0f, 0.25f, 0.5f};
  write_saliency_png(dir.path / "s.png", m);
  const auto back = read_png(dir.path / "s.png");
  CHECK(back.data[0] == 0.0f);
  CHECK(back.data[2] == 255.0f);
  CHECK(std::abs(back.data[1] - 127.5f) <= 0.5f);
  const auto sal = read_saliency(dir.path / "s.png");
  CHECK(sal.channels == 1);
}

TEST_CASE("sal round trip is bit exact") {
  TempDir dir;
  Raster m(9, 4, 1);
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0, 1);
  for (float& v : m.data) v = u(rng);
  m.data[3] = 1e-30f;
  write_sal(dir.path / "m.sal", m);
  const auto back = read_saliency(dir.path / "m.sal");
  REQUIRE(back.same_dims(m));
  CHECK(back.data == m.data);

  const auto bytes = encode_sal(m);
  CHECK(bytes.size() == 12 + 4 * m.data.size());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SAL1");
  CHECK(code_of([] { encode_sal(Raster(2, 2, 3)); }) == Errc::InvalidArgument);
}

TEST_CASE("corrupt and missing files") {
  TempDir dir;
  auto bytes = encode_sal(Raster(4, 4, 1, 0.5f));
  SUBCASE("truncated sal") {
    bytes.pop_back();
    CHECK(code_of([&] { decode_sal(bytes); }) == Errc::CorruptFile);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK(code_of([&] { decode_sal(bytes); }) == Errc::CorruptFile);
  }
  SUBCASE("short header") {
    const std::vector<std::uint8_t> tiny{'S', 'A'};
    CHECK(code_of([&] { decode_sal(tiny); }) == Errc::CorruptFile);
  }
  SUBCASE("garbage png") {
    const std::vector<std::uint8_t> junk(64, 0x5a);
    write_file_bytes(dir.path / "junk.png", junk);
    CHECK(code_of([&] { read_png(dir.path / "junk.png"); }) == Errc::BadImage);
  }
  SUBCASE("missing files") {
    CHECK(code_of([&] { read_png(dir.path / "none.png"); }) == Errc::IoError);
    CHECK(code_of([&] { read_sal(dir.path / "none.sal"); }) == Errc::IoError);
    CHECK(code_of([&] { nn::read_tensor(dir.path / "none.ten"); }) == Errc::IoError);
  }
  SUBCASE("unwritable path") {
    CHECK(code_of([&] { write_sal(dir.path / "no" / "such" / "dir.sal", Raster(1, 1, 1)); }) == Errc::IoError);
  }
}

TEST_CASE("tensor files") {
  TempDir dir;
  nn::Tensor t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.125 * static_cast<double>(i) - 1.0;
  nn::write_tensor(dir.path / "t.ten", t);
  const auto back = nn::read_tensor(dir.path / "t.ten");
  CHECK(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);

  auto bytes = nn::encode_tensor(t);
  bytes.resize(bytes.size() - 3);
  CHECK(code_of([&] { nn::decode_tensor(bytes); }) == Errc::CorruptFile);
}
