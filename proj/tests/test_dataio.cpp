#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/dataio.hpp"
#include "core/rng.hpp"

using mgnr::SynthObject;
using mgnr::SynthSpec;
using mgnr::Tensor;
using mgnr::VideoSequence;
using mgnr::scalar;
using mgnr::load_frame_ppm;
using mgnr::load_sequence;
using mgnr::save_mask_pgm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Tensor rand_frame(int H, int W, uint64_t seed) {
  mgnr::SplitMix64 rng(seed);
  return Tensor::uniform({1, 3, H, W}, rng, 0, 1);
}

scalar quant8(scalar v) {
  return static_cast<scalar>(std::lround(std::clamp(v, scalar(0), scalar(1)) * 255) / 255.0);
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("frame save/load round-trips at 8-bit granularity") {
  TempDir dir("mgnr_test_ppm");
  Tensor f = rand_frame(6, 9, 1);
  const std::string path = (dir.path / "a.ppm").string();
  save_frame_ppm(f, path);
  Tensor back = load_frame_ppm(path);
  REQUIRE(back.shape() == f.shape());
  for (int64_t i = 0; i < f.numel(); ++i)
    CHECK(back.data()[i] == doctest::Approx(quant8(f.data()[i])).epsilon(1e-12));

  // saving the loaded frame again is byte-identical
  const std::string path2 = (dir.path / "b.ppm").string();
  save_frame_ppm(back, path2);
  CHECK(read_all(path) == read_all(path2));
}

TEST_CASE("ppm loader survives comments and rejects damage") {
  TempDir dir("mgnr_test_ppm2");
  const std::string good = (dir.path / "g.ppm").string();
  {
    std::ofstream out(good, std::ios::binary);
    out << "P6\n# a comment\n 2 1 \n255\n";
    const uint8_t px[6] = {255, 0, 0, 0, 255, 0};
    out.write(reinterpret_cast<const char*>(px), 6);
  }
  Tensor f = load_frame_ppm(good);
  CHECK(f.dim(2) == 1);
  CHECK(f.dim(3) == 2);
  CHECK(f.data()[0] == doctest::Approx(1.0));  // R of pixel 0

  const std::string trunc = (dir.path / "t.ppm").string();
  {
    std::ofstream out(trunc, std::ios::binary);
    out << "P6\n2 2\n255\n";
    const uint8_t px[5] = {1, 2, 3, 4, 5};
    out.write(reinterpret_cast<const char*>(px), 5);
  }
  CHECK_THROWS_WITH_AS(load_frame_ppm(trunc), doctest::Contains("truncated"), mgnr::Error);

  const std::string bad = (dir.path / "m.ppm").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "P5\n2 2\n255\n1234";
  }
  CHECK_THROWS_WITH_AS(load_frame_ppm(bad), doctest::Contains("P6"), mgnr::Error);
  CHECK_THROWS_AS(load_frame_ppm((dir.path / "missing.ppm").string()), mgnr::Error);
}

TEST_CASE("sequence save/load preserves layout and dimensions") {
  TempDir dir("mgnr_test_seq");
  VideoSequence seq;
  seq.N = 2;
  seq.T = 3;
  seq.H = 8;
  seq.W = 8;
  for (int v = 0; v < 2; ++v)
    for (int t = 0; t < 3; ++t) seq.frames.push_back(rand_frame(8, 8, v * 10 + t));
  save_sequence(seq, dir.path.string());

  CHECK(fs::is_regular_file(dir.path / "v01" / "f0002.ppm"));
  VideoSequence back = load_sequence(dir.path.string());
  CHECK(back.N == 2);
  CHECK(back.T == 3);
  CHECK(back.H == 8);
  CHECK(back.W == 8);
  for (int v = 0; v < 2; ++v)
    for (int t = 0; t < 3; ++t)
      for (int64_t i = 0; i < 192; ++i)
        CHECK(back.frame(v, t).data()[i] ==
              doctest::Approx(quant8(seq.frame(v, t).data()[i])).epsilon(1e-12));
}

TEST_CASE("sequence loader reports structural problems") {
  TempDir dir("mgnr_test_seq2");
  CHECK_THROWS_AS(load_sequence((dir.path / "nope").string()), mgnr::Error);
  fs::create_directories(dir.path / "empty");
  CHECK_THROWS_WITH_AS(load_sequence((dir.path / "empty").string()),
                       doctest::Contains("no view directories"), mgnr::Error);

  // mismatched frame counts across views
  VideoSequence seq;
  seq.N = 1;
  seq.T = 2;
  seq.H = seq.W = 4;
  seq.frames = {rand_frame(4, 4, 1), rand_frame(4, 4, 2)};
  save_sequence(seq, (dir.path / "s").string());
  fs::create_directories(dir.path / "s" / "v01");
  save_frame_ppm(rand_frame(4, 4, 3), (dir.path / "s" / "v01" / "f0000.ppm").string());
  CHECK_THROWS_WITH_AS(load_sequence((dir.path / "s").string()), doctest::Contains("mismatch"),
                       mgnr::Error);
}

TEST_CASE("mask dump writes valid PGM bytes") {
  TempDir dir("mgnr_test_pgm");
  std::vector<scalar> mask{0, scalar(0.5), 1, scalar(0.25)};
  const std::string path = (dir.path / "m.pgm").string();
  save_mask_pgm(mask, 2, 2, path);
  const std::string bytes = read_all(path);
  REQUIRE(bytes.size() > 4);
  CHECK(bytes.substr(0, 2) == "P5");
  CHECK(static_cast<uint8_t>(bytes[bytes.size() - 4]) == 0);
  CHECK(static_cast<uint8_t>(bytes[bytes.size() - 3]) == 128);
  CHECK(static_cast<uint8_t>(bytes[bytes.size() - 2]) == 255);
  CHECK(static_cast<uint8_t>(bytes[bytes.size() - 1]) == 64);
}

TEST_CASE("a unit-velocity object advances one pixel per frame") {
  SynthSpec spec;
  spec.views = 1;
  spec.frames = 8;
  spec.width = 32;
  spec.height = 16;
  spec.disparity = 0;
  spec.objects = {SynthObject{2, 4, 5, 6, 1.0, 0.0, 0.9, 0.1, 0.1}};
  auto result = generate_synthetic(spec);
  for (int t = 0; t < 8; ++t) {
    const auto& mask = result.object_masks[t];
    // leftmost set column should be exactly 2 + t
    int leftmost = 1 << 20;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 32; ++x)
        if (mask[y * 32 + x]) leftmost = std::min(leftmost, x);
    CHECK(leftmost == 2 + t);
  }
}

TEST_CASE("disparity shifts each view by a fixed horizontal offset") {
  SynthSpec spec;
  spec.views = 3;
  spec.frames = 2;
  spec.width = 40;
  spec.height = 16;
  spec.disparity = 2;
  spec.objects = {SynthObject{1, 4, 6, 6, 1.0, 0.0, 0.2, 0.9, 0.2}};
  auto result = generate_synthetic(spec);
  for (int v = 0; v < 3; ++v) {
    const auto& mask = result.object_masks[v * 2 + 0];
    int leftmost = 1 << 20;
    for (int i = 0; i < 40 * 16; ++i)
      if (mask[i]) leftmost = std::min(leftmost, i % 40);
    CHECK(leftmost == 1 + 2 * v);
  }
}

TEST_CASE("synthetic generation is reproducible and views share the background") {
  SynthSpec spec;  // defaults: auto objects
  auto a = generate_synthetic(spec);
  auto b = generate_synthetic(spec);
  REQUIRE(a.video.frames.size() == b.video.frames.size());
  for (size_t i = 0; i < a.video.frames.size(); ++i)
    CHECK(std::equal(a.video.frames[i].data().begin(), a.video.frames[i].data().end(),
                     b.video.frames[i].data().begin()));
  spec.seed = 2;
  auto c = generate_synthetic(spec);
  CHECK(!std::equal(a.video.frames[0].data().begin(), a.video.frames[0].data().end(),
                    c.video.frames[0].data().begin()));

  // background pixels (mask 0 in both frames) agree across views of the same frame
  const auto& m0 = a.object_masks[0 * spec.frames + 0];
  const auto& m1 = a.object_masks[1 * spec.frames + 0];
  auto f0 = a.video.frame(0, 0).data();
  auto f1 = a.video.frame(1, 0).data();
  const int HW = spec.width * spec.height;
  int checked = 0;
  for (int i = 0; i < HW; ++i) {
    if (m0[i] || m1[i]) continue;
    for (int ch = 0; ch < 3; ++ch) CHECK(f0[ch * HW + i] == f1[ch * HW + i]);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("spec validation rejects objects that exit the frame") {
  SynthSpec spec;
  spec.views = 2;
  spec.frames = 8;
  spec.width = 24;
  spec.height = 16;
  spec.disparity = 2;
  spec.objects = {SynthObject{14, 2, 8, 8, 1.0, 0.0, 1, 1, 1}};  // x reaches 14+7+2 = 23 > 24-8
  CHECK_THROWS_WITH_AS(generate_synthetic(spec), doctest::Contains("leaves the frame"),
                       mgnr::Error);
}

TEST_CASE("spec files parse and reject unknown keys") {
  TempDir dir("mgnr_test_spec");
  const std::string path = (dir.path / "s.txt").string();
  {
    std::ofstream out(path);
    out << "# synthetic sequence\n"
        << "views=3\n"
        << "frames=5\n"
        << "width=48\n"
        << "height=32\n"
        << "seed=11\n"
        << "disparity=1.5\n"
        << "object0=2,3,6,7,1.0,0.5,0.9,0.2,0.1\n";
  }
  SynthSpec spec = SynthSpec::parse_file(path);
  CHECK(spec.views == 3);
  CHECK(spec.frames == 5);
  CHECK(spec.width == 48);
  CHECK(spec.height == 32);
  CHECK(spec.seed == 11);
  CHECK(spec.disparity == doctest::Approx(1.5));
  REQUIRE(spec.objects.size() == 1);
  CHECK(spec.objects[0].x == 2);
  CHECK(spec.objects[0].vy == doctest::Approx(0.5));
  CHECK(spec.objects[0].b == doctest::Approx(0.1));

  const std::string bad = (dir.path / "bad.txt").string();
  {
    std::ofstream out(bad);
    out << "view=3\n";
  }
  CHECK_THROWS_WITH_AS(SynthSpec::parse_file(bad), doctest::Contains("unknown key"), mgnr::Error);

  const std::string bad2 = (dir.path / "bad2.txt").string();
  {
    std::ofstream out(bad2);
    out << "views=abc\n";
  }
  CHECK_THROWS_AS(SynthSpec::parse_file(bad2), mgnr::Error);
}
