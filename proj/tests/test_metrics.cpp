#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "core/metrics.hpp"
#include "core/rng.hpp"

using mgnr::Error;
using mgnr::ErrorKind;
using mgnr::QualityKey;
using mgnr::RDPoint;
using mgnr::Tensor;
using mgnr::VideoSequence;
using mgnr::bd_rate;
using mgnr::psnr;
using mgnr::psnr_region;
using mgnr::read_rd_csv;
using mgnr::ssim_sequence;
using mgnr::write_rd_csv;

namespace {

VideoSequence rand_sequence(int N, int T, int H, int W, uint64_t seed) {
  mgnr::SplitMix64 rng(seed);
  VideoSequence s;
  s.N = N;
  s.T = T;
  s.H = H;
  s.W = W;
  for (int i = 0; i < N * T; ++i) s.frames.push_back(Tensor::uniform({1, 3, H, W}, rng, 0, 1));
  return s;
}

VideoSequence offset_sequence(const VideoSequence& src, double delta) {
  VideoSequence out = src;
  out.frames.clear();
  for (const Tensor& f : src.frames) {
    std::vector<mgnr::scalar> d(f.data().begin(), f.data().end());
    for (auto& v : d) v += mgnr::scalar(delta);
    out.frames.push_back(Tensor::from_data(f.shape(), std::move(d)));
  }
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// True curves for the synthetic BD oracle: log-linear rate in quality.
double curve_anchor(double q) { return std::pow(2.0, q / 6.0); }
double curve_test(double q) { return std::pow(2.0, (q - 3.0) / 6.0); }

// Dense trapezoid integration of the true log-rate gap, no curve fitting.
double bd_oracle(double lo, double hi, int samples) {
  double sum = 0;
  double prev = std::log10(curve_test(lo)) - std::log10(curve_anchor(lo));
  for (int i = 1; i < samples; ++i) {
    double q = lo + (hi - lo) * double(i) / double(samples - 1);
    double gap = std::log10(curve_test(q)) - std::log10(curve_anchor(q));
    sum += 0.5 * (prev + gap);
    prev = gap;
  }
  double delta = sum * (hi - lo) / double(samples - 1) / (hi - lo);
  return 100.0 * (std::pow(10.0, delta) - 1.0);
}

}  // namespace

TEST_CASE("a constant 0.1 offset scores exactly 20 dB") {
  VideoSequence x = rand_sequence(2, 3, 8, 8, 11);
  // Keep x + 0.1 representable headroom irrelevant: PSNR only sees the diff.
  VideoSequence y = offset_sequence(x, 0.1);
  double v = psnr(x, y);
  // 0.1 is not exact in binary; the squared error still pools to 0.01
  // within float rounding.
  CHECK(v == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("identical sequences report the +inf sentinel") {
  VideoSequence x = rand_sequence(1, 2, 6, 7, 5);
  CHECK(std::isinf(psnr(x, x)));
  CHECK(psnr(x, x) > 0);
  CHECK(ssim_sequence(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("psnr matches a direct mse oracle") {
  VideoSequence x = rand_sequence(2, 2, 9, 11, 21);
  VideoSequence y = rand_sequence(2, 2, 9, 11, 22);
  double sse = 0, n = 0;
  for (size_t f = 0; f < x.frames.size(); ++f) {
    auto a = x.frames[f].data();
    auto b = y.frames[f].data();
    for (size_t i = 0; i < a.size(); ++i) {
      double d = double(a[i]) - double(b[i]);
      sse += d * d;
    }
    n += double(a.size());
  }
  double expect = 10.0 * std::log10(n / sse);
  CHECK(psnr(x, y) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("psnr ignores a permutation applied to both inputs") {
  VideoSequence x = rand_sequence(2, 3, 8, 8, 31);
  VideoSequence y = rand_sequence(2, 3, 8, 8, 32);
  double before = psnr(x, y);
  // Reverse frame order in both sequences.
  VideoSequence xp = x, yp = y;
  std::reverse(xp.frames.begin(), xp.frames.end());
  std::reverse(yp.frames.begin(), yp.frames.end());
  CHECK(psnr(xp, yp) == doctest::Approx(before).epsilon(1e-15));
}

TEST_CASE("region psnr pools only the marked pixels") {
  VideoSequence x = rand_sequence(1, 1, 4, 4, 41);
  VideoSequence y = rand_sequence(1, 1, 4, 4, 42);
  std::vector<std::vector<uint8_t>> region(1, std::vector<uint8_t>(16, 0));
  region[0][3] = region[0][7] = 1;
  auto a = x.frames[0].data();
  auto b = y.frames[0].data();
  double sse = 0;
  for (int p : {3, 7})
    for (int ch = 0; ch < 3; ++ch) {
      double d = double(a[ch * 16 + p]) - double(b[ch * 16 + p]);
      sse += d * d;
    }
  double expect = 10.0 * std::log10(6.0 / sse);
  CHECK(psnr_region(x, y, region) == doctest::Approx(expect).epsilon(1e-12));

  std::vector<std::vector<uint8_t>> empty_mask(1, std::vector<uint8_t>(16, 0));
  CHECK_THROWS_AS(psnr_region(x, y, empty_mask), Error);
}

TEST_CASE("mismatched sequences are rejected") {
  VideoSequence x = rand_sequence(1, 2, 8, 8, 1);
  VideoSequence y = rand_sequence(1, 2, 8, 9, 1);
  CHECK_THROWS_AS(psnr(x, y), Error);
  try {
    psnr(x, y);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("identical curves give zero bd-rate") {
  std::vector<RDPoint> a;
  for (double q : {30.0, 34.0, 38.0, 42.0}) a.push_back({curve_anchor(q), q, 0.9});
  CHECK(bd_rate(a, a, QualityKey::psnr) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("halving the rate at every quality is exactly minus fifty percent") {
  std::vector<RDPoint> a, b;
  for (double q : {30.0, 33.0, 37.5, 40.0, 42.0}) {
    double r = 0.05 * std::pow(2.0, q / 5.0);
    a.push_back({r, q, 0});
    b.push_back({0.5 * r, q, 0});
  }
  CHECK(bd_rate(a, b, QualityKey::psnr) == doctest::Approx(-50.0).epsilon(1e-9));
  CHECK(bd_rate(b, a, QualityKey::psnr) == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("synthetic log-linear curves match dense numeric integration") {
  std::vector<RDPoint> a, b;
  for (double q : {30.0, 34.0, 38.0, 42.0}) a.push_back({curve_anchor(q), q, 0});
  for (double q : {30.0, 34.0, 38.0, 42.0}) b.push_back({curve_test(q), q, 0});
  double got = bd_rate(a, b, QualityKey::psnr);
  double want = bd_oracle(30.0, 42.0, 10000);
  CHECK(std::fabs(got - want) < 0.5);
  // The gap is a constant log shift, so the closed form is available too.
  CHECK(got == doctest::Approx(100.0 * (std::pow(2.0, -0.5) - 1.0)).epsilon(1e-9));
}

TEST_CASE("swapping anchor and test inverts the ratio") {
  std::vector<RDPoint> a, b;
  for (double q : {30.0, 34.0, 38.0, 42.0}) a.push_back({0.1 * std::pow(2.0, q / 6.0), q, 0});
  for (double q : {31.0, 35.0, 39.0, 41.5}) b.push_back({0.08 * std::pow(2.0, q / 6.5), q, 0});
  double ab = bd_rate(a, b, QualityKey::psnr);
  double ba = bd_rate(b, a, QualityKey::psnr);
  double product = (1.0 + ab / 100.0) * (1.0 + ba / 100.0);
  CHECK(std::fabs(product - 1.0) < 0.01);
}

TEST_CASE("the ssim quality key reads the ssim column") {
  std::vector<RDPoint> a, b;
  for (double s : {0.90, 0.93, 0.96, 0.99}) {
    double r = 0.05 * std::pow(2.0, s * 40.0);
    a.push_back({r, 0, s});
    b.push_back({0.5 * r, 0, s});
  }
  CHECK(bd_rate(a, b, QualityKey::ssim) == doctest::Approx(-50.0).epsilon(1e-9));
}

TEST_CASE("degenerate bd-rate inputs are structured config errors") {
  std::vector<RDPoint> three = {{1, 30, 0}, {2, 34, 0}, {4, 38, 0}};
  std::vector<RDPoint> four = {{1, 30, 0}, {2, 34, 0}, {4, 38, 0}, {8, 42, 0}};
  CHECK_THROWS_AS(bd_rate(three, four, QualityKey::psnr), Error);
  CHECK_THROWS_AS(bd_rate(four, three, QualityKey::psnr), Error);

  std::vector<RDPoint> high = {{1, 50, 0}, {2, 54, 0}, {4, 58, 0}, {8, 62, 0}};
  try {
    bd_rate(four, high, QualityKey::psnr);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("overlap") != std::string::npos);
  }

  std::vector<RDPoint> dup = {{1, 30, 0}, {2, 30, 0}, {4, 38, 0}, {8, 42, 0}};
  CHECK_THROWS_AS(bd_rate(dup, four, QualityKey::psnr), Error);

  std::vector<RDPoint> bad_rate = {{1, 30, 0}, {-2, 34, 0}, {4, 38, 0}, {8, 42, 0}};
  CHECK_THROWS_AS(bd_rate(bad_rate, four, QualityKey::psnr), Error);

  std::vector<RDPoint> inf_q = {{1, std::numeric_limits<double>::infinity(), 0},
                                {2, 34, 0},
                                {4, 38, 0},
                                {8, 42, 0}};
  CHECK_THROWS_AS(bd_rate(inf_q, four, QualityKey::psnr), Error);
}

TEST_CASE("rd csv round-trips") {
  std::vector<RDPoint> pts = {{0.123456789, 31.25, 0.9412},
                              {0.25, std::numeric_limits<double>::infinity(), 1.0},
                              {1.5, 42.0001, 0.999}};
  std::string path = temp_path("mgnr_rd_test.csv");
  write_rd_csv(pts, path);
  std::vector<RDPoint> back = read_rd_csv(path);
  REQUIRE(back.size() == pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    CHECK(back[i].bpp == doctest::Approx(pts[i].bpp).epsilon(1e-9));
    if (std::isinf(pts[i].psnr))
      CHECK(std::isinf(back[i].psnr));
    else
      CHECK(back[i].psnr == doctest::Approx(pts[i].psnr).epsilon(1e-9));
    CHECK(back[i].ssim == doctest::Approx(pts[i].ssim).epsilon(1e-9));
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv parsing errors name the location") {
  std::string path = temp_path("mgnr_rd_bad.csv");
  CHECK_THROWS_AS(read_rd_csv(temp_path("mgnr_rd_missing.csv")), Error);

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("rate,quality\n1,2\n", f);
    std::fclose(f);
  }
  try {
    read_rd_csv(path);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("header") != std::string::npos);
  }

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("bpp,psnr,ssim\n0.5,30,0.9\nnot-a-row\n", f);
    std::fclose(f);
  }
  try {
    read_rd_csv(path);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("bpp,psnr,ssim\n0,30,0.9\n", f);
    std::fclose(f);
  }
  try {
    read_rd_csv(path);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  std::filesystem::remove(path);
}
