#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "core/compress.hpp"
#include "core/rng.hpp"

using namespace mgnr;
using mgnr::coded_bit_length;
using mgnr::crc32;
using mgnr::deserialize;
using mgnr::empirical_entropy_bits;
using mgnr::huffman_code_lengths;
using mgnr::huffman_decode;
using mgnr::huffman_encode;
using mgnr::mean_code_length;
using mgnr::measure_bpp;

namespace {

Tensor vec_tensor(std::vector<scalar> values) {
  const int n = static_cast<int>(values.size());
  return Tensor::from_data({n}, std::move(values));
}

// Sum of four uniforms, centered: a peaked distribution so entropy
// coding has something to gain over raw 8-bit symbols.
Tensor peaked_tensor(int n, uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<scalar> v(static_cast<size_t>(n));
  for (auto& x : v) {
    double s = 0;
    for (int k = 0; k < 4; ++k) s += rng.next_double();
    x = static_cast<scalar>(s - 2.0);
  }
  return Tensor::from_data({n}, std::move(v));
}

ModelBundle toy_bundle(uint64_t seed) {
  ModelBundle b;
  b.grid = GridConfig::make(2, 2, 3, 4, 10);
  b.net.upscales = {2, 2};
  b.net.channels = {8, 4};
  SplitMix64 rng(seed);
  b.tensors.push_back({"g_tv", Tensor::uniform({2, 2, 3, 4, 1}, rng, -1, 1)});
  b.tensors.push_back({"b0.w", peaked_tensor(600, seed + 1)});
  b.tensors.push_back({"head.b", vec_tensor({scalar(0.25), scalar(-0.5), scalar(0)})});
  return b;
}

std::vector<QuantSpec> specs_for(const ModelBundle& b) {
  std::vector<QuantSpec> specs;
  for (const auto& e : b.tensors) specs.push_back(quantize(e.tensor, 8).second);
  return specs;
}

// Patch a byte and refresh the trailing CRC so parsing reaches the field.
void patch(std::vector<uint8_t>& bytes, size_t at, uint8_t value) {
  bytes[at] = value;
  const uint32_t crc = crc32(bytes.data(), bytes.size() - 4);
  for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + static_cast<size_t>(i)] =
      static_cast<uint8_t>((crc >> (8 * i)) & 0xFF);
}

}  // namespace

TEST_CASE("global pruning zeroes the smallest magnitudes") {
  Tensor t = vec_tensor({1, -2, 3, -4, 5, 6, 7, 8, 9, 10});
  PruneMask mask = prune_global({t}, 0.4);
  const std::vector<uint8_t> want = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  CHECK(mask.keep[0] == want);
  CHECK(mask.achieved() == doctest::Approx(0.4));
  apply_mask({t}, mask);
  CHECK(t.data()[0] == 0);
  CHECK(t.data()[3] == 0);
  CHECK(t.data()[4] == 5);
  CHECK(t.data()[9] == 10);
}

TEST_CASE("pruning spans tensors and keeps earlier indices on ties") {
  Tensor a = vec_tensor({scalar(0.1), 10});
  Tensor b = vec_tensor({scalar(0.2), 20});
  PruneMask mask = prune_global({a, b}, 0.5);
  CHECK(mask.keep[0] == std::vector<uint8_t>{0, 1});
  CHECK(mask.keep[1] == std::vector<uint8_t>{0, 1});

  Tensor ties = vec_tensor({scalar(0.5), scalar(0.5), scalar(0.5), scalar(0.5)});
  PruneMask tied = prune_global({ties}, 0.5);
  CHECK(tied.keep[0] == std::vector<uint8_t>{1, 1, 0, 0});
}

TEST_CASE("pruning hits the target sparsity on random weights") {
  SplitMix64 rng(7);
  Tensor t = Tensor::uniform({10000}, rng, -1, 1);
  PruneMask mask = prune_global({t}, 0.4);
  CHECK(mask.achieved() >= 0.395);
  CHECK(mask.achieved() <= 0.405);

  PruneMask none = prune_global({t}, 0.0);
  CHECK(none.pruned == 0);
  CHECK(std::count(none.keep[0].begin(), none.keep[0].end(), 1) == 10000);
}

TEST_CASE("pruning rejects sparsity outside [0,1)") {
  Tensor t = vec_tensor({1, 2});
  CHECK_THROWS_AS(prune_global({t}, 1.0), Error);
  CHECK_THROWS_AS(prune_global({t}, -0.1), Error);
}

TEST_CASE("quantization reproduces constant tensors exactly") {
  for (scalar c : {scalar(0.25), scalar(-0.5), scalar(0), scalar(3)}) {
    Tensor t = Tensor::full({4, 4}, c);
    auto [symbols, spec] = quantize(t, 8);
    CHECK(std::count(symbols.begin(), symbols.end(), symbols[0]) == 16);
    auto vals = dequantize(symbols, spec);
    for (scalar v : vals) CHECK(v == c);
  }
}

TEST_CASE("an exact [0,1] range quantizes at scale 1/255") {
  std::vector<scalar> v;
  for (int i = 0; i <= 100; ++i) v.push_back(static_cast<scalar>(i) / 100);
  Tensor t = vec_tensor(v);
  auto [symbols, spec] = quantize(t, 8);
  CHECK(spec.scale == doctest::Approx(1.0 / 255).epsilon(1e-6));
  CHECK(spec.zero_point == 0);
  auto deq = dequantize(symbols, spec);
  for (size_t i = 0; i < v.size(); ++i)
    CHECK(std::abs(double(deq[i]) - double(v[i])) <= 0.5 / 255 + 1e-9);
}

TEST_CASE("quantization error stays within half a step") {
  SplitMix64 rng(11);
  for (int bits : {2, 4, 8}) {
    Tensor t = Tensor::uniform({5000}, rng, -3, 5);
    auto [symbols, spec] = quantize(t, bits);
    auto deq = dequantize(symbols, spec);
    double worst = 0;
    for (int i = 0; i < t.numel(); ++i)
      worst = std::max(worst, std::abs(double(t.data()[i]) - double(deq[i])));
    CHECK(worst <= spec.scale / 2 * (1 + 1e-9));
  }
}

TEST_CASE("zero always lands on a symbol so pruned weights survive") {
  // All-positive weights: without widening the range to include zero the
  // zero point would clamp and a masked weight would decode near min.
  SplitMix64 rng(13);
  Tensor t = Tensor::uniform({256}, rng, scalar(0.5), scalar(1.5));
  t.data()[17] = 0;
  t.data()[101] = 0;
  auto [symbols, spec] = quantize(t, 8);
  auto deq = dequantize(symbols, spec);
  CHECK(deq[17] == 0);
  CHECK(deq[101] == 0);
}

TEST_CASE("quantization rejects bad bit widths and non-finite data") {
  Tensor t = vec_tensor({1, 2});
  CHECK_THROWS_AS(quantize(t, 1), Error);
  CHECK_THROWS_AS(quantize(t, 9), Error);
  Tensor bad = vec_tensor({1, std::numeric_limits<scalar>::quiet_NaN()});
  CHECK_THROWS_AS(quantize(bad, 8), Error);
}

TEST_CASE("a single-symbol stream costs one bit per symbol") {
  std::vector<uint8_t> symbols(4, 'a');
  std::array<uint64_t, 256> freq{};
  freq['a'] = 4;
  CodeLengths lengths = huffman_code_lengths(freq);
  CHECK(lengths['a'] == 1);
  auto [payload, bits] = huffman_encode(symbols, lengths);
  CHECK(bits == 4);
  CHECK(payload.size() == 1);
  CHECK(huffman_decode(payload.data(), payload.size(), bits, lengths) == symbols);
}

TEST_CASE("a half-quarter-quarter distribution gets lengths 1,2,2") {
  std::array<uint64_t, 256> freq{};
  freq[10] = 2;
  freq[20] = 1;
  freq[30] = 1;
  CodeLengths lengths = huffman_code_lengths(freq);
  CHECK(lengths[10] == 1);
  CHECK(lengths[20] == 2);
  CHECK(lengths[30] == 2);
  std::vector<uint8_t> symbols = {10, 10, 20, 30};
  CHECK(mean_code_length(symbols, lengths) == doctest::Approx(1.5));
}

TEST_CASE("a uniform byte alphabet codes at exactly eight bits") {
  std::array<uint64_t, 256> freq{};
  freq.fill(3);
  CodeLengths lengths = huffman_code_lengths(freq);
  for (int s = 0; s < 256; ++s) CHECK(lengths[static_cast<size_t>(s)] == 8);
}

TEST_CASE("entropy coding round-trips and stays within a bit of entropy") {
  SplitMix64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + rng.next_below(300);
    const int alphabet = 1 + static_cast<int>(rng.next_below(256));
    std::vector<uint8_t> symbols(n);
    for (auto& s : symbols) s = static_cast<uint8_t>(rng.next_below(static_cast<uint64_t>(alphabet)));
    std::array<uint64_t, 256> freq{};
    for (uint8_t s : symbols) ++freq[s];
    CodeLengths lengths = huffman_code_lengths(freq);
    auto [payload, bits] = huffman_encode(symbols, lengths);
    CHECK(huffman_decode(payload.data(), payload.size(), bits, lengths) == symbols);
    CHECK(mean_code_length(symbols, lengths) <= empirical_entropy_bits(symbols) + 1.0);
    CHECK(bits == coded_bit_length(symbols, lengths));
  }
}

TEST_CASE("truncated payloads lose symbols or fail mid-code") {
  std::array<uint64_t, 256> freq{};
  freq[1] = 3;
  freq[2] = 2;
  freq[3] = 1;
  CodeLengths lengths = huffman_code_lengths(freq);
  std::vector<uint8_t> symbols = {1, 2, 3, 1, 2, 1};
  auto [payload, bits] = huffman_encode(symbols, lengths);
  // Dropping the final 1-bit code still decodes cleanly, one symbol
  // short; the container layer catches that via the expected count.
  CHECK(huffman_decode(payload.data(), payload.size(), bits - 1, lengths).size() ==
        symbols.size() - 1);
  // Cutting into the preceding 2-bit code is detected here.
  CHECK_THROWS_AS(huffman_decode(payload.data(), payload.size(), bits - 2, lengths), Error);
}

TEST_CASE("crc32 matches the standard check vector") {
  const char* s = "123456789";
  CHECK(crc32(reinterpret_cast<const uint8_t*>(s), 9) == 0xCBF43926u);
  CHECK(crc32(nullptr, 0) == 0u);
}

TEST_CASE("the container round-trips bit-exactly and re-serializes identically") {
  ModelBundle bundle = toy_bundle(5);
  auto specs = specs_for(bundle);
  std::vector<uint8_t> bytes = serialize(bundle, {}, specs);
  CHECK(serialize(bundle, {}, specs) == bytes);

  ModelBundle back = deserialize(bytes);
  CHECK(back.grid.T == bundle.grid.T);
  CHECK(back.grid.N == bundle.grid.N);
  CHECK(back.grid.h == bundle.grid.h);
  CHECK(back.grid.w == bundle.grid.w);
  CHECK(back.grid.c1 == bundle.grid.c1);
  CHECK(back.grid.c2 == bundle.grid.c2);
  CHECK(back.grid.ge_enabled == bundle.grid.ge_enabled);
  CHECK(back.net.upscales == bundle.net.upscales);
  CHECK(back.net.channels == bundle.net.channels);
  REQUIRE(back.tensors.size() == bundle.tensors.size());
  for (size_t ti = 0; ti < back.tensors.size(); ++ti) {
    CHECK(back.tensors[ti].name == bundle.tensors[ti].name);
    CHECK(back.tensors[ti].tensor.shape() == bundle.tensors[ti].tensor.shape());
    auto symbols = quantize_with(bundle.tensors[ti].tensor, specs[ti]);
    auto expect = dequantize(symbols, specs[ti]);
    auto got = back.tensors[ti].tensor.data();
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i) CHECK(got[i] == expect[i]);
  }

  // Decoding and re-encoding the decoded weights reproduces the stream:
  // dequantized values quantize back to the same symbols.
  std::vector<uint8_t> again = serialize(back, {}, specs);
  CHECK(again == bytes);
}

TEST_CASE("pruned positions decode to exactly zero") {
  ModelBundle bundle = toy_bundle(9);
  PruneMask mask = prune_global({bundle.tensors[1].tensor}, 0.4);
  apply_mask({bundle.tensors[1].tensor}, mask);
  std::vector<std::vector<uint8_t>> keep(bundle.tensors.size());
  keep[1] = mask.keep[0];
  auto specs = specs_for(bundle);
  std::vector<uint8_t> bytes = serialize(bundle, keep, specs);

  ModelBundle back = deserialize(bytes);
  auto got = back.tensors[1].tensor.data();
  for (size_t i = 0; i < keep[1].size(); ++i)
    if (!keep[1][i]) CHECK(got[i] == 0);
}

TEST_CASE("every single-byte corruption is caught") {
  ModelBundle bundle = toy_bundle(21);
  auto specs = specs_for(bundle);
  std::vector<uint8_t> bytes = serialize(bundle, {}, specs);
  SplitMix64 rng(3);
  for (int trial = 0; trial < 64; ++trial) {
    std::vector<uint8_t> bad = bytes;
    const size_t at = rng.next_below(bad.size());
    bad[at] ^= static_cast<uint8_t>(1 + rng.next_below(255));
    CHECK_THROWS_AS(deserialize(bad), Error);
  }
}

TEST_CASE("structured errors name the failing field") {
  ModelBundle bundle = toy_bundle(2);
  auto specs = specs_for(bundle);
  std::vector<uint8_t> bytes = serialize(bundle, {}, specs);

  std::vector<uint8_t> magic = bytes;
  patch(magic, 0, 'X');
  CHECK_THROWS_WITH_AS(deserialize(magic), doctest::Contains("magic"), Error);

  std::vector<uint8_t> version = bytes;
  patch(version, 4, 9);
  CHECK_THROWS_WITH_AS(deserialize(version), doctest::Contains("version"), Error);

  std::vector<uint8_t> crc = bytes;
  crc[crc.size() - 1] ^= 0xFF;
  CHECK_THROWS_WITH_AS(deserialize(crc), doctest::Contains("CRC"), Error);

  std::vector<uint8_t> cut(bytes.begin(), bytes.begin() + 10);
  CHECK_THROWS_AS(deserialize(cut), Error);
}

TEST_CASE("the size ladder is strictly monotone") {
  ModelBundle bundle;
  bundle.grid = GridConfig::make(2, 2, 3, 4, 10);
  bundle.net.upscales = {2, 2};
  bundle.net.channels = {8, 4};
  bundle.tensors.push_back({"w0", peaked_tensor(12000, 31)});
  bundle.tensors.push_back({"w1", peaked_tensor(8000, 32)});

  const size_t fp32 = serialize(bundle, {}, {}, {false, false}).size();

  auto specs = specs_for(bundle);
  const size_t int8 = serialize(bundle, {}, specs, {true, false}).size();

  std::vector<Tensor> params = {bundle.tensors[0].tensor, bundle.tensors[1].tensor};
  PruneMask mask = prune_global(params, 0.4);
  apply_mask(params, mask);
  auto pruned_specs = specs_for(bundle);
  const size_t pruned = serialize(bundle, mask.keep, pruned_specs, {true, false}).size();
  const size_t full = serialize(bundle, mask.keep, pruned_specs, {true, true}).size();

  CHECK(fp32 > int8);
  CHECK(int8 > pruned);
  CHECK(pruned > full);
  const double ratio = static_cast<double>(fp32) / static_cast<double>(int8);
  CHECK(ratio >= 3.8);
  CHECK(ratio <= 4.2);
}

TEST_CASE("bits per pixel follows the container size") {
  CHECK(measure_bpp(1000, 1, 10, 100, 100) == doctest::Approx(0.08));
  CHECK(measure_bpp(0, 1, 1, 1, 1) == 0);
  CHECK_THROWS_AS(measure_bpp(10, 0, 1, 1, 1), Error);
}
