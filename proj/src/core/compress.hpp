#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/multigrid.hpp"
#include "core/synthesis.hpp"
#include "core/tensor.hpp"

MGNR_NS_BEGIN

// ---------------------------------------------------------------- pruning

// Per-tensor keep flags, aligned with the parameter list the mask was
// built from. Pruning is global: one magnitude threshold across every
// in-scope weight, ties resolved by keeping the earlier flat index.
struct PruneMask {
  std::vector<std::vector<uint8_t>> keep;
  double target_sparsity = 0;
  int64_t total = 0;
  int64_t pruned = 0;

  double achieved() const { return total == 0 ? 0.0 : static_cast<double>(pruned) / total; }
};

PruneMask prune_global(const std::vector<Tensor>& params, double target_sparsity);

// Zeroes the pruned positions in place.
void apply_mask(const std::vector<Tensor>& params, const PruneMask& mask);

// ------------------------------------------------------------ quantization

// Affine per-tensor quantizer. The range is widened to include zero so
// the zero point lands on a symbol and pruned weights survive a
// round-trip exactly; scale is rounded to f32 at creation because the
// container stores it as f32 and both codec sides must use one value.
struct QuantSpec {
  double scale = 1;
  int zero_point = 0;
  int bits = 8;
};

std::pair<std::vector<uint8_t>, QuantSpec> quantize(const Tensor& t, int bits);
std::vector<uint8_t> quantize_with(const Tensor& t, const QuantSpec& spec);
std::vector<scalar> dequantize(const std::vector<uint8_t>& symbols, const QuantSpec& spec);

// --------------------------------------------------------- entropy coding

using CodeLengths = std::array<uint8_t, 256>;

// Huffman code lengths from symbol frequencies; deterministic tie
// handling. A single-symbol alphabet gets a 1-bit code.
CodeLengths huffman_code_lengths(const std::array<uint64_t, 256>& freq);

// Bit count of `symbols` under canonical codes for `lengths`.
uint64_t coded_bit_length(const std::vector<uint8_t>& symbols, const CodeLengths& lengths);

// MSB-first canonical bit packing. Returns the packed bytes plus the
// exact bit count (trailing pad bits are zero).
std::pair<std::vector<uint8_t>, uint64_t> huffman_encode(const std::vector<uint8_t>& symbols,
                                                         const CodeLengths& lengths);
std::vector<uint8_t> huffman_decode(const uint8_t* bytes, size_t byte_len, uint64_t bit_len,
                                    const CodeLengths& lengths);

double empirical_entropy_bits(const std::vector<uint8_t>& symbols);
double mean_code_length(const std::vector<uint8_t>& symbols, const CodeLengths& lengths);

// -------------------------------------------------------------- container

uint32_t crc32(const uint8_t* data, size_t len);

struct TensorEntry {
  std::string name;
  Tensor tensor;
};

// Everything the decoder needs: the geometry plus the weight tensors in
// a fixed order.
struct ModelBundle {
  GridConfig grid;
  NetConfig net;
  std::vector<TensorEntry> tensors;
};

// The serialization ladder: fp32 raw, quantized symbols, and entropy-
// coded symbols, each optionally sparsified through the keep masks.
struct SerializeOptions {
  bool quantized = true;
  bool entropy = true;
};

// `keep[i]` empty means tensor i stores every weight. Each sparse tensor
// chooses between an explicit keep-bitmap and inline zeros by bit cost.
std::vector<uint8_t> serialize(const ModelBundle& bundle,
                               const std::vector<std::vector<uint8_t>>& keep,
                               const std::vector<QuantSpec>& specs,
                               const SerializeOptions& opt = {});

ModelBundle deserialize(const std::vector<uint8_t>& bytes);

// Validated metadata view of a container, for diagnostics.
struct TensorStat {
  std::string name;
  Shape shape;
  int64_t elements = 0;
  int64_t stored = 0;  // elements present in the payload (kept positions)
  bool bitmap = false;
  uint64_t payload_bits = 0;
};

struct StreamInfo {
  GridConfig grid;
  NetConfig net;
  int frame_h = 0, frame_w = 0;
  bool quantized = false, entropy = false;
  size_t total_bytes = 0;
  std::vector<TensorStat> tensors;
};

StreamInfo inspect_stream(const std::vector<uint8_t>& bytes);

// Container bytes over raw video pixels.
double measure_bpp(size_t byte_len, int N, int T, int H, int W);

MGNR_NS_END
