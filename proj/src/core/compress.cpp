#include "core/compress.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <queue>

MGNR_NS_BEGIN

namespace {

constexpr size_t kMaxTensorElems = size_t(1) << 31;

[[noreturn]] void bad_stream(const std::string& what) {
  throw Error(ErrorKind::bitstream, "container: " + what);
}

}  // namespace

// ---------------------------------------------------------------- pruning

PruneMask prune_global(const std::vector<Tensor>& params, double target_sparsity) {
  if (!(target_sparsity >= 0 && target_sparsity < 1))
    throw Error(ErrorKind::config, "prune sparsity must be in [0, 1)");

  PruneMask mask;
  mask.target_sparsity = target_sparsity;
  mask.keep.reserve(params.size());
  for (const Tensor& p : params) {
    mask.keep.emplace_back(static_cast<size_t>(p.numel()), uint8_t(1));
    mask.total += p.numel();
  }

  // Global flat index over the concatenated parameter list; ties at the
  // magnitude threshold prune the later index so earlier weights survive.
  struct Entry {
    scalar mag;
    int64_t idx;
  };
  std::vector<Entry> order;
  order.reserve(static_cast<size_t>(mask.total));
  int64_t base = 0;
  for (const Tensor& p : params) {
    auto d = p.data();
    for (int64_t i = 0; i < p.numel(); ++i) {
      if (!std::isfinite(d[i]))
        throw Error(ErrorKind::numeric, "prune: non-finite weight encountered");
      order.push_back({std::abs(d[i]), base + i});
    }
    base += p.numel();
  }

  const int64_t k = std::llround(target_sparsity * static_cast<double>(mask.total));
  if (k > 0) {
    std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
      if (a.mag != b.mag) return a.mag < b.mag;
      return a.idx > b.idx;
    });
    for (int64_t j = 0; j < k; ++j) {
      int64_t idx = order[static_cast<size_t>(j)].idx;
      for (size_t ti = 0; ti < params.size(); ++ti) {
        const int64_t n = static_cast<int64_t>(mask.keep[ti].size());
        if (idx < n) {
          mask.keep[ti][static_cast<size_t>(idx)] = 0;
          break;
        }
        idx -= n;
      }
    }
    mask.pruned = k;
  }
  return mask;
}

void apply_mask(const std::vector<Tensor>& params, const PruneMask& mask) {
  if (params.size() != mask.keep.size())
    throw Error(ErrorKind::internal, "apply_mask: tensor count mismatch");
  for (size_t ti = 0; ti < params.size(); ++ti) {
    Tensor t = params[ti];  // shared handle; writes reach the caller's tensor
    auto d = t.data();
    const auto& keep = mask.keep[ti];
    if (static_cast<size_t>(t.numel()) != keep.size())
      throw Error(ErrorKind::internal, "apply_mask: tensor size mismatch");
    for (size_t i = 0; i < keep.size(); ++i)
      if (!keep[i]) d[i] = 0;
  }
}

// ------------------------------------------------------------ quantization

std::pair<std::vector<uint8_t>, QuantSpec> quantize(const Tensor& t, int bits) {
  if (bits < 2 || bits > 8)
    throw Error(ErrorKind::config, "quantize bits must be in [2, 8]");
  auto d = t.data();
  if (d.empty()) throw Error(ErrorKind::internal, "quantize: empty tensor");

  double lo = d[0], hi = d[0];
  for (scalar v : d) {
    if (!std::isfinite(v)) throw Error(ErrorKind::numeric, "quantize: non-finite weight");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }

  QuantSpec spec;
  spec.bits = bits;
  const long qmax = (1L << bits) - 1;
  if (lo == hi) {
    // Constant tensor: pick the scale that reproduces the value exactly
    // (at f32 precision) instead of collapsing it to round(c).
    if (lo == 0) {
      spec.scale = 1;
      spec.zero_point = 0;
    } else {
      spec.scale = static_cast<double>(static_cast<float>(std::abs(lo)));
      spec.zero_point = lo > 0 ? -1 : 1;
    }
  } else {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    spec.scale = static_cast<double>(static_cast<float>((hi - lo) / static_cast<double>(qmax)));
    if (spec.scale > 0)
      spec.zero_point = static_cast<int>(
          std::clamp(std::lround(-lo / spec.scale), 0L, qmax));
  }
  if (!(spec.scale > 0)) {
    // f32 underflow on a sub-denormal range; representing it as all-zero
    // loses less than 1e-37 per weight.
    spec.scale = 1;
    spec.zero_point = 0;
  }
  return {quantize_with(t, spec), spec};
}

std::vector<uint8_t> quantize_with(const Tensor& t, const QuantSpec& spec) {
  const long qmax = (1L << spec.bits) - 1;
  auto d = t.data();
  std::vector<uint8_t> out(d.size());
  for (size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) throw Error(ErrorKind::numeric, "quantize: non-finite weight");
    const long sym = std::lround(static_cast<double>(d[i]) / spec.scale) + spec.zero_point;
    out[i] = static_cast<uint8_t>(std::clamp(sym, 0L, qmax));
  }
  return out;
}

std::vector<scalar> dequantize(const std::vector<uint8_t>& symbols, const QuantSpec& spec) {
  std::vector<scalar> out(symbols.size());
  for (size_t i = 0; i < symbols.size(); ++i)
    out[i] = static_cast<scalar>((static_cast<double>(symbols[i]) - spec.zero_point) *
                                 spec.scale);
  return out;
}

// --------------------------------------------------------- entropy coding

CodeLengths huffman_code_lengths(const std::array<uint64_t, 256>& freq) {
  CodeLengths lengths{};
  std::vector<int> alive;
  for (int s = 0; s < 256; ++s)
    if (freq[static_cast<size_t>(s)] > 0) alive.push_back(s);
  if (alive.empty()) return lengths;
  if (alive.size() == 1) {
    lengths[static_cast<size_t>(alive[0])] = 1;
    return lengths;
  }

  // Tree nodes; leaves first so ties resolve by symbol order, then by
  // creation order of merged nodes.
  struct Node {
    uint64_t f;
    int left, right;
  };
  std::vector<Node> nodes;
  nodes.reserve(alive.size() * 2);
  using Key = std::pair<uint64_t, int>;  // (frequency, node index)
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> heap;
  for (int s : alive) {
    heap.push({freq[static_cast<size_t>(s)], static_cast<int>(nodes.size())});
    nodes.push_back({freq[static_cast<size_t>(s)], -s - 1, -s - 1});
  }
  while (heap.size() > 1) {
    Key a = heap.top();
    heap.pop();
    Key b = heap.top();
    heap.pop();
    heap.push({a.first + b.first, static_cast<int>(nodes.size())});
    nodes.push_back({a.first + b.first, a.second, b.second});
  }

  // Depth-first depth assignment; leaf markers are -symbol-1.
  std::vector<std::pair<int, int>> stack{{heap.top().second, 0}};
  while (!stack.empty()) {
    auto [ni, depth] = stack.back();
    stack.pop_back();
    const Node& n = nodes[static_cast<size_t>(ni)];
    if (n.left < 0) {
      lengths[static_cast<size_t>(-n.left - 1)] = static_cast<uint8_t>(depth);
    } else {
      stack.push_back({n.left, depth + 1});
      stack.push_back({n.right, depth + 1});
    }
  }
  return lengths;
}

namespace {

// Canonical code assignment per DEFLATE: codes ordered by (length,
// symbol); also the decoder's first-code/offset tables.
struct Canonical {
  std::array<uint64_t, 256> code{};
  int max_len = 0;
  std::array<uint64_t, 65> first_code{};
  std::array<int, 65> count{};
  std::array<int, 65> offset{};
  std::vector<uint8_t> sorted_symbols;
};

Canonical build_canonical(const CodeLengths& lengths) {
  Canonical c;
  for (int s = 0; s < 256; ++s) {
    const int l = lengths[static_cast<size_t>(s)];
    if (l == 0) continue;
    if (l > 64) bad_stream("Huffman code length exceeds 64 bits");
    c.max_len = std::max(c.max_len, l);
    ++c.count[static_cast<size_t>(l)];
  }
  uint64_t code = 0;
  int total = 0;
  for (int l = 1; l <= c.max_len; ++l) {
    code = (code + static_cast<uint64_t>(c.count[static_cast<size_t>(l - 1)])) << 1;
    c.first_code[static_cast<size_t>(l)] = code;
    c.offset[static_cast<size_t>(l)] = total;
    total += c.count[static_cast<size_t>(l)];
    if (c.count[static_cast<size_t>(l)] &&
        c.first_code[static_cast<size_t>(l)] + static_cast<uint64_t>(c.count[static_cast<size_t>(l)]) >
            (uint64_t(1) << l))
      bad_stream("Huffman code lengths violate the Kraft inequality");
  }
  c.sorted_symbols.resize(static_cast<size_t>(total));
  std::array<uint64_t, 65> next = c.first_code;
  std::array<int, 65> slot = c.offset;
  for (int s = 0; s < 256; ++s) {
    const int l = lengths[static_cast<size_t>(s)];
    if (l == 0) continue;
    c.code[static_cast<size_t>(s)] = next[static_cast<size_t>(l)]++;
    c.sorted_symbols[static_cast<size_t>(slot[static_cast<size_t>(l)]++)] =
        static_cast<uint8_t>(s);
  }
  return c;
}

struct BitWriter {
  std::vector<uint8_t> bytes;
  uint64_t nbits = 0;

  void put(uint64_t code, int len) {
    for (int i = len - 1; i >= 0; --i) {
      if (nbits % 8 == 0) bytes.push_back(0);
      if ((code >> i) & 1) bytes[nbits / 8] |= static_cast<uint8_t>(0x80u >> (nbits % 8));
      ++nbits;
    }
  }
};

struct BitReader {
  const uint8_t* bytes;
  size_t byte_len;
  uint64_t pos = 0;

  int next() {
    if (pos / 8 >= byte_len) bad_stream("payload ran out of bits");
    const int bit = (bytes[pos / 8] >> (7 - pos % 8)) & 1;
    ++pos;
    return bit;
  }
};

}  // namespace

uint64_t coded_bit_length(const std::vector<uint8_t>& symbols, const CodeLengths& lengths) {
  uint64_t bits = 0;
  for (uint8_t s : symbols) bits += lengths[s];
  return bits;
}

std::pair<std::vector<uint8_t>, uint64_t> huffman_encode(const std::vector<uint8_t>& symbols,
                                                         const CodeLengths& lengths) {
  Canonical canon = build_canonical(lengths);
  BitWriter w;
  for (uint8_t s : symbols) {
    const int l = lengths[s];
    if (l == 0) throw Error(ErrorKind::internal, "huffman_encode: symbol outside the table");
    w.put(canon.code[s], l);
  }
  return {std::move(w.bytes), w.nbits};
}

std::vector<uint8_t> huffman_decode(const uint8_t* bytes, size_t byte_len, uint64_t bit_len,
                                    const CodeLengths& lengths) {
  Canonical canon = build_canonical(lengths);
  if (canon.max_len == 0) {
    if (bit_len != 0) bad_stream("payload present but the Huffman table is empty");
    return {};
  }
  BitReader r{bytes, byte_len};
  std::vector<uint8_t> out;
  uint64_t code = 0;
  int len = 0;
  while (r.pos < bit_len) {
    code = (code << 1) | static_cast<uint64_t>(r.next());
    ++len;
    if (len > canon.max_len) bad_stream("invalid Huffman code in payload");
    const int cnt = canon.count[static_cast<size_t>(len)];
    const uint64_t first = canon.first_code[static_cast<size_t>(len)];
    if (cnt > 0 && code >= first && code - first < static_cast<uint64_t>(cnt)) {
      out.push_back(
          canon.sorted_symbols[static_cast<size_t>(canon.offset[static_cast<size_t>(len)]) +
                               (code - first)]);
      code = 0;
      len = 0;
    }
  }
  if (len != 0) bad_stream("payload ends mid-symbol");
  return out;
}

double empirical_entropy_bits(const std::vector<uint8_t>& symbols) {
  if (symbols.empty()) return 0;
  std::array<uint64_t, 256> freq{};
  for (uint8_t s : symbols) ++freq[s];
  double h = 0;
  const double n = static_cast<double>(symbols.size());
  for (uint64_t f : freq) {
    if (f == 0) continue;
    const double p = static_cast<double>(f) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double mean_code_length(const std::vector<uint8_t>& symbols, const CodeLengths& lengths) {
  if (symbols.empty()) return 0;
  return static_cast<double>(coded_bit_length(symbols, lengths)) /
         static_cast<double>(symbols.size());
}

// -------------------------------------------------------------- container

uint32_t crc32(const uint8_t* data, size_t len) {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

namespace {

struct ByteWriter {
  std::vector<uint8_t> b;

  void u8(uint64_t v, const char* field) {
    if (v > 0xFF) throw Error(ErrorKind::config, std::string("container limit: ") + field);
    b.push_back(static_cast<uint8_t>(v));
  }
  void u16(uint64_t v, const char* field) {
    if (v > 0xFFFF) throw Error(ErrorKind::config, std::string("container limit: ") + field);
    b.push_back(static_cast<uint8_t>(v & 0xFF));
    b.push_back(static_cast<uint8_t>(v >> 8));
  }
  void u32(uint64_t v, const char* field) {
    if (v > 0xFFFFFFFFull)
      throw Error(ErrorKind::config, std::string("container limit: ") + field);
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
  }
  void i16(int v, const char* field) {
    if (v < -32768 || v > 32767)
      throw Error(ErrorKind::config, std::string("container limit: ") + field);
    u16(static_cast<uint16_t>(v), field);
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v), "f32"); }
  void raw(const uint8_t* p, size_t n) { b.insert(b.end(), p, p + n); }
};

struct ByteReader {
  const uint8_t* p;
  size_t len;
  size_t pos = 0;

  void need(size_t n, const char* field) {
    if (pos + n > len) bad_stream(std::string("truncated reading ") + field);
  }
  uint8_t u8(const char* field) {
    need(1, field);
    return p[pos++];
  }
  uint16_t u16(const char* field) {
    need(2, field);
    uint16_t v = static_cast<uint16_t>(p[pos] | (p[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32(const char* field) {
    need(4, field);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  int16_t i16(const char* field) { return static_cast<int16_t>(u16(field)); }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  const uint8_t* raw(size_t n, const char* field) {
    need(n, field);
    const uint8_t* r = p + pos;
    pos += n;
    return r;
  }
};

int64_t product(const std::vector<int>& v) {
  int64_t p = 1;
  for (int x : v) p *= x;
  return p;
}

}  // namespace

std::vector<uint8_t> serialize(const ModelBundle& bundle,
                               const std::vector<std::vector<uint8_t>>& keep,
                               const std::vector<QuantSpec>& specs,
                               const SerializeOptions& opt) {
  const GridConfig& g = bundle.grid;
  const NetConfig& n = bundle.net;
  const size_t count = bundle.tensors.size();
  const bool entropy = opt.entropy && opt.quantized;
  if (g.mode != GridMode::full)
    throw Error(ErrorKind::config, "only full multi-grid models serialize");
  if (opt.quantized && specs.size() != count)
    throw Error(ErrorKind::internal, "serialize: one QuantSpec per tensor required");
  if (!keep.empty() && keep.size() != count)
    throw Error(ErrorKind::internal, "serialize: keep mask count mismatch");

  // Per-tensor coded stream: either every position or, when a bitmap is
  // cheaper than storing the masked zeros inline, the kept ones only.
  struct Coded {
    bool bitmap = false;
    std::vector<uint8_t> symbols;   // quantized modes
    std::vector<float> values;      // fp32 mode
    const std::vector<uint8_t>* keep = nullptr;
  };
  std::vector<Coded> coded(count);
  std::array<uint64_t, 256> freq{};
  for (size_t ti = 0; ti < count; ++ti) {
    const Tensor& t = bundle.tensors[ti].tensor;
    const size_t nelem = static_cast<size_t>(t.numel());
    Coded& c = coded[ti];
    if (!keep.empty() && !keep[ti].empty()) {
      if (keep[ti].size() != nelem)
        throw Error(ErrorKind::internal, "serialize: keep mask size mismatch");
      c.keep = &keep[ti];
      size_t zeros = 0;
      for (uint8_t k : keep[ti]) zeros += !k;
      const size_t width = opt.quantized ? 8 : 32;
      c.bitmap = zeros * width > nelem;
    }
    if (opt.quantized) {
      std::vector<uint8_t> all = quantize_with(t, specs[ti]);
      if (c.bitmap) {
        c.symbols.reserve(nelem);
        for (size_t i = 0; i < nelem; ++i)
          if ((*c.keep)[i]) c.symbols.push_back(all[i]);
      } else {
        c.symbols = std::move(all);
      }
      if (entropy)
        for (uint8_t s : c.symbols) ++freq[s];
    } else {
      auto d = t.data();
      c.values.reserve(nelem);
      for (size_t i = 0; i < nelem; ++i)
        if (!c.bitmap || (*c.keep)[i]) c.values.push_back(static_cast<float>(d[i]));
    }
  }
  const CodeLengths lengths = entropy ? huffman_code_lengths(freq) : CodeLengths{};

  ByteWriter w;
  w.raw(reinterpret_cast<const uint8_t*>("MGNR"), 4);
  w.u8(1, "version");
  const uint32_t flags = (g.ge_enabled ? 1u : 0u) | (opt.quantized ? 2u : 0u) |
                         (entropy ? 4u : 0u);
  w.u8(flags, "flags");
  const int64_t up = product(n.upscales);
  w.u16(static_cast<uint64_t>(g.T), "T");
  w.u16(static_cast<uint64_t>(g.N), "N");
  w.u16(static_cast<uint64_t>(g.h * up), "H");
  w.u16(static_cast<uint64_t>(g.w * up), "W");
  w.u8(static_cast<uint64_t>(g.h), "h");
  w.u8(static_cast<uint64_t>(g.w), "w");
  w.u16(static_cast<uint64_t>(g.c1), "c1");
  w.u16(static_cast<uint64_t>(g.c2), "c2");
  w.u8(static_cast<uint64_t>(n.stages()), "M");
  for (int s : n.upscales) w.u8(static_cast<uint64_t>(s), "upscale");
  for (int ch : n.channels) w.u16(static_cast<uint64_t>(ch), "channels");
  w.u8(static_cast<uint64_t>(g.ge_channels), "ge_channels");
  w.u16(count, "tensor_count");
  w.raw(lengths.data(), lengths.size());

  for (size_t ti = 0; ti < count; ++ti) {
    const TensorEntry& e = bundle.tensors[ti];
    const Coded& c = coded[ti];
    const size_t nelem = static_cast<size_t>(e.tensor.numel());
    w.u8(e.name.size(), "name length");
    w.raw(reinterpret_cast<const uint8_t*>(e.name.data()), e.name.size());
    w.u8(static_cast<uint64_t>(e.tensor.rank()), "tensor rank");
    for (int d = 0; d < e.tensor.rank(); ++d)
      w.u32(static_cast<uint64_t>(e.tensor.dim(d)), "tensor dim");
    w.f32(opt.quantized ? static_cast<float>(specs[ti].scale) : 0.0f);
    w.i16(opt.quantized ? specs[ti].zero_point : 0, "zero_point");
    w.u8(c.bitmap ? 1 : 0, "pruned");
    if (c.bitmap) {
      std::vector<uint8_t> bits((nelem + 7) / 8, 0);
      for (size_t i = 0; i < nelem; ++i)
        if ((*c.keep)[i]) bits[i >> 3] |= static_cast<uint8_t>(1u << (i & 7));
      w.raw(bits.data(), bits.size());
    }
    if (opt.quantized && entropy) {
      auto [payload, nbits] = huffman_encode(c.symbols, lengths);
      w.u32(nbits, "payload bits");
      w.raw(payload.data(), payload.size());
    } else if (opt.quantized) {
      w.u32(static_cast<uint64_t>(c.symbols.size()) * 8, "payload bits");
      w.raw(c.symbols.data(), c.symbols.size());
    } else {
      w.u32(static_cast<uint64_t>(c.values.size()) * 32, "payload bits");
      for (float v : c.values) w.f32(v);
    }
  }

  w.u32(crc32(w.b.data(), w.b.size()), "crc");
  return std::move(w.b);
}

static ModelBundle read_container(const std::vector<uint8_t>& bytes, StreamInfo* info) {
  if (bytes.size() < 8) bad_stream("shorter than the fixed header");
  const uint32_t stored =
      static_cast<uint32_t>(bytes[bytes.size() - 4]) |
      (static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8) |
      (static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16) |
      (static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24);
  if (crc32(bytes.data(), bytes.size() - 4) != stored) bad_stream("CRC mismatch");

  ByteReader r{bytes.data(), bytes.size() - 4};
  const uint8_t* magic = r.raw(4, "magic");
  if (std::memcmp(magic, "MGNR", 4) != 0) bad_stream("bad magic");
  if (r.u8("version") != 1) bad_stream("unsupported version");
  const uint8_t flags = r.u8("flags");
  const bool quantized = flags & 2u;
  const bool entropy = flags & 4u;

  GridConfig g;
  g.T = r.u16("T");
  g.N = r.u16("N");
  const int H = r.u16("H");
  const int W = r.u16("W");
  g.h = r.u8("h");
  g.w = r.u8("w");
  g.c1 = r.u16("c1");
  g.c2 = r.u16("c2");
  g.c = g.c1 + g.c2;
  g.ge_enabled = flags & 1u;

  NetConfig n;
  const int M = r.u8("M");
  if (M < 1) bad_stream("stage count must be positive");
  n.upscales.resize(static_cast<size_t>(M));
  n.channels.resize(static_cast<size_t>(M));
  for (int i = 0; i < M; ++i) n.upscales[static_cast<size_t>(i)] = r.u8("upscale");
  for (int i = 0; i < M; ++i) n.channels[static_cast<size_t>(i)] = r.u16("channels");
  g.ge_channels = r.u8("ge_channels");
  if (g.T < 1 || g.N < 1 || g.h < 1 || g.w < 1 || g.c1 < 1 || g.c2 < 1)
    bad_stream("grid dimensions must be positive");
  const int64_t up = product(n.upscales);
  if (H != g.h * up || W != g.w * up) bad_stream("frame dims disagree with grid and upscales");

  const int count = r.u16("tensor_count");
  CodeLengths lengths{};
  std::memcpy(lengths.data(), r.raw(lengths.size(), "Huffman table"), lengths.size());

  if (info) {
    info->grid = g;
    info->net = n;
    info->frame_h = H;
    info->frame_w = W;
    info->quantized = quantized;
    info->entropy = entropy;
    info->total_bytes = bytes.size();
  }

  ModelBundle bundle;
  bundle.grid = g;
  bundle.net = n;
  bundle.tensors.reserve(static_cast<size_t>(count));
  for (int ti = 0; ti < count; ++ti) {
    TensorEntry e;
    const size_t name_len = r.u8("name length");
    const uint8_t* name = r.raw(name_len, "name");
    e.name.assign(reinterpret_cast<const char*>(name), name_len);

    const int rank = r.u8("tensor rank");
    if (rank < 1 || rank > 8) bad_stream("tensor rank out of range");
    Shape shape(static_cast<size_t>(rank));
    size_t nelem = 1;
    for (int d = 0; d < rank; ++d) {
      const uint32_t dim = r.u32("tensor dim");
      if (dim == 0 || dim > 0x7FFFFFFFu) bad_stream("tensor dim out of range");
      shape[static_cast<size_t>(d)] = static_cast<int>(dim);
      nelem *= dim;
      if (nelem > kMaxTensorElems) bad_stream("tensor too large");
    }

    QuantSpec spec;
    spec.scale = static_cast<double>(r.f32("scale"));
    spec.zero_point = r.i16("zero_point");
    const bool bitmap = r.u8("pruned") != 0;
    std::vector<uint8_t> keep;
    size_t kept = nelem;
    if (bitmap) {
      const uint8_t* bits = r.raw((nelem + 7) / 8, "keep bitmap");
      keep.resize(nelem);
      kept = 0;
      for (size_t i = 0; i < nelem; ++i) {
        keep[i] = (bits[i >> 3] >> (i & 7)) & 1;
        kept += keep[i];
      }
    }

    const uint64_t payload_bits = r.u32("payload bits");
    const uint8_t* payload = r.raw((payload_bits + 7) / 8, "payload");
    std::vector<scalar> vals;
    if (quantized) {
      if (!(spec.scale > 0)) bad_stream("non-positive scale");
      std::vector<uint8_t> symbols;
      if (entropy) {
        symbols = huffman_decode(payload, (payload_bits + 7) / 8, payload_bits, lengths);
      } else {
        if (payload_bits != kept * 8) bad_stream("raw payload length mismatch");
        symbols.assign(payload, payload + kept);
      }
      if (symbols.size() != kept) bad_stream("payload symbol count mismatch");
      vals = dequantize(symbols, spec);
    } else {
      if (payload_bits != kept * 32) bad_stream("fp32 payload length mismatch");
      vals.resize(kept);
      for (size_t i = 0; i < kept; ++i) {
        uint32_t u = 0;
        for (int b = 0; b < 4; ++b)
          u |= static_cast<uint32_t>(payload[i * 4 + static_cast<size_t>(b)]) << (8 * b);
        vals[i] = static_cast<scalar>(std::bit_cast<float>(u));
      }
    }

    std::vector<scalar> full;
    if (bitmap) {
      full.assign(nelem, 0);
      size_t j = 0;
      for (size_t i = 0; i < nelem; ++i)
        if (keep[i]) full[i] = vals[j++];
    } else {
      full = std::move(vals);
    }
    e.tensor = Tensor::from_data(shape, std::move(full));
    if (info)
      info->tensors.push_back({e.name, shape, static_cast<int64_t>(nelem),
                               static_cast<int64_t>(kept), bitmap, payload_bits});
    bundle.tensors.push_back(std::move(e));
  }
  if (r.pos != r.len) bad_stream("trailing bytes after the last tensor");
  return bundle;
}

ModelBundle deserialize(const std::vector<uint8_t>& bytes) { return read_container(bytes, nullptr); }

StreamInfo inspect_stream(const std::vector<uint8_t>& bytes) {
  StreamInfo info;
  read_container(bytes, &info);
  return info;
}

double measure_bpp(size_t byte_len, int N, int T, int H, int W) {
  if (N < 1 || T < 1 || H < 1 || W < 1)
    throw Error(ErrorKind::internal, "measure_bpp: dims must be positive");
  return 8.0 * static_cast<double>(byte_len) /
         (static_cast<double>(N) * T * H * W);
}

MGNR_NS_END
