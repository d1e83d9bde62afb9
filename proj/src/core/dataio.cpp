#include "core/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/rng.hpp"

namespace fs = std::filesystem;

MGNR_NS_BEGIN

namespace {

[[noreturn]] void io_fail(const std::string& msg) { throw Error(ErrorKind::io, msg); }
[[noreturn]] void cfg_fail(const std::string& msg) { throw Error(ErrorKind::config, msg); }

int iround(double x) { return static_cast<int>(std::lround(x)); }

uint8_t to_byte(scalar v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

// PPM/PGM header token: skips whitespace and # comments.
std::string next_token(std::istream& in, const std::string& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) io_fail("unexpected end of header in " + path);
  return tok;
}

int parse_header_int(std::istream& in, const std::string& path, const char* field) {
  const std::string tok = next_token(in, path);
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    io_fail(std::string("bad ") + field + " '" + tok + "' in " + path);
  }
}

}  // namespace

Tensor& VideoSequence::frame(int v, int t) {
  if (v < 0 || v >= N || t < 0 || t >= T)
    throw Error(ErrorKind::internal, "sequence: frame index out of range");
  return frames[static_cast<size_t>(v) * T + t];
}

const Tensor& VideoSequence::frame(int v, int t) const {
  return const_cast<VideoSequence*>(this)->frame(v, t);
}

Tensor load_frame_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open " + path);
  if (next_token(in, path) != "P6") io_fail("not a binary PPM (P6): " + path);
  const int W = parse_header_int(in, path, "width");
  const int H = parse_header_int(in, path, "height");
  const int maxval = parse_header_int(in, path, "maxval");
  if (maxval != 255) io_fail("unsupported maxval " + std::to_string(maxval) + " in " + path);
  // next_token consumed the single whitespace byte after the maxval; the
  // raster starts immediately.
  std::vector<uint8_t> raw(static_cast<size_t>(W) * H * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    io_fail("truncated pixel data in " + path + " (got " + std::to_string(in.gcount()) +
            " of " + std::to_string(raw.size()) + " bytes)");

  Tensor frame = Tensor::zeros({1, 3, H, W});
  auto d = frame.data();
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        d[(static_cast<int64_t>(c) * H + y) * W + x] =
            static_cast<scalar>(raw[(static_cast<size_t>(y) * W + x) * 3 + c] / 255.0);
  return frame;
}

void save_frame_ppm(const Tensor& frame, const std::string& path) {
  if (frame.rank() != 4 || frame.dim(0) != 1 || frame.dim(1) != 3)
    throw Error(ErrorKind::internal, "save_frame_ppm: frame must be [1,3,H,W]");
  const int H = frame.dim(2), W = frame.dim(3);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail("cannot write " + path);
  out << "P6\n" << W << ' ' << H << "\n255\n";
  std::vector<uint8_t> raw(static_cast<size_t>(W) * H * 3);
  auto d = frame.data();
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        raw[(static_cast<size_t>(y) * W + x) * 3 + c] =
            to_byte(d[(static_cast<int64_t>(c) * H + y) * W + x]);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) io_fail("write failed for " + path);
}

Tensor quantize_frame_8bit(const Tensor& frame) {
  Tensor out = Tensor::zeros(frame.shape());
  auto src = frame.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<scalar>(to_byte(src[i]) / 255.0);
  return out;
}

std::string frame_rel_path(int v, int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "v%02d/f%04d.ppm", v, t);
  return buf;
}

VideoSequence load_sequence(const std::string& root) {
  if (!fs::is_directory(root)) io_fail("sequence root not found: " + root);
  int N = 0;
  char buf[16];
  while (true) {
    std::snprintf(buf, sizeof(buf), "v%02d", N);
    if (!fs::is_directory(fs::path(root) / buf)) break;
    ++N;
  }
  if (N == 0) io_fail("no view directories (v00, v01, ...) under " + root);

  VideoSequence seq;
  seq.N = N;
  for (int v = 0; v < N; ++v) {
    int t = 0;
    while (fs::is_regular_file(fs::path(root) / frame_rel_path(v, t))) ++t;
    if (v == 0) {
      seq.T = t;
      if (seq.T == 0) io_fail("view v00 has no frames under " + root);
    } else if (t != seq.T) {
      io_fail("view count mismatch: v00 has " + std::to_string(seq.T) + " frames, v" +
              std::to_string(v) + " has " + std::to_string(t));
    }
  }
  seq.frames.reserve(static_cast<size_t>(N) * seq.T);
  for (int v = 0; v < N; ++v) {
    for (int t = 0; t < seq.T; ++t) {
      const std::string path = (fs::path(root) / frame_rel_path(v, t)).string();
      Tensor f = load_frame_ppm(path);
      if (v == 0 && t == 0) {
        seq.H = f.dim(2);
        seq.W = f.dim(3);
      } else if (f.dim(2) != seq.H || f.dim(3) != seq.W) {
        io_fail("frame size mismatch at " + path + ": expected " + std::to_string(seq.W) + "x" +
                std::to_string(seq.H));
      }
      seq.frames.push_back(std::move(f));
    }
  }
  return seq;
}

void save_sequence(const VideoSequence& seq, const std::string& root) {
  for (int v = 0; v < seq.N; ++v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "v%02d", v);
    fs::create_directories(fs::path(root) / buf);
    for (int t = 0; t < seq.T; ++t)
      save_frame_ppm(seq.frame(v, t), (fs::path(root) / frame_rel_path(v, t)).string());
  }
}

void save_mask_pgm(const std::vector<scalar>& mask, int H, int W, const std::string& path) {
  if (static_cast<int64_t>(mask.size()) != static_cast<int64_t>(H) * W)
    throw Error(ErrorKind::internal, "save_mask_pgm: mask size does not match dims");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail("cannot write " + path);
  out << "P5\n" << W << ' ' << H << "\n255\n";
  std::vector<uint8_t> raw(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) raw[i] = to_byte(mask[i]);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) io_fail("write failed for " + path);
}

// ---- synthetic generation ---------------------------------------------------

namespace {

double parse_num(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    cfg_fail("bad numeric value '" + s + "' for key " + key);
  }
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

struct Placement {
  int x, y;
};

// Object position at (t, v); time moves it by velocity, view index shifts
// it horizontally by the disparity.
Placement object_at(const SynthObject& o, double disparity, int t, int v) {
  return {o.x + iround(o.vx * t) + iround(disparity * v), o.y + iround(o.vy * t)};
}

}  // namespace

SynthSpec SynthSpec::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail("cannot open spec " + path);
  SynthSpec spec;
  std::vector<std::pair<int, SynthObject>> listed;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      cfg_fail("spec " + path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "views") {
      spec.views = static_cast<int>(parse_num(val, key));
    } else if (key == "frames") {
      spec.frames = static_cast<int>(parse_num(val, key));
    } else if (key == "width") {
      spec.width = static_cast<int>(parse_num(val, key));
    } else if (key == "height") {
      spec.height = static_cast<int>(parse_num(val, key));
    } else if (key == "seed") {
      spec.seed = static_cast<uint64_t>(parse_num(val, key));
    } else if (key == "disparity") {
      spec.disparity = parse_num(val, key);
    } else if (key == "objects") {
      spec.auto_objects = static_cast<int>(parse_num(val, key));
    } else if (key.rfind("object", 0) == 0 && key.size() > 6) {
      int idx = 0;
      try {
        idx = std::stoi(key.substr(6));
      } catch (const std::exception&) {
        cfg_fail("spec " + path + ": unknown key '" + key + "'");
      }
      const auto parts = split_commas(val);
      if (parts.size() != 9)
        cfg_fail("spec " + path + ": " + key + " needs x,y,w,h,vx,vy,r,g,b (9 values)");
      SynthObject o;
      o.x = static_cast<int>(parse_num(parts[0], key));
      o.y = static_cast<int>(parse_num(parts[1], key));
      o.w = static_cast<int>(parse_num(parts[2], key));
      o.h = static_cast<int>(parse_num(parts[3], key));
      o.vx = parse_num(parts[4], key);
      o.vy = parse_num(parts[5], key);
      o.r = parse_num(parts[6], key);
      o.g = parse_num(parts[7], key);
      o.b = parse_num(parts[8], key);
      listed.emplace_back(idx, o);
    } else {
      cfg_fail("spec " + path + ": unknown key '" + key + "'");
    }
  }
  std::sort(listed.begin(), listed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [idx, o] : listed) spec.objects.push_back(o);
  return spec;
}

void SynthSpec::validate() const {
  if (views < 1 || frames < 1 || width < 1 || height < 1)
    cfg_fail("synth spec: views, frames, width, height must all be >= 1");
  for (size_t i = 0; i < objects.size(); ++i) {
    const SynthObject& o = objects[i];
    if (o.w < 1 || o.h < 1) cfg_fail("synth object " + std::to_string(i) + ": empty rectangle");
    for (int t = 0; t < frames; ++t) {
      for (int v = 0; v < views; ++v) {
        const Placement p = object_at(o, disparity, t, v);
        if (p.x < 0 || p.y < 0 || p.x + o.w > width || p.y + o.h > height)
          cfg_fail("synth object " + std::to_string(i) + " leaves the frame at t=" +
                   std::to_string(t) + " v=" + std::to_string(v));
      }
    }
  }
}

SyntheticResult generate_synthetic(const SynthSpec& spec) {
  SynthSpec resolved = spec;
  SplitMix64 rng(spec.seed);

  // Background first, placement second: the background for a given seed
  // does not depend on whether objects were listed or auto-placed.
  const int W = spec.width, H = spec.height;
  const int cell = 8;
  const int gw = W / cell + 2, gh = H / cell + 2;
  std::vector<scalar> lattice(static_cast<size_t>(3) * gh * gw);
  for (scalar& v : lattice) v = rng.next_uniform(scalar(0.15), scalar(0.85));

  std::vector<scalar> background(static_cast<size_t>(3) * H * W);
  for (int c = 0; c < 3; ++c) {
    const scalar* lat = lattice.data() + static_cast<size_t>(c) * gh * gw;
    for (int y = 0; y < H; ++y) {
      const double by = static_cast<double>(y) / cell;
      const int iy = static_cast<int>(by);
      const double fy = by - iy;
      for (int x = 0; x < W; ++x) {
        const double bx = static_cast<double>(x) / cell;
        const int ix = static_cast<int>(bx);
        const double fx = bx - ix;
        const double v00 = lat[iy * gw + ix], v01 = lat[iy * gw + ix + 1];
        const double v10 = lat[(iy + 1) * gw + ix], v11 = lat[(iy + 1) * gw + ix + 1];
        background[(static_cast<size_t>(c) * H + y) * W + x] = static_cast<scalar>(
            (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11));
      }
    }
  }

  if (resolved.objects.empty()) {
    for (int k = 0; k < spec.auto_objects; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        SynthObject o;
        o.w = 6 + static_cast<int>(rng.next_below(std::max(1, W / 6)));
        o.h = 6 + static_cast<int>(rng.next_below(std::max(1, H / 6)));
        const double speeds[] = {-2, -1.5, -1, 1, 1.5, 2};
        o.vx = speeds[rng.next_below(6)];
        o.vy = (static_cast<int>(rng.next_below(3)) - 1) * 0.5;
        o.r = rng.next_uniform(scalar(0.05), scalar(0.95));
        o.g = rng.next_uniform(scalar(0.05), scalar(0.95));
        o.b = rng.next_uniform(scalar(0.05), scalar(0.95));
        int dx_min = 0, dx_max = 0, dy_min = 0, dy_max = 0;
        for (int t = 0; t < spec.frames; ++t)
          for (int v = 0; v < spec.views; ++v) {
            const Placement p = object_at(o, spec.disparity, t, v);
            dx_min = std::min(dx_min, p.x);
            dx_max = std::max(dx_max, p.x);
            dy_min = std::min(dy_min, p.y);
            dy_max = std::max(dy_max, p.y);
          }
        const int x_lo = -dx_min, x_hi = W - o.w - dx_max;
        const int y_lo = -dy_min, y_hi = H - o.h - dy_max;
        if (x_hi < x_lo || y_hi < y_lo) continue;
        o.x = x_lo + static_cast<int>(rng.next_below(static_cast<uint64_t>(x_hi - x_lo + 1)));
        o.y = y_lo + static_cast<int>(rng.next_below(static_cast<uint64_t>(y_hi - y_lo + 1)));
        resolved.objects.push_back(o);
        placed = true;
      }
      if (!placed)
        cfg_fail("synth: could not auto-place object " + std::to_string(k) +
                 " inside the frame; reduce objects or enlarge the frame");
    }
  }
  resolved.validate();

  SyntheticResult out;
  out.video.N = spec.views;
  out.video.T = spec.frames;
  out.video.H = H;
  out.video.W = W;
  for (int v = 0; v < spec.views; ++v) {
    for (int t = 0; t < spec.frames; ++t) {
      Tensor frame = Tensor::from_data({1, 3, H, W}, background);
      std::vector<uint8_t> mask(static_cast<size_t>(H) * W, 0);
      auto d = frame.data();
      for (const SynthObject& o : resolved.objects) {
        const Placement p = object_at(o, spec.disparity, t, v);
        const scalar rgb[3] = {static_cast<scalar>(std::clamp(o.r, 0.0, 1.0)),
                               static_cast<scalar>(std::clamp(o.g, 0.0, 1.0)),
                               static_cast<scalar>(std::clamp(o.b, 0.0, 1.0))};
        for (int y = p.y; y < p.y + o.h; ++y)
          for (int x = p.x; x < p.x + o.w; ++x) {
            for (int c = 0; c < 3; ++c) d[(static_cast<int64_t>(c) * H + y) * W + x] = rgb[c];
            mask[static_cast<size_t>(y) * W + x] = 1;
          }
      }
      out.video.frames.push_back(std::move(frame));
      out.object_masks.push_back(std::move(mask));
    }
  }
  return out;
}

MGNR_NS_END
