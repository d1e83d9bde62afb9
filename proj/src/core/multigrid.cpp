#include "core/multigrid.hpp"

#include <cmath>
#include <string>

MGNR_NS_BEGIN

namespace {

constexpr scalar kGridInitRange = scalar(1e-2);

void check_cfg(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::config, msg);
}

void check_index(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::internal, msg);
}

}  // namespace

void channel_split(int c, int& c1, int& c2) {
  check_cfg(c >= 2, "channel_split: c must be >= 2, got " + std::to_string(c));
  c2 = std::max(1, static_cast<int>(std::lround(c / 10.0)));
  c1 = c - c2;
}

GridConfig GridConfig::make(int T, int N, int h, int w, int c, bool ge_enabled, int ge_channels,
                            GridMode mode) {
  check_cfg(T >= 1 && N >= 1 && h >= 1 && w >= 1, "grid: T, N, h, w must all be >= 1");
  GridConfig cfg;
  cfg.T = T;
  cfg.N = N;
  cfg.h = h;
  cfg.w = w;
  cfg.c = c;
  cfg.mode = mode;
  switch (mode) {
    case GridMode::full:
      channel_split(c, cfg.c1, cfg.c2);
      break;
    case GridMode::shared_only:
      check_cfg(c >= 1, "grid: c must be >= 1");
      cfg.c1 = c;
      cfg.c2 = 0;
      break;
    case GridMode::tv_only:
      check_cfg(c >= 1, "grid: c must be >= 1");
      cfg.c1 = 0;
      cfg.c2 = c;
      break;
  }
  cfg.ge_enabled = ge_enabled;
  cfg.ge_channels = ge_channels;
  check_cfg(!ge_enabled || ge_channels >= 1, "grid: ge_channels must be >= 1 when enabled");
  return cfg;
}

MultiGrid MultiGrid::init(const GridConfig& cfg, SplitMix64& rng) {
  MultiGrid grid;
  grid.cfg = cfg;
  const scalar r = kGridInitRange;
  // Draw order is part of the determinism contract: time1, time2, view, tv.
  // Zero-channel tables draw nothing and stay null.
  if (cfg.ct1() > 0)
    grid.g_time_1 = Tensor::uniform({cfg.T, cfg.h, cfg.w, cfg.ct1()}, rng, -r, r, true);
  if (cfg.ct2() > 0)
    grid.g_time_2 = Tensor::uniform({cfg.t2_len(), cfg.h, cfg.w, cfg.ct2()}, rng, -r, r, true);
  if (cfg.c1 > 0)
    grid.g_view = Tensor::uniform({cfg.N, cfg.h, cfg.w, cfg.c1}, rng, -r, r, true);
  if (cfg.c2 > 0)
    grid.g_tv = Tensor::uniform({cfg.T, cfg.N, cfg.h, cfg.w, cfg.c2}, rng, -r, r, true);
  return grid;
}

std::vector<Tensor> MultiGrid::params() const {
  std::vector<Tensor> out;
  for (const Tensor& t : {g_time_1, g_time_2, g_view, g_tv})
    if (t.defined()) out.push_back(t);
  return out;
}

int64_t MultiGrid::param_count() const {
  int64_t n = 0;
  for (const Tensor& t : params()) n += t.numel();
  return n;
}

Tensor lookup_time(Tape& tape, const MultiGrid& grid, int t) {
  const GridConfig& c = grid.cfg;
  check_index(grid.g_time_1.defined(), "lookup_time: temporal grids absent in this mode");
  check_index(t >= 0 && t < c.T, "lookup_time: frame index " + std::to_string(t) +
                                     " out of range [0, " + std::to_string(c.T) + ")");
  const int64_t hw = static_cast<int64_t>(c.h) * c.w;
  Tensor a = take_block(tape, grid.g_time_1, static_cast<int64_t>(t) * hw * c.ct1(),
                        {1, c.h, c.w, c.ct1()});
  if (!grid.g_time_2.defined()) return a;  // c1 == 1 leaves the half rate empty
  Tensor b = take_block(tape, grid.g_time_2, static_cast<int64_t>(t / 2) * hw * c.ct2(),
                        {1, c.h, c.w, c.ct2()});
  return concat(tape, a, b, 3);
}

Tensor lookup_view(Tape& tape, const MultiGrid& grid, int v) {
  const GridConfig& c = grid.cfg;
  check_index(grid.g_view.defined(), "lookup_view: view grid absent in this mode");
  check_index(v >= 0 && v < c.N, "lookup_view: view index " + std::to_string(v) +
                                     " out of range [0, " + std::to_string(c.N) + ")");
  const int64_t hw = static_cast<int64_t>(c.h) * c.w;
  return take_block(tape, grid.g_view, static_cast<int64_t>(v) * hw * c.c1, {1, c.h, c.w, c.c1});
}

Tensor lookup_tv(Tape& tape, const MultiGrid& grid, int t, int v) {
  const GridConfig& c = grid.cfg;
  check_index(grid.g_tv.defined(), "lookup_tv: integrated grid absent in this mode");
  check_index(t >= 0 && t < c.T && v >= 0 && v < c.N,
              "lookup_tv: index (" + std::to_string(t) + ", " + std::to_string(v) +
                  ") out of range");
  const int64_t hw = static_cast<int64_t>(c.h) * c.w;
  return take_block(tape, grid.g_tv, (static_cast<int64_t>(t) * c.N + v) * hw * c.c2,
                    {1, c.h, c.w, c.c2});
}

Tensor assemble(Tape& tape, const MultiGrid& grid, int t, int v) {
  switch (grid.cfg.mode) {
    case GridMode::shared_only:
      return add(tape, lookup_time(tape, grid, t), lookup_view(tape, grid, v));
    case GridMode::tv_only:
      return lookup_tv(tape, grid, t, v);
    case GridMode::full:
      break;
  }
  Tensor shared = add(tape, lookup_time(tape, grid, t), lookup_view(tape, grid, v));
  return concat(tape, shared, lookup_tv(tape, grid, t, v), 3);
}

ParamBreakdown param_breakdown(const MultiGrid& grid, int64_t synthesis_params) {
  ParamBreakdown b;
  b.g_time = (grid.g_time_1.defined() ? grid.g_time_1.numel() : 0) +
             (grid.g_time_2.defined() ? grid.g_time_2.numel() : 0);
  b.g_view = grid.g_view.defined() ? grid.g_view.numel() : 0;
  b.g_tv = grid.g_tv.defined() ? grid.g_tv.numel() : 0;
  b.synthesis = synthesis_params;
  return b;
}

MGNR_NS_END
