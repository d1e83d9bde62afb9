#pragma once

#include <cstdint>

#include "core/rng.hpp"
#include "core/tensor.hpp"

MGNR_NS_BEGIN

// Latent channel budget c splits 9:1 between the shared (time/view) part c1
// and the per-(frame,view) part c2.
void channel_split(int c, int& c1, int& c2);

// Ablation variants drop one side of the latent and give its channel
// budget to the survivor, so parameter counts stay comparable.
enum class GridMode { full, shared_only, tv_only };

struct GridConfig {
  int T = 1, N = 1;
  int h = 9, w = 16;
  int c = 40;
  int c1 = 36, c2 = 4;
  bool ge_enabled = true;
  int ge_channels = 2;
  GridMode mode = GridMode::full;

  // ct1/ct2 split c1 across the two temporal resolutions.
  int ct1() const { return (c1 + 1) / 2; }
  int ct2() const { return c1 / 2; }
  int t2_len() const { return (T + 1) / 2; }

  static GridConfig make(int T, int N, int h, int w, int c, bool ge_enabled = true,
                         int ge_channels = 2, GridMode mode = GridMode::full);
};

// Learnable lookup tables, channels-last. Temporal latents live at two
// temporal resolutions (full and half) whose channel halves concatenate
// back to c1; g_tv holds a private c2-channel slice per (frame, view).
// Tables whose channel count is zero (ablation modes; g_time_2 at c1=1)
// stay null and drop out of params() and the lookups.
struct MultiGrid {
  GridConfig cfg;
  Tensor g_time_1;  // [T, h, w, ct1]
  Tensor g_time_2;  // [ceil(T/2), h, w, ct2]
  Tensor g_view;    // [N, h, w, c1]
  Tensor g_tv;      // [T, N, h, w, c2]

  static MultiGrid init(const GridConfig& cfg, SplitMix64& rng);
  std::vector<Tensor> params() const;
  int64_t param_count() const;
};

// Each lookup reads exactly one row/slice; gradients stay zero elsewhere.
Tensor lookup_time(Tape& tape, const MultiGrid& grid, int t);        // [1,h,w,c1]
Tensor lookup_view(Tape& tape, const MultiGrid& grid, int v);        // [1,h,w,c1]
Tensor lookup_tv(Tape& tape, const MultiGrid& grid, int t, int v);   // [1,h,w,c2]

// concat(lookup_time(t) + lookup_view(v), lookup_tv(t,v)) -> [1,h,w,c]
Tensor assemble(Tape& tape, const MultiGrid& grid, int t, int v);

struct ParamBreakdown {
  int64_t g_time = 0;
  int64_t g_view = 0;
  int64_t g_tv = 0;
  int64_t synthesis = 0;
  int64_t total() const { return g_time + g_view + g_tv + synthesis; }
  double pct(int64_t part) const { return 100.0 * static_cast<double>(part) / total(); }
};

ParamBreakdown param_breakdown(const MultiGrid& grid, int64_t synthesis_params);

MGNR_NS_END
