#pragma once

#include <cstdint>
#include <vector>

#include "core/multigrid.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

MGNR_NS_BEGIN

struct NetConfig {
  std::vector<int> upscales{5, 3, 2, 2, 2};
  std::vector<int> channels{64, 48, 32, 24, 16};
  int kernel = 3;
  int head_channels = 3;

  int stages() const { return static_cast<int>(upscales.size()); }

  // Stage widths at width_mult 1.0; other stage counts interpolate the
  // same 64 -> 16 taper geometrically.
  static std::vector<int> default_channels(int M, double width_mult);
};

struct StageShape {
  int h = 0, w = 0, channels = 0;
};

std::vector<StageShape> stage_shapes(const GridConfig& grid, const NetConfig& net);

// Each block k holds the conv producing channels[k]*s_k^2 maps that pixel
// shuffle folds into channels[k] at s_k times the resolution. The optional
// per-stage grids re-inject (t,v)-specific content after the first M-1
// blocks through a bias-free 1x1 projection.
struct SynthesisNet {
  NetConfig cfg;
  struct Block {
    Tensor w;  // [channels[k]*s_k^2, C_in, 3, 3]
    Tensor b;  // [channels[k]*s_k^2]
  };
  std::vector<Block> blocks;
  std::vector<Tensor> ge_grids;  // per injected stage: [T, N, h, w, ge_channels]
  std::vector<Tensor> ge_proj;   // per injected stage: [channels[k], ge_channels, 1, 1]
  Tensor head_w;                 // [3, channels[M-1], 3, 3]
  Tensor head_b;                 // [3]

  static SynthesisNet init(const GridConfig& grid, NetConfig cfg, SplitMix64& rng);

  std::vector<Tensor> params() const;       // every trainable tensor
  std::vector<Tensor> weight_params() const;  // convs and projections only (prune scope)
  int64_t param_count() const;
};

// l_input is the channels-last [1,h,w,c] latent; the result is a
// channels-first [1,3,H,W] frame with every value in (0,1).
Tensor synthesis_forward(Tape& tape, const SynthesisNet& net, const GridConfig& grid,
                         const Tensor& l_input, int t, int v);

MGNR_NS_END
