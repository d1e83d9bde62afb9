#include "core/synthesis.hpp"

#include <cmath>
#include <string>

MGNR_NS_BEGIN

namespace {

void check_cfg(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::config, msg);
}

constexpr scalar kGeGridInitRange = scalar(1e-2);

Tensor fan_in_uniform(Shape shape, int fan_in, SplitMix64& rng) {
  const scalar bound = static_cast<scalar>(1.0 / std::sqrt(static_cast<double>(fan_in)));
  return Tensor::uniform(std::move(shape), rng, -bound, bound, true);
}

}  // namespace

std::vector<int> NetConfig::default_channels(int M, double width_mult) {
  check_cfg(M >= 1, "net: stage count must be >= 1");
  check_cfg(width_mult > 0, "net: width_mult must be positive");
  std::vector<int> base;
  if (M == 5) {
    base = {64, 48, 32, 24, 16};
  } else if (M == 1) {
    base = {64};
  } else {
    for (int k = 0; k < M; ++k) {
      const double t = static_cast<double>(k) / (M - 1);
      base.push_back(static_cast<int>(std::lround(64.0 * std::pow(16.0 / 64.0, t))));
    }
  }
  for (int& ch : base) ch = std::max(1, static_cast<int>(std::lround(ch * width_mult)));
  return base;
}

std::vector<StageShape> stage_shapes(const GridConfig& grid, const NetConfig& net) {
  check_cfg(!net.upscales.empty(), "net: needs at least one stage");
  check_cfg(net.upscales.size() == net.channels.size(),
            "net: upscales and channels must have equal length");
  for (int s : net.upscales) check_cfg(s >= 1, "net: upscale factors must be >= 1");
  for (int ch : net.channels) check_cfg(ch >= 1, "net: channel counts must be >= 1");
  std::vector<StageShape> out;
  int h = grid.h, w = grid.w;
  for (size_t k = 0; k < net.upscales.size(); ++k) {
    h *= net.upscales[k];
    w *= net.upscales[k];
    out.push_back({h, w, net.channels[k]});
  }
  return out;
}

SynthesisNet SynthesisNet::init(const GridConfig& grid, NetConfig cfg, SplitMix64& rng) {
  stage_shapes(grid, cfg);  // validates geometry
  SynthesisNet net;
  net.cfg = std::move(cfg);
  const int M = net.cfg.stages();
  const int k = net.cfg.kernel;

  // Draw order is frozen: per-block (w, b), then per-injection (grid, proj),
  // then the head. Changing it changes every seeded run.
  int c_in = grid.c;
  for (int s = 0; s < M; ++s) {
    const int c_out = net.cfg.channels[s] * net.cfg.upscales[s] * net.cfg.upscales[s];
    const int fan_in = c_in * k * k;
    Block blk;
    blk.w = fan_in_uniform({c_out, c_in, k, k}, fan_in, rng);
    blk.b = fan_in_uniform({c_out}, fan_in, rng);
    net.blocks.push_back(std::move(blk));
    c_in = net.cfg.channels[s];
  }
  if (grid.ge_enabled) {
    for (int s = 0; s + 1 < M; ++s) {
      net.ge_grids.push_back(Tensor::uniform({grid.T, grid.N, grid.h, grid.w, grid.ge_channels},
                                             rng, -kGeGridInitRange, kGeGridInitRange, true));
      net.ge_proj.push_back(
          fan_in_uniform({net.cfg.channels[s], grid.ge_channels, 1, 1}, grid.ge_channels, rng));
    }
  }
  const int head_fan_in = net.cfg.channels[M - 1] * k * k;
  net.head_w = fan_in_uniform({net.cfg.head_channels, net.cfg.channels[M - 1], k, k},
                              head_fan_in, rng);
  net.head_b = fan_in_uniform({net.cfg.head_channels}, head_fan_in, rng);
  return net;
}

std::vector<Tensor> SynthesisNet::params() const {
  std::vector<Tensor> out;
  for (const Block& b : blocks) {
    out.push_back(b.w);
    out.push_back(b.b);
  }
  for (const Tensor& t : ge_grids) out.push_back(t);
  for (const Tensor& t : ge_proj) out.push_back(t);
  out.push_back(head_w);
  out.push_back(head_b);
  return out;
}

std::vector<Tensor> SynthesisNet::weight_params() const {
  std::vector<Tensor> out;
  for (const Block& b : blocks) {
    out.push_back(b.w);
    out.push_back(b.b);
  }
  for (const Tensor& t : ge_proj) out.push_back(t);
  out.push_back(head_w);
  out.push_back(head_b);
  return out;
}

int64_t SynthesisNet::param_count() const {
  int64_t n = 0;
  for (const Tensor& t : params()) n += t.numel();
  return n;
}

Tensor synthesis_forward(Tape& tape, const SynthesisNet& net, const GridConfig& grid,
                         const Tensor& l_input, int t, int v) {
  if (l_input.shape() != Shape{1, grid.h, grid.w, grid.c})
    throw Error(ErrorKind::internal, "synthesis_forward: latent shape " +
                                         shape_str(l_input.shape()) + " does not match grid " +
                                         shape_str({1, grid.h, grid.w, grid.c}));
  if (t < 0 || t >= grid.T || v < 0 || v >= grid.N)
    throw Error(ErrorKind::internal, "synthesis_forward: (t,v) out of range");

  const int M = net.cfg.stages();
  const bool inject = grid.ge_enabled && !net.ge_grids.empty();

  Tensor x = nhwc_to_nchw(tape, l_input);
  int stage_h = grid.h, stage_w = grid.w;
  for (int s = 0; s < M; ++s) {
    x = conv2d(tape, x, net.blocks[s].w, net.blocks[s].b, (net.cfg.kernel - 1) / 2);
    x = pixel_shuffle(tape, x, net.cfg.upscales[s]);
    x = gelu(tape, x);
    stage_h *= net.cfg.upscales[s];
    stage_w *= net.cfg.upscales[s];
    if (inject && s + 1 < M) {
      const int64_t slice = static_cast<int64_t>(grid.h) * grid.w * grid.ge_channels;
      Tensor g = take_block(tape, net.ge_grids[s], (static_cast<int64_t>(t) * grid.N + v) * slice,
                            {1, grid.h, grid.w, grid.ge_channels});
      g = nhwc_to_nchw(tape, g);
      g = upsample_nearest(tape, g, stage_h / grid.h, stage_w / grid.w);
      g = conv2d(tape, g, net.ge_proj[s], Tensor(), 0);
      x = add(tape, x, g);
    }
  }
  x = conv2d(tape, x, net.head_w, net.head_b, (net.cfg.kernel - 1) / 2);
  return sigmoid(tape, x);
}

MGNR_NS_END
