#pragma once

#include <string>
#include <vector>

#include "core/dataio.hpp"
#include "core/tensor.hpp"

MGNR_NS_BEGIN

struct FlowField {
  int H = 0, W = 0;
  std::vector<scalar> u, v;  // px/frame

  std::vector<scalar> magnitude() const;
};

enum class FlowMethod { tdiff, hs };
FlowMethod parse_flow_method(const std::string& name);

// ITU-R 601 luma of a [1,3,H,W] frame.
std::vector<scalar> luma(const Tensor& frame);

// "hs": Horn-Schunck, 100 iterations, smoothness weight 0.5, clamped
// borders. "tdiff": zero-direction pseudo-flow whose magnitude is the
// Gaussian-blurred (sigma 1.5) absolute luma difference.
FlowField compute_flow(const Tensor& frame_a, const Tensor& frame_b, FlowMethod method);

// Per-(view, frame) motion intensity in [0,1]. The training loss consumes
// the floored weight (1-beta) + beta*mask, never the bare mask.
struct MotionMaskSet {
  int N = 0, T = 0, H = 0, W = 0;
  scalar beta = scalar(0.5);
  std::vector<std::vector<scalar>> masks;  // v*T + t

  const std::vector<scalar>& mask(int v, int t) const;
  Tensor effective_weight(int v, int t) const;  // [1,1,H,W]

  static MotionMaskSet all_ones(int N, int T, int H, int W);
};

// Frame j pairs with j+1; the last frame reuses the previous field. Raw
// magnitudes normalize per view by their p-th percentile, then clip to [0,1].
MotionMaskSet build_masks(const VideoSequence& video, FlowMethod method,
                          double percentile = 98.0, scalar beta = scalar(0.5));

MGNR_NS_END
