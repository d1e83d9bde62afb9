#include "core/motion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "core/ssim.hpp"

MGNR_NS_BEGIN

namespace {

constexpr int kHsIterations = 100;
constexpr scalar kHsSmoothness = scalar(0.5);

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Weighted 8-neighbor average with clamped borders; the center is excluded.
void neighbor_average(const std::vector<scalar>& in, std::vector<scalar>& out, int H, int W) {
  constexpr scalar kSide = scalar(1.0 / 6.0);
  constexpr scalar kDiag = scalar(1.0 / 12.0);
  for (int y = 0; y < H; ++y) {
    const int ym = clampi(y - 1, 0, H - 1), yp = clampi(y + 1, 0, H - 1);
    for (int x = 0; x < W; ++x) {
      const int xm = clampi(x - 1, 0, W - 1), xp = clampi(x + 1, 0, W - 1);
      out[static_cast<size_t>(y) * W + x] =
          kSide * (in[static_cast<size_t>(y) * W + xm] + in[static_cast<size_t>(y) * W + xp] +
                   in[static_cast<size_t>(ym) * W + x] + in[static_cast<size_t>(yp) * W + x]) +
          kDiag * (in[static_cast<size_t>(ym) * W + xm] + in[static_cast<size_t>(ym) * W + xp] +
                   in[static_cast<size_t>(yp) * W + xm] + in[static_cast<size_t>(yp) * W + xp]);
    }
  }
}

FlowField horn_schunck(const std::vector<scalar>& i1, const std::vector<scalar>& i2, int H,
                       int W) {
  const auto at = [W](const std::vector<scalar>& img, int y, int x) {
    return img[static_cast<size_t>(y) * W + x];
  };
  std::vector<scalar> ex(static_cast<size_t>(H) * W), ey(ex.size()), et(ex.size());
  for (int y = 0; y < H; ++y) {
    const int yp = clampi(y + 1, 0, H - 1);
    for (int x = 0; x < W; ++x) {
      const int xp = clampi(x + 1, 0, W - 1);
      const size_t i = static_cast<size_t>(y) * W + x;
      // Horn-Schunck cube estimates: averages over the 2x2x2 neighborhood.
      ex[i] = scalar(0.25) * (at(i1, y, xp) - at(i1, y, x) + at(i1, yp, xp) - at(i1, yp, x) +
                              at(i2, y, xp) - at(i2, y, x) + at(i2, yp, xp) - at(i2, yp, x));
      ey[i] = scalar(0.25) * (at(i1, yp, x) - at(i1, y, x) + at(i1, yp, xp) - at(i1, y, xp) +
                              at(i2, yp, x) - at(i2, y, x) + at(i2, yp, xp) - at(i2, y, xp));
      et[i] = scalar(0.25) * (at(i2, y, x) - at(i1, y, x) + at(i2, y, xp) - at(i1, y, xp) +
                              at(i2, yp, x) - at(i1, yp, x) + at(i2, yp, xp) - at(i1, yp, xp));
    }
  }

  FlowField flow;
  flow.H = H;
  flow.W = W;
  flow.u.assign(ex.size(), 0);
  flow.v.assign(ex.size(), 0);
  std::vector<scalar> ubar(ex.size()), vbar(ex.size());
  for (int it = 0; it < kHsIterations; ++it) {
    neighbor_average(flow.u, ubar, H, W);
    neighbor_average(flow.v, vbar, H, W);
    for (size_t i = 0; i < ex.size(); ++i) {
      const scalar num = ex[i] * ubar[i] + ey[i] * vbar[i] + et[i];
      const scalar den = kHsSmoothness + ex[i] * ex[i] + ey[i] * ey[i];
      flow.u[i] = ubar[i] - ex[i] * num / den;
      flow.v[i] = vbar[i] - ey[i] * num / den;
    }
  }
  return flow;
}

}  // namespace

std::vector<scalar> FlowField::magnitude() const {
  std::vector<scalar> mag(u.size());
  for (size_t i = 0; i < u.size(); ++i)
    mag[i] = static_cast<scalar>(
        std::sqrt(static_cast<double>(u[i]) * u[i] + static_cast<double>(v[i]) * v[i]));
  return mag;
}

FlowMethod parse_flow_method(const std::string& name) {
  if (name == "tdiff") return FlowMethod::tdiff;
  if (name == "hs") return FlowMethod::hs;
  throw Error(ErrorKind::config, "unknown motion method '" + name + "' (expected tdiff or hs)");
}

std::vector<scalar> luma(const Tensor& frame) {
  if (frame.rank() != 4 || frame.dim(0) != 1 || frame.dim(1) != 3)
    throw Error(ErrorKind::internal, "luma: frame must be [1,3,H,W]");
  const int H = frame.dim(2), W = frame.dim(3);
  const int64_t plane = static_cast<int64_t>(H) * W;
  auto d = frame.data();
  std::vector<scalar> y(plane);
  for (int64_t i = 0; i < plane; ++i)
    y[i] = scalar(0.299) * d[i] + scalar(0.587) * d[plane + i] + scalar(0.114) * d[2 * plane + i];
  return y;
}

FlowField compute_flow(const Tensor& frame_a, const Tensor& frame_b, FlowMethod method) {
  if (frame_a.shape() != frame_b.shape())
    throw Error(ErrorKind::internal, "compute_flow: frame shapes differ");
  const int H = frame_a.dim(2), W = frame_a.dim(3);
  const std::vector<scalar> la = luma(frame_a);
  const std::vector<scalar> lb = luma(frame_b);

  if (method == FlowMethod::hs) return horn_schunck(la, lb, H, W);

  // tdiff: blurred |luma difference| as magnitude, direction zero.
  std::vector<scalar> diff(la.size());
  for (size_t i = 0; i < la.size(); ++i) diff[i] = std::abs(lb[i] - la[i]);
  Tape tape(false);
  Tensor blurred = blur2d(tape, Tensor::from_data({1, 1, H, W}, std::move(diff)), ssim_window());
  FlowField flow;
  flow.H = H;
  flow.W = W;
  flow.u.assign(blurred.data().begin(), blurred.data().end());
  flow.v.assign(flow.u.size(), 0);
  return flow;
}

const std::vector<scalar>& MotionMaskSet::mask(int v, int t) const {
  if (v < 0 || v >= N || t < 0 || t >= T)
    throw Error(ErrorKind::internal, "mask: index out of range");
  return masks[static_cast<size_t>(v) * T + t];
}

Tensor MotionMaskSet::effective_weight(int v, int t) const {
  const std::vector<scalar>& m = mask(v, t);
  std::vector<scalar> w(m.size());
  for (size_t i = 0; i < m.size(); ++i) w[i] = (scalar(1) - beta) + beta * m[i];
  return Tensor::from_data({1, 1, H, W}, std::move(w));
}

MotionMaskSet MotionMaskSet::all_ones(int N, int T, int H, int W) {
  MotionMaskSet set;
  set.N = N;
  set.T = T;
  set.H = H;
  set.W = W;
  set.masks.assign(static_cast<size_t>(N) * T,
                   std::vector<scalar>(static_cast<size_t>(H) * W, scalar(1)));
  return set;
}

MotionMaskSet build_masks(const VideoSequence& video, FlowMethod method, double percentile,
                          scalar beta) {
  if (percentile <= 0 || percentile > 100)
    throw Error(ErrorKind::config, "mask percentile must be in (0, 100]");
  if (video.T < 2) {
    std::fprintf(stderr,
                 "warning: sequence has %d frame(s); motion masks default to all-ones\n",
                 video.T);
    MotionMaskSet set = MotionMaskSet::all_ones(video.N, video.T, video.H, video.W);
    set.beta = beta;
    return set;
  }

  MotionMaskSet set;
  set.N = video.N;
  set.T = video.T;
  set.H = video.H;
  set.W = video.W;
  set.beta = beta;
  set.masks.resize(static_cast<size_t>(video.N) * video.T);

  for (int v = 0; v < video.N; ++v) {
    std::vector<std::vector<scalar>> raw(video.T - 1);
    std::vector<scalar> pool;
    pool.reserve(static_cast<size_t>(video.T - 1) * video.H * video.W);
    for (int t = 0; t + 1 < video.T; ++t) {
      raw[t] = compute_flow(video.frame(v, t), video.frame(v, t + 1), method).magnitude();
      pool.insert(pool.end(), raw[t].begin(), raw[t].end());
    }
    // nearest-rank percentile over every magnitude in this view
    std::sort(pool.begin(), pool.end());
    const size_t rank = static_cast<size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(pool.size())));
    const scalar q = pool[std::min(pool.size() - 1, std::max<size_t>(rank, 1) - 1)];

    for (int t = 0; t + 1 < video.T; ++t) {
      std::vector<scalar>& m = raw[t];
      if (q <= scalar(1e-12)) {
        std::fill(m.begin(), m.end(), scalar(0));  // static view
      } else {
        for (scalar& x : m) x = std::clamp(x / q, scalar(0), scalar(1));
      }
      set.masks[static_cast<size_t>(v) * video.T + t] = std::move(m);
    }
    set.masks[static_cast<size_t>(v) * video.T + video.T - 1] =
        set.masks[static_cast<size_t>(v) * video.T + video.T - 2];
  }
  return set;
}

MGNR_NS_END
