#pragma once

#include <string>
#include <vector>

#include "core/dataio.hpp"
#include "core/tensor.hpp"

MGNR_NS_BEGIN

// One operating point on a rate-distortion curve.
struct RDPoint {
  double bpp = 0;
  double psnr = 0;
  double ssim = 0;
};

// Pooled PSNR: one MSE across every pixel of every frame and view, then
// 10*log10(1/MSE). Identical inputs report +inf.
double psnr(const VideoSequence& x, const VideoSequence& y);
double psnr_frame(const Tensor& x, const Tensor& y);

// PSNR restricted to the pixels a mask marks (all channels of each marked
// pixel pool into one MSE). `region[v*T + t]` holds H*W flags.
double psnr_region(const VideoSequence& x, const VideoSequence& y,
                   const std::vector<std::vector<uint8_t>>& region);

// Mean scalar SSIM over all frames and views.
double ssim_sequence(const VideoSequence& x, const VideoSequence& y);

enum class QualityKey { psnr, ssim };

// Bjontegaard delta rate, classical cubic variant: least-squares cubic of
// log10(rate) against quality per curve, integrated over the common
// quality interval; returns the average rate change in percent.
double bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test,
               QualityKey key);

// CSV with header `bpp,psnr,ssim`, one point per row.
std::vector<RDPoint> read_rd_csv(const std::string& path);
void write_rd_csv(const std::vector<RDPoint>& points, const std::string& path);

MGNR_NS_END
