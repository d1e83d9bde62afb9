#pragma once

#include <vector>

#include "core/tensor.hpp"

MGNR_NS_BEGIN

// 11-tap Gaussian window, sigma 1.5, normalized to unit mass.
std::vector<scalar> ssim_window();

// Per-pixel structural similarity of two [N,C,H,W] unit-range frames,
// computed per channel and channel-averaged to [N,1,H,W]. Windowed moments
// renormalize the window mass at the borders, so a constant image has
// exactly its own mean everywhere and ssim_map(x, x) is exactly 1.
Tensor ssim_map(Tape& tape, const Tensor& x, const Tensor& y);

// Mean of the map, without building gradient state.
scalar ssim_scalar(const Tensor& x, const Tensor& y);

MGNR_NS_END
