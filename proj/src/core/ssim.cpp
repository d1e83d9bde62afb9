#include "core/ssim.hpp"

#include <cmath>

MGNR_NS_BEGIN

namespace {

constexpr scalar kC1 = scalar(0.01 * 0.01);  // (K1 L)^2 on unit range
constexpr scalar kC2 = scalar(0.03 * 0.03);

}  // namespace

std::vector<scalar> ssim_window() {
  const int len = 11;
  const double sigma = 1.5;
  std::vector<scalar> k(len);
  double sum = 0;
  for (int i = 0; i < len; ++i) {
    const double d = i - (len - 1) / 2;
    const double v = std::exp(-0.5 * d * d / (sigma * sigma));
    k[i] = static_cast<scalar>(v);
    sum += v;
  }
  for (scalar& v : k) v = static_cast<scalar>(v / sum);
  return k;
}

Tensor ssim_map(Tape& tape, const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape())
    throw Error(ErrorKind::internal, "ssim_map: shape mismatch " + shape_str(x.shape()) + " vs " +
                                         shape_str(y.shape()));
  if (x.rank() != 4) throw Error(ErrorKind::internal, "ssim_map: inputs must be 4-D frames");

  const auto win = ssim_window();
  Tensor mu_x = blur2d(tape, x, win);
  Tensor mu_y = blur2d(tape, y, win);
  Tensor mu_xx = mul(tape, mu_x, mu_x);
  Tensor mu_yy = mul(tape, mu_y, mu_y);
  Tensor mu_xy = mul(tape, mu_x, mu_y);
  Tensor var_x = sub(tape, blur2d(tape, mul(tape, x, x), win), mu_xx);
  Tensor var_y = sub(tape, blur2d(tape, mul(tape, y, y), win), mu_yy);
  Tensor cov = sub(tape, blur2d(tape, mul(tape, x, y), win), mu_xy);

  // ((2 mu_x mu_y + C1)(2 cov + C2)) / ((mu_x^2 + mu_y^2 + C1)(var_x + var_y + C2))
  Tensor num = mul(tape, affine(tape, mu_xy, 2, kC1), affine(tape, cov, 2, kC2));
  Tensor den = mul(tape, affine(tape, add(tape, mu_xx, mu_yy), 1, kC1),
                   affine(tape, add(tape, var_x, var_y), 1, kC2));
  return mean_channels(tape, divide(tape, num, den));
}

scalar ssim_scalar(const Tensor& x, const Tensor& y) {
  Tape tape(false);
  return mean(tape, ssim_map(tape, x, y)).item();
}

MGNR_NS_END
