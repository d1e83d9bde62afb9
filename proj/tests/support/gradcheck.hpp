#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "core/tensor.hpp"

// Finite-difference gradient checking. Build the loss twice per probed
// element with central differences and compare against the taped gradient.
// Meant for the double-precision build; h = 1e-4 balances truncation and
// rounding error there.
namespace testsupport {

struct GradCheck {
  double max_rel_err = 0.0;
  int64_t worst_input = -1;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

inline double rel_err(double a, double n) {
  const double denom = std::max({std::fabs(a), std::fabs(n), 1e-6});
  return std::fabs(a - n) / denom;
}

// `build` must construct the graph from the given inputs each call and
// return a scalar loss. Inputs must have requires_grad set by the caller.
inline GradCheck check_gradients(const std::function<mgnr::Tensor(mgnr::Tape&)>& build,
                                 std::vector<mgnr::Tensor> inputs, double h = 1e-4) {
  using mgnr::scalar;

  mgnr::Tape tape;
  mgnr::Tensor loss = build(tape);
  for (auto& in : inputs) in.zero_grad();
  // Seed may have stale grads from a prior check; contract is caller zeroes.
  tape.backward(loss);

  std::vector<std::vector<scalar>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) {
    auto g = in.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  auto eval = [&]() {
    mgnr::Tape t;
    t.set_recording(false);
    return static_cast<double>(build(t).item());
  };

  GradCheck result;
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto data = inputs[i].data();
    for (size_t j = 0; j < data.size(); ++j) {
      const scalar saved = data[j];
      data[j] = saved + static_cast<scalar>(h);
      const double lp = eval();
      data[j] = saved - static_cast<scalar>(h);
      const double lm = eval();
      data[j] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[i][j];
      const double e = rel_err(a, numeric);
      if (e > result.max_rel_err) {
        result.max_rel_err = e;
        result.worst_input = static_cast<int64_t>(i);
        result.worst_index = static_cast<int64_t>(j);
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

// Reference convolution: direct six-loop sum, stride 1, zero padding
// (k-1)/2. Independent of the production loop structure on purpose.
inline std::vector<double> conv2d_reference(const std::vector<double>& in,
                                            const std::vector<double>& w,
                                            const std::vector<double>& bias, int B, int Cin, int H,
                                            int W, int Cout, int k) {
  const int pad = (k - 1) / 2;
  std::vector<double> out(static_cast<size_t>(B) * Cout * H * W, 0.0);
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < Cout; ++co)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (int ci = 0; ci < Cin; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int yy = y + ky - pad, xx = x + kx - pad;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                acc += in[((static_cast<size_t>(b) * Cin + ci) * H + yy) * W + xx] *
                       w[((static_cast<size_t>(co) * Cin + ci) * k + ky) * k + kx];
              }
          out[((static_cast<size_t>(b) * Cout + co) * H + y) * W + x] = acc;
        }
  return out;
}

}  // namespace testsupport
