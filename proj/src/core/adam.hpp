#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

MGNR_NS_BEGIN

struct AdamConfig {
  scalar lr = scalar(5e-4);
  scalar beta1 = scalar(0.9);
  scalar beta2 = scalar(0.999);
  scalar eps = scalar(1e-8);
};

// Adam with bias correction. Parameters update in place; gradients are left
// untouched by step() so the caller controls when they reset.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  void set_lr(scalar lr) { cfg_.lr = lr; }
  scalar lr() const { return cfg_.lr; }
  int64_t steps() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<scalar>> m_, v_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

MGNR_NS_END
