#include "core/adam.hpp"

#include <cmath>

MGNR_NS_BEGIN

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.defined()) throw Error(ErrorKind::internal, "adam: undefined parameter");
    m_.emplace_back(p.numel(), scalar(0));
    v_.emplace_back(p.numel(), scalar(0));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].data();
    auto g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (scalar(1) - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (scalar(1) - cfg_.beta2) * g[j] * g[j];
      const scalar mhat = static_cast<scalar>(m[j] / bc1);
      const scalar vhat = static_cast<scalar>(v[j] / bc2);
      w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

MGNR_NS_END
