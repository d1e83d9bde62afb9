#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/rng.hpp"

MGNR_NS_BEGIN

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor (last axis fastest) with optional gradient
// storage. Copies are shallow: a Tensor is a handle onto a shared node,
// which is what lets backward() write gradients into the caller's
// parameter tensors. Values are treated as immutable once an op has
// produced them; only the optimizer mutates parameter data in place.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, scalar value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<scalar> data, bool requires_grad = false);
  static Tensor uniform(Shape shape, SplitMix64& rng, scalar lo, scalar hi,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int axis) const;
  int64_t numel() const;

  std::span<scalar> data();
  std::span<const scalar> data() const;
  scalar item() const;  // scalar tensors only

  bool requires_grad() const;
  void set_requires_grad(bool value);

  // Gradient storage is allocated (zero-filled) on first access, so an
  // untouched parameter reads back an all-zero gradient.
  std::span<scalar> grad();
  bool grad_allocated() const;
  void zero_grad();
  void accumulate_grad(std::span<const scalar> g);

  // Stable identity of the underlying storage, for sharing checks.
  const void* id() const { return node_.get(); }

 private:
  struct Node {
    Shape shape;
    std::vector<scalar> data;
    std::vector<scalar> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
};

// Ordered record of executed differentiable ops. Ops append themselves
// in execution order, which is already topological, so backward() is a
// single reverse sweep that visits each op exactly once and then clears
// the tape. Single-writer: one thread builds graphs and runs backward.
class Tape {
 public:
  Tape() = default;
  explicit Tape(bool recording) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool value) { recording_ = value; }
  size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }
  void record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
  }

  void backward(Tensor loss);

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
};

// ---- differentiable ops -------------------------------------------------
// Every op validates shapes, computes eagerly, and (when the tape is
// recording and an input requires grad) registers its backward step.

// Cross-correlation, stride 1, zero padding. Requires odd k and
// padding == (k-1)/2 so output spatial size equals input.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int padding);

// out[b, c, h*r+i, w*r+j] = in[b, c*r*r + i*r + j, h, w]
Tensor pixel_shuffle(Tape& tape, const Tensor& input, int r);
Tensor pixel_unshuffle(Tape& tape, const Tensor& input, int r);

Tensor gelu(Tape& tape, const Tensor& x);  // tanh approximation
Tensor sigmoid(Tape& tape, const Tensor& x);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
// Caller guarantees the denominator is bounded away from zero.
Tensor divide(Tape& tape, const Tensor& a, const Tensor& b);
Tensor abs_diff(Tape& tape, const Tensor& a, const Tensor& b);

// scale * x + shift, elementwise.
Tensor affine(Tape& tape, const Tensor& x, scalar scale, scalar shift);
inline Tensor scalar_mul(Tape& tape, const Tensor& x, scalar s) {
  return affine(tape, x, s, scalar(0));
}

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, int axis);

// Contiguous sub-block starting at element offset `offset` (in elements
// of the flat row-major buffer). Gradients scatter back into the region.
// Row lookups along leading axes are exactly this.
Tensor take_block(Tape& tape, const Tensor& x, int64_t offset, Shape out_shape);

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape);
Tensor nhwc_to_nchw(Tape& tape, const Tensor& x);
Tensor nchw_to_nhwc(Tape& tape, const Tensor& x);

Tensor upsample_nearest(Tape& tape, const Tensor& x, int factor_h, int factor_w);

// Depthwise separable blur with an odd symmetric 1-D kernel, border
// renormalized: out = B(x) / B(ones), so constant fields stay constant
// at the frame edge.
Tensor blur2d(Tape& tape, const Tensor& x, const std::vector<scalar>& kernel1d);

Tensor mean(Tape& tape, const Tensor& x);           // -> scalar tensor
Tensor mean_channels(Tape& tape, const Tensor& x);  // [N,C,H,W] -> [N,1,H,W]

MGNR_NS_END
