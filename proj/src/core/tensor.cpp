#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

MGNR_NS_BEGIN

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw Error(ErrorKind::internal, msg);
}

void check(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

}  // namespace

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), scalar(0), requires_grad);
}

Tensor Tensor::full(Shape shape, scalar value, bool requires_grad) {
  for (int d : shape) check(d >= 0, "tensor: negative dimension in " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->data.assign(static_cast<size_t>(shape_numel(shape)), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<scalar> data, bool requires_grad) {
  check(shape_numel(shape) == static_cast<int64_t>(data.size()),
        "tensor: data length " + std::to_string(data.size()) + " does not match shape " +
            shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::uniform(Shape shape, SplitMix64& rng, scalar lo, scalar hi, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (scalar& v : t.data()) v = rng.next_uniform(lo, hi);
  return t;
}

const Shape& Tensor::shape() const {
  check(defined(), "tensor: undefined");
  return node_->shape;
}

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  check(axis >= 0 && axis < static_cast<int>(s.size()), "tensor: axis out of range");
  return s[axis];
}

int64_t Tensor::numel() const { return static_cast<int64_t>(node_->data.size()); }

std::span<scalar> Tensor::data() {
  check(defined(), "tensor: undefined");
  return node_->data;
}

std::span<const scalar> Tensor::data() const {
  check(defined(), "tensor: undefined");
  return node_->data;
}

scalar Tensor::item() const {
  check(defined() && numel() == 1, "tensor: item() requires a scalar tensor");
  return node_->data[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  check(defined(), "tensor: undefined");
  node_->requires_grad = value;
}

std::span<scalar> Tensor::grad() {
  check(defined(), "tensor: undefined");
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), scalar(0));
  return node_->grad;
}

bool Tensor::grad_allocated() const { return defined() && !node_->grad.empty(); }

void Tensor::zero_grad() {
  if (grad_allocated()) std::fill(node_->grad.begin(), node_->grad.end(), scalar(0));
}

void Tensor::accumulate_grad(std::span<const scalar> g) {
  auto dst = grad();
  check(g.size() == dst.size(), "tensor: gradient size mismatch");
  for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

// ---- Tape ----------------------------------------------------------------

void Tape::backward(Tensor loss) {
  check(loss.defined() && loss.numel() == 1, "backward: loss must be a scalar tensor");
  check(!steps_.empty(), "backward: tape is empty");
  loss.grad()[0] += scalar(1);
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  steps_.clear();
}

// ---- op helpers ----------------------------------------------------------

namespace {

bool wants_grad(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.recording()) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

}  // namespace

// ---- conv2d ---------------------------------------------------------------

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int padding) {
  check(input.rank() == 4, "conv2d: input must be 4-D, got " + shape_str(input.shape()));
  check(weight.rank() == 4, "conv2d: weight must be 4-D, got " + shape_str(weight.shape()));
  const int B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int Cout = weight.dim(0), k = weight.dim(2);
  check(weight.dim(2) == weight.dim(3), "conv2d: kernel must be square");
  check(k % 2 == 1, "conv2d: kernel size must be odd");
  check(padding == (k - 1) / 2, "conv2d: padding must be (k-1)/2 for same-size output");
  check(weight.dim(1) == Cin, "conv2d: input channels " + std::to_string(Cin) +
                                  " do not match weight channels " + std::to_string(weight.dim(1)));
  if (bias.defined())
    check(bias.rank() == 1 && bias.dim(0) == Cout, "conv2d: bias must have shape [Cout]");

  Tensor out = Tensor::zeros({B, Cout, H, W});
  const scalar* in = input.data().data();
  const scalar* w = weight.data().data();
  scalar* op = out.data().data();
  const int64_t HW = static_cast<int64_t>(H) * W;

  for (int b = 0; b < B; ++b) {
    for (int co = 0; co < Cout; ++co) {
      scalar* o = op + (static_cast<int64_t>(b) * Cout + co) * HW;
      const scalar bv = bias.defined() ? bias.data()[co] : scalar(0);
      std::fill(o, o + HW, bv);
      for (int ci = 0; ci < Cin; ++ci) {
        const scalar* ip = in + (static_cast<int64_t>(b) * Cin + ci) * HW;
        const scalar* wp = w + ((static_cast<int64_t>(co) * Cin + ci) * k) * k;
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - padding;
          const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
          for (int kx = 0; kx < k; ++kx) {
            const scalar wv = wp[ky * k + kx];
            const int dx = kx - padding;
            const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
            const int len = x1 - x0;
            if (len <= 0) continue;
            for (int y = y0; y < y1; ++y) {
              const scalar* src = ip + static_cast<int64_t>(y + dy) * W + (x0 + dx);
              scalar* dst = o + static_cast<int64_t>(y) * W + x0;
              for (int i = 0; i < len; ++i) dst[i] += wv * src[i];
            }
          }
        }
      }
    }
  }

  if (wants_grad(tape, {&input, &weight, &bias})) {
    out.set_requires_grad(true);
    Tensor in_t = input, w_t = weight, b_t = bias, out_t = out;
    tape.record([in_t, w_t, b_t, out_t, padding]() mutable {
      const int B = in_t.dim(0), Cin = in_t.dim(1), H = in_t.dim(2), W = in_t.dim(3);
      const int Cout = w_t.dim(0), k = w_t.dim(2);
      const int64_t HW = static_cast<int64_t>(H) * W;
      const scalar* go = out_t.grad().data();

      if (in_t.requires_grad()) {
        scalar* gi = in_t.grad().data();
        const scalar* w = w_t.data().data();
        for (int b = 0; b < B; ++b) {
          for (int ci = 0; ci < Cin; ++ci) {
            scalar* gip = gi + (static_cast<int64_t>(b) * Cin + ci) * HW;
            for (int co = 0; co < Cout; ++co) {
              const scalar* gop = go + (static_cast<int64_t>(b) * Cout + co) * HW;
              const scalar* wp = w + ((static_cast<int64_t>(co) * Cin + ci) * k) * k;
              for (int ky = 0; ky < k; ++ky) {
                const int dy = ky - padding;
                const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
                for (int kx = 0; kx < k; ++kx) {
                  const scalar wv = wp[ky * k + kx];
                  const int dx = kx - padding;
                  const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
                  const int len = x1 - x0;
                  if (len <= 0) continue;
                  for (int y = y0; y < y1; ++y) {
                    scalar* dst = gip + static_cast<int64_t>(y + dy) * W + (x0 + dx);
                    const scalar* src = gop + static_cast<int64_t>(y) * W + x0;
                    for (int i = 0; i < len; ++i) dst[i] += wv * src[i];
                  }
                }
              }
            }
          }
        }
      }

      if (w_t.requires_grad()) {
        scalar* gw = w_t.grad().data();
        const scalar* in = in_t.data().data();
        for (int co = 0; co < Cout; ++co) {
          for (int ci = 0; ci < Cin; ++ci) {
            scalar* gwp = gw + ((static_cast<int64_t>(co) * Cin + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
              const int dy = ky - padding;
              const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
              for (int kx = 0; kx < k; ++kx) {
                const int dx = kx - padding;
                const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
                const int len = x1 - x0;
                if (len <= 0) continue;
                // Four fixed-order accumulators: deterministic and enough
                // ILP for this to not dominate the step.
                scalar a0 = 0, a1 = 0, a2 = 0, a3 = 0;
                for (int b = 0; b < B; ++b) {
                  const scalar* gop = go + (static_cast<int64_t>(b) * Cout + co) * HW;
                  const scalar* ip = in + (static_cast<int64_t>(b) * Cin + ci) * HW;
                  for (int y = y0; y < y1; ++y) {
                    const scalar* g = gop + static_cast<int64_t>(y) * W + x0;
                    const scalar* s = ip + static_cast<int64_t>(y + dy) * W + (x0 + dx);
                    int i = 0;
                    for (; i + 4 <= len; i += 4) {
                      a0 += g[i] * s[i];
                      a1 += g[i + 1] * s[i + 1];
                      a2 += g[i + 2] * s[i + 2];
                      a3 += g[i + 3] * s[i + 3];
                    }
                    for (; i < len; ++i) a0 += g[i] * s[i];
                  }
                }
                gwp[ky * k + kx] += ((a0 + a1) + (a2 + a3));
              }
            }
          }
        }
      }

      if (b_t.defined() && b_t.requires_grad()) {
        scalar* gb = b_t.grad().data();
        for (int b = 0; b < B; ++b) {
          for (int co = 0; co < Cout; ++co) {
            const scalar* gop = go + (static_cast<int64_t>(b) * Cout + co) * HW;
            scalar acc = 0;
            for (int64_t i = 0; i < HW; ++i) acc += gop[i];
            gb[co] += acc;
          }
        }
      }
    });
  }
  return out;
}

// ---- pixel shuffle ---------------------------------------------------------

namespace {

// dir=+1 shuffles, dir=-1 unshuffles; both are index bijections.
void shuffle_copy(const scalar* src, scalar* dst, int B, int C, int H, int W, int r,
                  bool to_shuffled, bool accumulate) {
  const int r2 = r * r;
  const int Hr = H * r, Wr = W * r;
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
          const int cin = c * r2 + i * r + j;
          const scalar* s;
          scalar* d;
          for (int h = 0; h < H; ++h) {
            const int64_t in_off = ((static_cast<int64_t>(b) * C * r2 + cin) * H + h) * W;
            const int64_t out_off =
                ((static_cast<int64_t>(b) * C + c) * Hr + (h * r + i)) * static_cast<int64_t>(Wr) +
                j;
            for (int w = 0; w < W; ++w) {
              const int64_t a = in_off + w;
              const int64_t o = out_off + static_cast<int64_t>(w) * r;
              const int64_t from = to_shuffled ? a : o;
              const int64_t to = to_shuffled ? o : a;
              s = src + from;
              d = dst + to;
              if (accumulate)
                *d += *s;
              else
                *d = *s;
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor pixel_shuffle(Tape& tape, const Tensor& input, int r) {
  check(input.rank() == 4, "pixel_shuffle: input must be 4-D");
  check(r >= 1, "pixel_shuffle: factor must be >= 1");
  const int B = input.dim(0), Cr2 = input.dim(1), H = input.dim(2), W = input.dim(3);
  check(Cr2 % (r * r) == 0, "pixel_shuffle: channel count " + std::to_string(Cr2) +
                                " not divisible by r^2 = " + std::to_string(r * r));
  const int C = Cr2 / (r * r);
  Tensor out = Tensor::zeros({B, C, H * r, W * r});
  shuffle_copy(input.data().data(), out.data().data(), B, C, H, W, r, true, false);

  if (wants_grad(tape, {&input})) {
    out.set_requires_grad(true);
    Tensor in_t = input, out_t = out;
    tape.record([in_t, out_t, r, B, C, H, W]() mutable {
      shuffle_copy(out_t.grad().data(), in_t.grad().data(), B, C, H, W, r, false, true);
    });
  }
  return out;
}

Tensor pixel_unshuffle(Tape& tape, const Tensor& input, int r) {
  check(input.rank() == 4, "pixel_unshuffle: input must be 4-D");
  check(r >= 1, "pixel_unshuffle: factor must be >= 1");
  const int B = input.dim(0), C = input.dim(1), Hr = input.dim(2), Wr = input.dim(3);
  check(Hr % r == 0 && Wr % r == 0, "pixel_unshuffle: spatial dims not divisible by r");
  const int H = Hr / r, W = Wr / r;
  Tensor out = Tensor::zeros({B, C * r * r, H, W});
  shuffle_copy(input.data().data(), out.data().data(), B, C, H, W, r, false, false);

  if (wants_grad(tape, {&input})) {
    out.set_requires_grad(true);
    Tensor in_t = input, out_t = out;
    tape.record([in_t, out_t, r, B, C, H, W]() mutable {
      shuffle_copy(out_t.grad().data(), in_t.grad().data(), B, C, H, W, r, true, true);
    });
  }
  return out;
}

// ---- elementwise -----------------------------------------------------------

namespace {

constexpr double kGeluC0 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;

}  // namespace

Tensor gelu(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (size_t i = 0; i < xd.size(); ++i) {
    const double v = xd[i];
    const double t = std::tanh(kGeluC0 * (v + kGeluC1 * v * v * v));
    od[i] = static_cast<scalar>(0.5 * v * (1.0 + t));
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t]() mutable {
      if (!x_t.requires_grad()) return;
      auto xd = x_t.data();
      auto g = out_t.grad();
      auto gx = x_t.grad();
      for (size_t i = 0; i < xd.size(); ++i) {
        const double v = xd[i];
        const double u = kGeluC0 * (v + kGeluC1 * v * v * v);
        const double t = std::tanh(u);
        const double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * v * v);
        const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
        gx[i] += static_cast<scalar>(d) * g[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (size_t i = 0; i < xd.size(); ++i)
    od[i] = static_cast<scalar>(1.0 / (1.0 + std::exp(-static_cast<double>(xd[i]))));
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t]() mutable {
      if (!x_t.requires_grad()) return;
      auto od = out_t.data();
      auto g = out_t.grad();
      auto gx = x_t.grad();
      for (size_t i = 0; i < od.size(); ++i) gx[i] += g[i] * od[i] * (scalar(1) - od[i]);
    });
  }
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 Bwd bwd) {
  check_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (size_t i = 0; i < ad.size(); ++i) od[i] = fwd(ad[i], bd[i]);
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor a_t = a, b_t = b, out_t = out;
    tape.record([a_t, b_t, out_t, bwd]() mutable {
      auto g = out_t.grad();
      auto ad = a_t.data();
      auto bd = b_t.data();
      auto od = out_t.data();
      const bool ga = a_t.requires_grad(), gb = b_t.requires_grad();
      std::span<scalar> gad = ga ? a_t.grad() : std::span<scalar>{};
      std::span<scalar> gbd = gb ? b_t.grad() : std::span<scalar>{};
      for (size_t i = 0; i < ad.size(); ++i) {
        auto [da, db] = bwd(ad[i], bd[i], od[i]);
        if (ga) gad[i] += g[i] * da;
        if (gb) gbd[i] += g[i] * db;
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "add", [](scalar x, scalar y) { return x + y; },
      [](scalar, scalar, scalar) { return std::pair<scalar, scalar>(1, 1); });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "sub", [](scalar x, scalar y) { return x - y; },
      [](scalar, scalar, scalar) { return std::pair<scalar, scalar>(1, -1); });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "mul", [](scalar x, scalar y) { return x * y; },
      [](scalar x, scalar y, scalar) { return std::pair<scalar, scalar>(y, x); });
}

Tensor divide(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "divide", [](scalar x, scalar y) { return x / y; },
      [](scalar, scalar y, scalar o) {
        return std::pair<scalar, scalar>(scalar(1) / y, -o / y);
      });
}

Tensor abs_diff(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_op(
      tape, a, b, "abs_diff", [](scalar x, scalar y) { return std::abs(x - y); },
      [](scalar x, scalar y, scalar) {
        const scalar s = x > y ? scalar(1) : (x < y ? scalar(-1) : scalar(0));
        return std::pair<scalar, scalar>(s, -s);
      });
}

Tensor affine(Tape& tape, const Tensor& x, scalar scale, scalar shift) {
  Tensor out = Tensor::zeros(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (size_t i = 0; i < xd.size(); ++i) od[i] = scale * xd[i] + shift;
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t, scale]() mutable {
      if (!x_t.requires_grad()) return;
      auto g = out_t.grad();
      auto gx = x_t.grad();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += scale * g[i];
    });
  }
  return out;
}

// ---- layout / indexing ------------------------------------------------------

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, int axis) {
  check(a.rank() == b.rank(), "concat: rank mismatch");
  check(axis >= 0 && axis < a.rank(), "concat: axis out of range");
  for (int i = 0; i < a.rank(); ++i)
    if (i != axis)
      check(a.dim(i) == b.dim(i), "concat: shapes " + shape_str(a.shape()) + " and " +
                                      shape_str(b.shape()) + " differ outside axis " +
                                      std::to_string(axis));
  Shape out_shape = a.shape();
  out_shape[axis] += b.dim(axis);

  int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  int64_t a_inner = 1, b_inner = 1;
  for (int i = axis; i < a.rank(); ++i) {
    a_inner *= a.dim(i);
    b_inner *= b.dim(i);
  }

  Tensor out = Tensor::zeros(out_shape);
  auto od = out.data();
  auto ad = a.data();
  auto bd = b.data();
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(ad.data() + o * a_inner, a_inner, od.data() + o * (a_inner + b_inner));
    std::copy_n(bd.data() + o * b_inner, b_inner, od.data() + o * (a_inner + b_inner) + a_inner);
  }

  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor a_t = a, b_t = b, out_t = out;
    tape.record([a_t, b_t, out_t, outer, a_inner, b_inner]() mutable {
      auto g = out_t.grad();
      for (int64_t o = 0; o < outer; ++o) {
        const scalar* src = g.data() + o * (a_inner + b_inner);
        if (a_t.requires_grad()) {
          scalar* dst = a_t.grad().data() + o * a_inner;
          for (int64_t i = 0; i < a_inner; ++i) dst[i] += src[i];
        }
        if (b_t.requires_grad()) {
          scalar* dst = b_t.grad().data() + o * b_inner;
          for (int64_t i = 0; i < b_inner; ++i) dst[i] += src[a_inner + i];
        }
      }
    });
  }
  return out;
}

Tensor take_block(Tape& tape, const Tensor& x, int64_t offset, Shape out_shape) {
  const int64_t n = shape_numel(out_shape);
  check(offset >= 0 && offset + n <= x.numel(), "take_block: range out of bounds");
  Tensor out = Tensor::zeros(out_shape);
  std::copy_n(x.data().data() + offset, n, out.data().data());
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t, offset, n]() mutable {
      if (!x_t.requires_grad()) return;
      auto g = out_t.grad();
      scalar* dst = x_t.grad().data() + offset;
      for (int64_t i = 0; i < n; ++i) dst[i] += g[i];
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
  check(shape_numel(new_shape) == x.numel(), "reshape: element count mismatch");
  Tensor out = Tensor::from_data(std::move(new_shape),
                                 std::vector<scalar>(x.data().begin(), x.data().end()));
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t]() mutable {
      if (!x_t.requires_grad()) return;
      x_t.accumulate_grad(out_t.grad());
    });
  }
  return out;
}

namespace {

void permute_nhwc_nchw(const scalar* src, scalar* dst, int N, int H, int W, int C, bool to_nchw,
                       bool accumulate) {
  for (int n = 0; n < N; ++n) {
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < W; ++w) {
        const int64_t nhwc = ((static_cast<int64_t>(n) * H + h) * W + w) * C;
        for (int c = 0; c < C; ++c) {
          const int64_t nchw = ((static_cast<int64_t>(n) * C + c) * H + h) * W + w;
          const int64_t from = to_nchw ? nhwc + c : nchw;
          const int64_t to = to_nchw ? nchw : nhwc + c;
          if (accumulate)
            dst[to] += src[from];
          else
            dst[to] = src[from];
        }
      }
    }
  }
}

}  // namespace

Tensor nhwc_to_nchw(Tape& tape, const Tensor& x) {
  check(x.rank() == 4, "nhwc_to_nchw: input must be 4-D");
  const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  Tensor out = Tensor::zeros({N, C, H, W});
  permute_nhwc_nchw(x.data().data(), out.data().data(), N, H, W, C, true, false);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t, N, H, W, C]() mutable {
      if (!x_t.requires_grad()) return;
      permute_nhwc_nchw(out_t.grad().data(), x_t.grad().data(), N, H, W, C, false, true);
    });
  }
  return out;
}

Tensor nchw_to_nhwc(Tape& tape, const Tensor& x) {
  check(x.rank() == 4, "nchw_to_nhwc: input must be 4-D");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out = Tensor::zeros({N, H, W, C});
  permute_nhwc_nchw(x.data().data(), out.data().data(), N, H, W, C, false, false);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t, N, H, W, C]() mutable {
      if (!x_t.requires_grad()) return;
      permute_nhwc_nchw(out_t.grad().data(), x_t.grad().data(), N, H, W, C, true, true);
    });
  }
  return out;
}

Tensor upsample_nearest(Tape& tape, const Tensor& x, int factor_h, int factor_w) {
  check(x.rank() == 4, "upsample_nearest: input must be 4-D");
  check(factor_h >= 1 && factor_w >= 1, "upsample_nearest: factors must be >= 1");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = H * factor_h, Wo = W * factor_w;
  Tensor out = Tensor::zeros({N, C, Ho, Wo});
  auto xd = x.data();
  auto od = out.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const scalar* ip = xd.data() + static_cast<int64_t>(nc) * H * W;
    scalar* op = od.data() + static_cast<int64_t>(nc) * Ho * Wo;
    for (int y = 0; y < Ho; ++y) {
      const scalar* row = ip + static_cast<int64_t>(y / factor_h) * W;
      scalar* orow = op + static_cast<int64_t>(y) * Wo;
      for (int xo = 0; xo < Wo; ++xo) orow[xo] = row[xo / factor_w];
    }
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t, N, C, H, W, factor_h, factor_w]() mutable {
      if (!x_t.requires_grad()) return;
      const int Ho = H * factor_h, Wo = W * factor_w;
      auto g = out_t.grad();
      auto gx = x_t.grad();
      for (int nc = 0; nc < N * C; ++nc) {
        const scalar* gp = g.data() + static_cast<int64_t>(nc) * Ho * Wo;
        scalar* gxp = gx.data() + static_cast<int64_t>(nc) * H * W;
        for (int y = 0; y < Ho; ++y) {
          const scalar* grow = gp + static_cast<int64_t>(y) * Wo;
          scalar* xrow = gxp + static_cast<int64_t>(y / factor_h) * W;
          for (int xo = 0; xo < Wo; ++xo) xrow[xo / factor_w] += grow[xo];
        }
      }
    });
  }
  return out;
}

// ---- blur -------------------------------------------------------------------

namespace {

// One separable pass over a single plane, zero padding at the border.
void blur_pass(const scalar* src, scalar* dst, int H, int W, const std::vector<scalar>& k,
               bool horizontal) {
  const int R = static_cast<int>(k.size() - 1) / 2;
  if (horizontal) {
    for (int y = 0; y < H; ++y) {
      const scalar* row = src + static_cast<int64_t>(y) * W;
      scalar* orow = dst + static_cast<int64_t>(y) * W;
      for (int x = 0; x < W; ++x) {
        scalar acc = 0;
        const int d0 = std::max(-R, -x), d1 = std::min(R, W - 1 - x);
        for (int d = d0; d <= d1; ++d) acc += k[d + R] * row[x + d];
        orow[x] = acc;
      }
    }
  } else {
    for (int y = 0; y < H; ++y) {
      scalar* orow = dst + static_cast<int64_t>(y) * W;
      const int d0 = std::max(-R, -y), d1 = std::min(R, H - 1 - y);
      for (int x = 0; x < W; ++x) {
        scalar acc = 0;
        for (int d = d0; d <= d1; ++d) acc += k[d + R] * src[static_cast<int64_t>(y + d) * W + x];
        orow[x] = acc;
      }
    }
  }
}

void blur_plane(const scalar* src, scalar* dst, scalar* tmp, int H, int W,
                const std::vector<scalar>& k) {
  blur_pass(src, tmp, H, W, k, true);
  blur_pass(tmp, dst, H, W, k, false);
}

// In-frame kernel mass along one axis; the 2-D mass field is the outer
// product wy[y] * wx[x].
std::vector<scalar> edge_mass(int n, const std::vector<scalar>& k) {
  const int R = static_cast<int>(k.size() - 1) / 2;
  std::vector<scalar> m(n);
  for (int i = 0; i < n; ++i) {
    scalar acc = 0;
    const int d0 = std::max(-R, -i), d1 = std::min(R, n - 1 - i);
    for (int d = d0; d <= d1; ++d) acc += k[d + R];
    m[i] = acc;
  }
  return m;
}

}  // namespace

Tensor blur2d(Tape& tape, const Tensor& x, const std::vector<scalar>& kernel1d) {
  check(x.rank() == 4, "blur2d: input must be 4-D");
  check(kernel1d.size() % 2 == 1, "blur2d: kernel length must be odd");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t plane = static_cast<int64_t>(H) * W;

  const std::vector<scalar> wy = edge_mass(H, kernel1d);
  const std::vector<scalar> wx = edge_mass(W, kernel1d);

  Tensor out = Tensor::zeros(x.shape());
  std::vector<scalar> tmp(plane);
  auto xd = x.data();
  auto od = out.data();
  for (int p = 0; p < N * C; ++p) {
    scalar* op = od.data() + p * plane;
    blur_plane(xd.data() + p * plane, op, tmp.data(), H, W, kernel1d);
    for (int y = 0; y < H; ++y)
      for (int xo = 0; xo < W; ++xo) op[static_cast<int64_t>(y) * W + xo] /= wy[y] * wx[xo];
  }

  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    auto k = kernel1d;
    tape.record([x_t, out_t, k, wy, wx, N, C, H, W]() mutable {
      if (!x_t.requires_grad()) return;
      const int64_t plane = static_cast<int64_t>(H) * W;
      auto g = out_t.grad();
      auto gx = x_t.grad();
      std::vector<scalar> scaled(plane), blurred(plane), tmp(plane);
      for (int p = 0; p < N * C; ++p) {
        const scalar* gp = g.data() + p * plane;
        for (int y = 0; y < H; ++y)
          for (int xo = 0; xo < W; ++xo) {
            const int64_t i = static_cast<int64_t>(y) * W + xo;
            scaled[i] = gp[i] / (wy[y] * wx[xo]);
          }
        // The symmetric zero-padded blur is self-adjoint.
        blur_plane(scaled.data(), blurred.data(), tmp.data(), H, W, k);
        scalar* gxp = gx.data() + p * plane;
        for (int64_t i = 0; i < plane; ++i) gxp[i] += blurred[i];
      }
    });
  }
  return out;
}

// ---- reductions ---------------------------------------------------------------

Tensor mean(Tape& tape, const Tensor& x) {
  const int64_t n = x.numel();
  check(n > 0, "mean: empty tensor");
  double acc = 0;
  for (scalar v : x.data()) acc += v;
  Tensor out = Tensor::from_data({1}, {static_cast<scalar>(acc / static_cast<double>(n))});
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t, n]() mutable {
      if (!x_t.requires_grad()) return;
      const scalar g = out_t.grad()[0] / static_cast<scalar>(n);
      for (scalar& v : x_t.grad()) v += g;
    });
  }
  return out;
}

Tensor mean_channels(Tape& tape, const Tensor& x) {
  check(x.rank() == 4, "mean_channels: input must be 4-D");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t plane = static_cast<int64_t>(H) * W;
  Tensor out = Tensor::zeros({N, 1, H, W});
  auto xd = x.data();
  auto od = out.data();
  const scalar inv = scalar(1) / static_cast<scalar>(C);
  for (int n = 0; n < N; ++n) {
    scalar* op = od.data() + n * plane;
    for (int c = 0; c < C; ++c) {
      const scalar* ip = xd.data() + (static_cast<int64_t>(n) * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) op[i] += ip[i];
    }
    for (int64_t i = 0; i < plane; ++i) op[i] *= inv;
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor x_t = x, out_t = out;
    tape.record([x_t, out_t, N, C, plane, inv]() mutable {
      if (!x_t.requires_grad()) return;
      auto g = out_t.grad();
      auto gx = x_t.grad();
      for (int n = 0; n < N; ++n) {
        const scalar* gp = g.data() + n * plane;
        for (int c = 0; c < C; ++c) {
          scalar* gxp = gx.data() + (static_cast<int64_t>(n) * C + c) * plane;
          for (int64_t i = 0; i < plane; ++i) gxp[i] += gp[i] * inv;
        }
      }
    });
  }
  return out;
}

MGNR_NS_END
