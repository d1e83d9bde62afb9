#include "core/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "core/ssim.hpp"

MGNR_NS_BEGIN

namespace {

void check_compatible(const VideoSequence& x, const VideoSequence& y) {
  if (x.N != y.N || x.T != y.T || x.H != y.H || x.W != y.W)
    throw Error(ErrorKind::config, "sequence dims differ: " + std::to_string(x.N) + "x" +
                                       std::to_string(x.T) + "x" + std::to_string(x.H) + "x" +
                                       std::to_string(x.W) + " vs " + std::to_string(y.N) + "x" +
                                       std::to_string(y.T) + "x" + std::to_string(y.H) + "x" +
                                       std::to_string(y.W));
}

double mse_to_psnr(double sse, double count) {
  if (count <= 0) throw Error(ErrorKind::internal, "empty pixel set in psnr");
  if (sse == 0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(sse / count);
}

}  // namespace

double psnr_frame(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape())
    throw Error(ErrorKind::config,
                "frame shapes differ: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  std::span<const scalar> a = x.data();
  std::span<const scalar> b = y.data();
  double sse = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = double(a[i]) - double(b[i]);
    sse += d * d;
  }
  return mse_to_psnr(sse, double(a.size()));
}

double psnr(const VideoSequence& x, const VideoSequence& y) {
  check_compatible(x, y);
  double sse = 0;
  double count = 0;
  for (size_t f = 0; f < x.frames.size(); ++f) {
    std::span<const scalar> a = x.frames[f].data();
    std::span<const scalar> b = y.frames[f].data();
    if (a.size() != b.size()) throw Error(ErrorKind::config, "frame sizes differ");
    for (size_t i = 0; i < a.size(); ++i) {
      double d = double(a[i]) - double(b[i]);
      sse += d * d;
    }
    count += double(a.size());
  }
  return mse_to_psnr(sse, count);
}

double psnr_region(const VideoSequence& x, const VideoSequence& y,
                   const std::vector<std::vector<uint8_t>>& region) {
  check_compatible(x, y);
  if (region.size() != x.frames.size())
    throw Error(ErrorKind::config, "mask count differs from frame count");
  const size_t plane = static_cast<size_t>(x.H) * x.W;
  double sse = 0;
  double count = 0;
  for (size_t f = 0; f < x.frames.size(); ++f) {
    if (region[f].size() != plane)
      throw Error(ErrorKind::config, "mask size differs from frame size");
    std::span<const scalar> a = x.frames[f].data();
    std::span<const scalar> b = y.frames[f].data();
    for (size_t p = 0; p < plane; ++p) {
      if (!region[f][p]) continue;
      for (int ch = 0; ch < 3; ++ch) {
        size_t i = static_cast<size_t>(ch) * plane + p;
        double d = double(a[i]) - double(b[i]);
        sse += d * d;
      }
      count += 3;
    }
  }
  if (count == 0) throw Error(ErrorKind::config, "mask marks no pixels");
  return mse_to_psnr(sse, count);
}

double ssim_sequence(const VideoSequence& x, const VideoSequence& y) {
  check_compatible(x, y);
  double sum = 0;
  for (size_t f = 0; f < x.frames.size(); ++f)
    sum += double(ssim_scalar(x.frames[f], y.frames[f]));
  return sum / double(x.frames.size());
}

// --------------------------------------------------------------- BD-rate

namespace {

struct CubicFit {
  double center = 0;      // quality offset used for conditioning
  std::array<double, 4> a{};  // log10(rate) = sum a[i] * (q - center)^i

  double integral(double lo, double hi) const {
    double l = lo - center, h = hi - center;
    auto anti = [&](double q) {
      return a[0] * q + a[1] * q * q / 2 + a[2] * q * q * q / 3 + a[3] * q * q * q * q / 4;
    };
    return anti(h) - anti(l);
  }
};

double quality_of(const RDPoint& p, QualityKey key) {
  return key == QualityKey::psnr ? p.psnr : p.ssim;
}

CubicFit fit_log_rate(const std::vector<RDPoint>& pts, QualityKey key, const char* label) {
  if (pts.size() < 4)
    throw Error(ErrorKind::config, std::string(label) + " curve needs at least 4 points, got " +
                                       std::to_string(pts.size()));
  std::vector<double> q(pts.size()), r(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    q[i] = quality_of(pts[i], key);
    if (!std::isfinite(q[i]))
      throw Error(ErrorKind::config, std::string(label) + " curve has a non-finite quality value");
    if (!(pts[i].bpp > 0))
      throw Error(ErrorKind::config, std::string(label) + " curve has a non-positive rate");
    r[i] = std::log10(pts[i].bpp);
  }
  for (size_t i = 0; i < q.size(); ++i)
    for (size_t j = i + 1; j < q.size(); ++j)
      if (q[i] == q[j])
        throw Error(ErrorKind::config, std::string(label) + " curve repeats a quality value");

  CubicFit fit;
  for (double v : q) fit.center += v;
  fit.center /= double(q.size());

  // Normal equations for the centered Vandermonde least-squares system.
  double m[4][5] = {};
  for (size_t i = 0; i < q.size(); ++i) {
    double dq = q[i] - fit.center;
    double pw[7];
    pw[0] = 1;
    for (int p = 1; p < 7; ++p) pw[p] = pw[p - 1] * dq;
    for (int row = 0; row < 4; ++row) {
      for (int col = 0; col < 4; ++col) m[row][col] += pw[row + col];
      m[row][4] += pw[row] * r[i];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 4; ++row)
      if (std::fabs(m[row][col]) > std::fabs(m[pivot][col])) pivot = row;
    if (std::fabs(m[pivot][col]) < 1e-12)
      throw Error(ErrorKind::config, std::string(label) + " curve is degenerate for a cubic fit");
    if (pivot != col)
      for (int k = 0; k < 5; ++k) std::swap(m[pivot][k], m[col][k]);
    for (int row = 0; row < 4; ++row) {
      if (row == col) continue;
      double factor = m[row][col] / m[col][col];
      for (int k = col; k < 5; ++k) m[row][k] -= factor * m[col][k];
    }
  }
  for (int i = 0; i < 4; ++i) fit.a[i] = m[i][4] / m[i][i];
  return fit;
}

}  // namespace

double bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test,
               QualityKey key) {
  CubicFit fa = fit_log_rate(anchor, key, "anchor");
  CubicFit ft = fit_log_rate(test, key, "test");

  double a_lo = quality_of(anchor[0], key), a_hi = a_lo;
  for (const RDPoint& p : anchor) {
    a_lo = std::min(a_lo, quality_of(p, key));
    a_hi = std::max(a_hi, quality_of(p, key));
  }
  double t_lo = quality_of(test[0], key), t_hi = t_lo;
  for (const RDPoint& p : test) {
    t_lo = std::min(t_lo, quality_of(p, key));
    t_hi = std::max(t_hi, quality_of(p, key));
  }
  double lo = std::max(a_lo, t_lo);
  double hi = std::min(a_hi, t_hi);
  if (!(hi > lo)) throw Error(ErrorKind::config, "quality ranges do not overlap");

  double delta = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, delta) - 1.0);
}

// ------------------------------------------------------------------- CSV

std::vector<RDPoint> read_rd_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::io, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "bpp,psnr,ssim")
    throw Error(ErrorKind::io, path + ": expected header 'bpp,psnr,ssim', got '" + line + "'");
  std::vector<RDPoint> points;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    RDPoint p;
    char trailing;
    int got = std::sscanf(line.c_str(), "%lf,%lf,%lf%c", &p.bpp, &p.psnr, &p.ssim, &trailing);
    if (got != 3)
      throw Error(ErrorKind::io, path + ":" + std::to_string(lineno) + ": bad row '" + line + "'");
    if (!(p.bpp > 0))
      throw Error(ErrorKind::config,
                  path + ":" + std::to_string(lineno) + ": rate must be positive");
    points.push_back(p);
  }
  return points;
}

void write_rd_csv(const std::vector<RDPoint>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  out << "bpp,psnr,ssim\n";
  char buf[128];
  for (const RDPoint& p : points) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", p.bpp, p.psnr, p.ssim);
    out << buf;
  }
  if (!out) throw Error(ErrorKind::io, "write failed for " + path);
}

MGNR_NS_END
