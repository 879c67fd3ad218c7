#include "omnisal/nn/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <string>

#include "omnisal/error.hpp"

namespace omnisal::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatC = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// Upper bound on the number of doubles in one im2col buffer.
constexpr std::size_t kColumnBudget = std::size_t{1} << 23;

// Geometry of one convolution seen from the image side: an image of
// (channels, height, width) is read through k x k windows producing an
// out_h x out_w grid of positions per sample.
struct Window {
  std::size_t batch, channels, height, width;
  int kernel, stride, pad;
  std::size_t out_h, out_w;

  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t positions() const { return batch * out_h * out_w; }
  std::size_t chunk() const { return std::max<std::size_t>(1, kColumnBudget / rows()); }
};

// col is column-major (rows x count): the window of position q0 + j is column j.
void im2col(const double* image, const Window& g, std::size_t q0, std::size_t count, double* col) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t rows = g.rows();
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t q = q0 + j;
    const std::size_t n = q / plane;
    const std::size_t oy = (q % plane) / g.out_w;
    const std::size_t ox = q % g.out_w;
    double* dst = col + j * rows;
    const long y0 = static_cast<long>(oy) * g.stride - g.pad;
    const long x0 = static_cast<long>(ox) * g.stride - g.pad;
    for (std::size_t c = 0; c < g.channels; ++c) {
      const double* src = image + (n * g.channels + c) * g.height * g.width;
      for (int ky = 0; ky < g.kernel; ++ky) {
        const long y = y0 + ky;
        if (y < 0 || y >= static_cast<long>(g.height)) {
          std::fill_n(dst, g.kernel, 0.0);
          dst += g.kernel;
          continue;
        }
        const double* srow = src + y * g.width;
        for (int kx = 0; kx < g.kernel; ++kx) {
          const long x = x0 + kx;
          *dst++ = (x < 0 || x >= static_cast<long>(g.width)) ? 0.0 : srow[x];
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image.
void col2im_add(const double* col, const Window& g, std::size_t q0, std::size_t count, double* image) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t rows = g.rows();
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t q = q0 + j;
    const std::size_t n = q / plane;
    const std::size_t oy = (q % plane) / g.out_w;
    const std::size_t ox = q % g.out_w;
    const double* src = col + j * rows;
    const long y0 = static_cast<long>(oy) * g.stride - g.pad;
    const long x0 = static_cast<long>(ox) * g.stride - g.pad;
    for (std::size_t c = 0; c < g.channels; ++c) {
      double* dst = image + (n * g.channels + c) * g.height * g.width;
      for (int ky = 0; ky < g.kernel; ++ky) {
        const long y = y0 + ky;
        if (y < 0 || y >= static_cast<long>(g.height)) {
          src += g.kernel;
          continue;
        }
        double* drow = dst + y * g.width;
        for (int kx = 0; kx < g.kernel; ++kx, ++src) {
          const long x = x0 + kx;
          if (x >= 0 && x < static_cast<long>(g.width)) drow[x] += *src;
        }
      }
    }
  }
}

// Gathers per-position channel vectors of a (N, C, out_h, out_w) tensor
// into a column-major (C x count) matrix.
void gather_positions(const Tensor& t, std::size_t q0, std::size_t count, double* dst) {
  const std::size_t plane = t.h() * t.w();
  const std::size_t ch = t.c();
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t q = q0 + j;
    const std::size_t n = q / plane;
    const std::size_t s = q % plane;
    const double* src = t.data() + n * ch * plane + s;
    for (std::size_t c = 0; c < ch; ++c) dst[j * ch + c] = src[c * plane];
  }
}

void scatter_positions(const double* src, std::size_t q0, std::size_t count, Tensor& t) {
  const std::size_t plane = t.h() * t.w();
  const std::size_t ch = t.c();
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t q = q0 + j;
    const std::size_t n = q / plane;
    const std::size_t s = q % plane;
    double* dst = t.data() + n * ch * plane + s;
    for (std::size_t c = 0; c < ch; ++c) dst[c * plane] = src[j * ch + c];
  }
}

void check_weights(const Tensor& x, const Tensor& w, std::size_t in_channels_axis, const char* op) {
  require_rank4(x, op);
  require_rank4(w, op);
  if (w.h() != w.w()) throw Error(Errc::ShapeMismatch, std::string(op) + ": kernel must be square");
  if (w.dim(in_channels_axis) != x.c())
    throw Error(Errc::ShapeMismatch, std::string(op) + ": input has " + std::to_string(x.c()) +
                                         " channels, weights expect " +
                                         std::to_string(w.dim(in_channels_axis)));
}

// Reorders (Cout, Cin, k, k) into the (Cin, Cout * k * k) matrix used by the
// transposed convolution, and back.
MatR deconv_matrix(const Tensor& w) {
  const std::size_t co = w.dim(0), ci = w.dim(1), kk = w.dim(2) * w.dim(3);
  MatR m(ci, co * kk);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < ci; ++i)
      for (std::size_t k = 0; k < kk; ++k) m(i, o * kk + k) = w[(o * ci + i) * kk + k];
  return m;
}

Tensor deconv_weights_from_matrix(const MatR& m, const std::vector<std::size_t>& shape) {
  Tensor w(shape);
  const std::size_t co = shape[0], ci = shape[1], kk = shape[2] * shape[3];
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < ci; ++i)
      for (std::size_t k = 0; k < kk; ++k) w[(o * ci + i) * kk + k] = m(i, o * kk + k);
  return w;
}

}  // namespace

int conv_out_size(int in, int kernel, int stride, int pad) {
  if (kernel < 1 || stride < 1 || pad < 0) throw Error(Errc::InvalidArgument, "bad window parameters");
  const int span = in + 2 * pad - kernel;
  if (span < 0)
    throw Error(Errc::ShapeMismatch, "input " + std::to_string(in) + " smaller than kernel " +
                                         std::to_string(kernel));
  return span / stride + 1;
}

int deconv_out_size(int in, int kernel, int stride, int pad) {
  if (kernel < 1 || stride < 1 || pad < 0) throw Error(Errc::InvalidArgument, "bad window parameters");
  const int out = (in - 1) * stride - 2 * pad + kernel;
  if (in < 1 || out < 1) throw Error(Errc::ShapeMismatch, "transposed convolution output is empty");
  return out;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  check_weights(x, w, 1, "conv2d_forward");
  if (b.size() != w.n()) throw Error(Errc::ShapeMismatch, "conv2d_forward: bias length");
  const int k = static_cast<int>(w.h());
  const Window g{x.n(), x.c(), x.h(), x.w(), k, stride, pad,
                 static_cast<std::size_t>(conv_out_size(static_cast<int>(x.h()), k, stride, pad)),
                 static_cast<std::size_t>(conv_out_size(static_cast<int>(x.w()), k, stride, pad))};
  const std::size_t cout = w.n();
  Tensor out({g.batch, cout, g.out_h, g.out_w});
  const Eigen::Map<const MatR> W(w.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.rows()));
  std::vector<double> col;
  MatC y;
  for (std::size_t q0 = 0; q0 < g.positions(); q0 += g.chunk()) {
    const std::size_t count = std::min(g.chunk(), g.positions() - q0);
    col.resize(g.rows() * count);
    im2col(x.data(), g, q0, count, col.data());
    const Eigen::Map<const MatC> C(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(count));
    y.noalias() = W * C;
    for (std::size_t j = 0; j < count; ++j)
      for (std::size_t o = 0; o < cout; ++o) y(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(j)) += b[o];
    scatter_positions(y.data(), q0, count, out);
  }
  return out;
}

ParamGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride, int pad) {
  check_weights(x, w, 1, "conv2d_backward");
  const int k = static_cast<int>(w.h());
  const Window g{x.n(), x.c(), x.h(), x.w(), k, stride, pad,
                 static_cast<std::size_t>(conv_out_size(static_cast<int>(x.h()), k, stride, pad)),
                 static_cast<std::size_t>(conv_out_size(static_cast<int>(x.w()), k, stride, pad))};
  const std::size_t cout = w.n();
  if (grad_out.shape() != std::vector<std::size_t>{g.batch, cout, g.out_h, g.out_w})
    throw Error(Errc::ShapeMismatch, "conv2d_backward: gradient shape " + shape_string(grad_out.shape()));

  ParamGrads r{Tensor(x.shape()), Tensor(w.shape()), Tensor({cout})};
  const Eigen::Map<const MatR> W(w.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.rows()));
  MatR gw = MatR::Zero(static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.rows()));
  std::vector<double> col, gcol, go;
  for (std::size_t q0 = 0; q0 < g.positions(); q0 += g.chunk()) {
    const std::size_t count = std::min(g.chunk(), g.positions() - q0);
    const auto ec = static_cast<Eigen::Index>(count);
    col.resize(g.rows() * count);
    go.resize(cout * count);
    gcol.resize(g.rows() * count);
    im2col(x.data(), g, q0, count, col.data());
    gather_positions(grad_out, q0, count, go.data());
    const Eigen::Map<const MatC> C(col.data(), static_cast<Eigen::Index>(g.rows()), ec);
    const Eigen::Map<const MatC> G(go.data(), static_cast<Eigen::Index>(cout), ec);
    gw.noalias() += G * C.transpose();
    Eigen::Map<MatC> GC(gcol.data(), static_cast<Eigen::Index>(g.rows()), ec);
    GC.noalias() = W.transpose() * G;
    col2im_add(gcol.data(), g, q0, count, r.grad_x.data());
    for (std::size_t j = 0; j < count; ++j)
      for (std::size_t o = 0; o < cout; ++o) r.grad_b[o] += go[j * cout + o];
  }
  std::copy(gw.data(), gw.data() + gw.size(), r.grad_w.data());
  return r;
}

Tensor deconv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  check_weights(x, w, 1, "deconv2d_forward");
  if (b.size() != w.n()) throw Error(Errc::ShapeMismatch, "deconv2d_forward: bias length");
  const int k = static_cast<int>(w.h());
  const std::size_t cout = w.n();
  const std::size_t oh = static_cast<std::size_t>(deconv_out_size(static_cast<int>(x.h()), k, stride, pad));
  const std::size_t ow = static_cast<std::size_t>(deconv_out_size(static_cast<int>(x.w()), k, stride, pad));
  // Seen from the output image, x is the window grid of an ordinary convolution.
  const Window g{x.n(), cout, oh, ow, k, stride, pad, x.h(), x.w()};
  Tensor out({x.n(), cout, oh, ow});
  const MatR Wm = deconv_matrix(w);
  std::vector<double> xin, col;
  for (std::size_t q0 = 0; q0 < g.positions(); q0 += g.chunk()) {
    const std::size_t count = std::min(g.chunk(), g.positions() - q0);
    const auto ec = static_cast<Eigen::Index>(count);
    xin.resize(x.c() * count);
    col.resize(g.rows() * count);
    gather_positions(x, q0, count, xin.data());
    const Eigen::Map<const MatC> X(xin.data(), static_cast<Eigen::Index>(x.c()), ec);
    Eigen::Map<MatC> C(col.data(), static_cast<Eigen::Index>(g.rows()), ec);
    C.noalias() = Wm.transpose() * X;
    col2im_add(col.data(), g, q0, count, out.data());
  }
  const std::size_t plane = oh * ow;
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t o = 0; o < cout; ++o) {
      double* p = out.data() + (n * cout + o) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += b[o];
    }
  return out;
}

ParamGrads deconv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride, int pad) {
  check_weights(x, w, 1, "deconv2d_backward");
  const int k = static_cast<int>(w.h());
  const std::size_t cout = w.n();
  const std::size_t oh = static_cast<std::size_t>(deconv_out_size(static_cast<int>(x.h()), k, stride, pad));
  const std::size_t ow = static_cast<std::size_t>(deconv_out_size(static_cast<int>(x.w()), k, stride, pad));
  if (grad_out.shape() != std::vector<std::size_t>{x.n(), cout, oh, ow})
    throw Error(Errc::ShapeMismatch, "deconv2d_backward: gradient shape " + shape_string(grad_out.shape()));
  const Window g{x.n(), cout, oh, ow, k, stride, pad, x.h(), x.w()};

  ParamGrads r{Tensor(x.shape()), Tensor(w.shape()), Tensor({cout})};
  const MatR Wm = deconv_matrix(w);
  MatR gwm = MatR::Zero(Wm.rows(), Wm.cols());
  std::vector<double> xin, col, gx;
  for (std::size_t q0 = 0; q0 < g.positions(); q0 += g.chunk()) {
    const std::size_t count = std::min(g.chunk(), g.positions() - q0);
    const auto ec = static_cast<Eigen::Index>(count);
    xin.resize(x.c() * count);
    col.resize(g.rows() * count);
    gx.resize(x.c() * count);
    gather_positions(x, q0, count, xin.data());
    im2col(grad_out.data(), g, q0, count, col.data());
    const Eigen::Map<const MatC> X(xin.data(), static_cast<Eigen::Index>(x.c()), ec);
    const Eigen::Map<const MatC> GC(col.data(), static_cast<Eigen::Index>(g.rows()), ec);
    gwm.noalias() += X * GC.transpose();
    Eigen::Map<MatC> GX(gx.data(), static_cast<Eigen::Index>(x.c()), ec);
    GX.noalias() = Wm * GC;
    scatter_positions(gx.data(), q0, count, r.grad_x);
  }
  r.grad_w = deconv_weights_from_matrix(gwm, w.shape());
  const std::size_t plane = oh * ow;
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t o = 0; o < cout; ++o) {
      const double* p = grad_out.data() + (n * cout + o) * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      r.grad_b[o] += s;
    }
  return r;
}

PoolResult maxpool_forward(const Tensor& x, int kernel, int stride) {
  require_rank4(x, "maxpool_forward");
  const std::size_t oh = static_cast<std::size_t>(conv_out_size(static_cast<int>(x.h()), kernel, stride, 0));
  const std::size_t ow = static_cast<std::size_t>(conv_out_size(static_cast<int>(x.w()), kernel, stride, 0));
  PoolResult r{Tensor({x.n(), x.c(), oh, ow}), {}, x.shape()};
  r.argmax.resize(r.out.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < x.n() * x.c(); ++nc) {
    const std::size_t base = nc * x.h() * x.w();
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + oy * stride * x.w() + ox * stride;
        for (int ky = 0; ky < kernel; ++ky)
          for (int kx = 0; kx < kernel; ++kx) {
            const std::size_t idx = base + (oy * stride + ky) * x.w() + ox * stride + kx;
            if (x[idx] > x[best]) best = idx;
          }
        r.out[o] = x[best];
        r.argmax[o] = best;
      }
  }
  return r;
}

Tensor maxpool_backward(const PoolResult& forward, const Tensor& grad_out) {
  if (grad_out.shape() != forward.out.shape())
    throw Error(Errc::ShapeMismatch, "maxpool_backward: gradient shape " + shape_string(grad_out.shape()));
  Tensor grad_x(forward.input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_x[forward.argmax[i]] += grad_out[i];
  return grad_x;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(x[i] > 0.0)) g[i] = 0.0;
  return g;
}

LossResult euclidean_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "euclidean_loss");
  const double count = static_cast<double>(pred.size());
  LossResult r{0.0, Tensor(pred.shape())};
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
    r.grad[i] = d / count;
  }
  r.loss = sum / (2.0 * count);
  return r;
}

namespace {

struct Taps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> a;  // weight of i1
};

Taps linear_taps(std::size_t in, std::size_t out) {
  Taps t;
  const double scale = static_cast<double>(in) / out;
  for (std::size_t o = 0; o < out; ++o) {
    const double f = std::clamp((o + 0.5) * scale - 0.5, 0.0, in - 1.0);
    const auto lo = static_cast<std::size_t>(f);
    t.i0.push_back(lo);
    t.i1.push_back(std::min(lo + 1, in - 1));
    t.a.push_back(f - lo);
  }
  return t;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::size_t height, std::size_t width) {
  require_rank4(x, "resize_bilinear");
  if (height == 0 || width == 0) throw Error(Errc::InvalidArgument, "resize to empty tensor");
  if (x.h() == height && x.w() == width) return x;
  const Taps ty = linear_taps(x.h(), height), tx = linear_taps(x.w(), width);
  Tensor out({x.n(), x.c(), height, width});
  for (std::size_t nc = 0; nc < x.n() * x.c(); ++nc) {
    const double* src = x.data() + nc * x.h() * x.w();
    double* dst = out.data() + nc * height * width;
    for (std::size_t y = 0; y < height; ++y) {
      const double* r0 = src + ty.i0[y] * x.w();
      const double* r1 = src + ty.i1[y] * x.w();
      for (std::size_t xx = 0; xx < width; ++xx) {
        const double top = (1 - tx.a[xx]) * r0[tx.i0[xx]] + tx.a[xx] * r0[tx.i1[xx]];
        const double bot = (1 - tx.a[xx]) * r1[tx.i0[xx]] + tx.a[xx] * r1[tx.i1[xx]];
        dst[y * width + xx] = (1 - ty.a[y]) * top + ty.a[y] * bot;
      }
    }
  }
  return out;
}

Tensor resize_bilinear_backward(const Tensor& grad_out, std::size_t in_height, std::size_t in_width) {
  require_rank4(grad_out, "resize_bilinear_backward");
  if (grad_out.h() == in_height && grad_out.w() == in_width) return grad_out;
  const Taps ty = linear_taps(in_height, grad_out.h()), tx = linear_taps(in_width, grad_out.w());
  Tensor grad({grad_out.n(), grad_out.c(), in_height, in_width});
  const std::size_t oh = grad_out.h(), ow = grad_out.w();
  for (std::size_t nc = 0; nc < grad_out.n() * grad_out.c(); ++nc) {
    const double* src = grad_out.data() + nc * oh * ow;
    double* dst = grad.data() + nc * in_height * in_width;
    for (std::size_t y = 0; y < oh; ++y) {
      double* r0 = dst + ty.i0[y] * in_width;
      double* r1 = dst + ty.i1[y] * in_width;
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const double g = src[y * ow + xx];
        const double gt = (1 - ty.a[y]) * g, gb = ty.a[y] * g;
        r0[tx.i0[xx]] += (1 - tx.a[xx]) * gt;
        r0[tx.i1[xx]] += tx.a[xx] * gt;
        r1[tx.i0[xx]] += (1 - tx.a[xx]) * gb;
        r1[tx.i1[xx]] += tx.a[xx] * gb;
      }
    }
  }
  return grad;
}

}  // namespace omnisal::nn
