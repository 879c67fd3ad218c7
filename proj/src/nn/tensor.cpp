#include "omnisal/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "omnisal/error.hpp"

namespace omnisal::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 4) throw Error(Errc::InvalidArgument, "tensor rank must be 1..4");
  const std::size_t count =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(count, fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + shape_string(a.shape()) + " vs " +
                                         shape_string(b.shape()));
}

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4)
    throw Error(Errc::ShapeMismatch, std::string(what) + ": expected a rank-4 tensor, got " +
                                         shape_string(t.shape()));
}

Tensor batch_item(const Tensor& t, std::size_t i) {
  require_rank4(t, "batch_item");
  Tensor out({1, t.c(), t.h(), t.w()});
  const std::size_t stride = out.size();
  std::copy_n(t.data() + i * stride, stride, out.data());
  return out;
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
  if (items.empty()) throw Error(Errc::InvalidArgument, "empty batch");
  const Tensor& first = *items.front();
  require_rank4(first, "stack_batch");
  std::size_t n = 0;
  for (const Tensor* t : items) {
    require_rank4(*t, "stack_batch");
    if (t->c() != first.c() || t->h() != first.h() || t->w() != first.w())
      throw Error(Errc::ShapeMismatch, "stack_batch: items differ in shape");
    n += t->n();
  }
  Tensor out({n, first.c(), first.h(), first.w()});
  double* dst = out.data();
  for (const Tensor* t : items) dst = std::copy(t->data(), t->data() + t->size(), dst);
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw Error(Errc::ShapeMismatch, "concat_channels: " + shape_string(a.shape()) + " vs " +
                                         shape_string(b.shape()));
  Tensor out({a.n(), a.c() + b.c(), a.h(), a.w()});
  const std::size_t plane = a.h() * a.w();
  for (std::size_t i = 0; i < a.n(); ++i) {
    double* dst = out.data() + i * out.c() * plane;
    dst = std::copy_n(a.data() + i * a.c() * plane, a.c() * plane, dst);
    std::copy_n(b.data() + i * b.c() * plane, b.c() * plane, dst);
  }
  return out;
}

}  // namespace omnisal::nn
