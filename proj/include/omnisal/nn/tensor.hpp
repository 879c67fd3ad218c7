#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace omnisal::nn {

/// Dense row-major tensor of doubles with rank <= 4. Activations use the
/// (batch, channels, height, width) layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0)
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  // 4-d accessors.
  std::size_t n() const { return shape_.at(0); }
  std::size_t c() const { return shape_.at(1); }
  std::size_t h() const { return shape_.at(2); }
  std::size_t w() const { return shape_.at(3); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws ShapeMismatch when the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank4(const Tensor& t, const char* what);

/// Slice of sample i along the batch axis, keeping a batch dimension of 1.
Tensor batch_item(const Tensor& t, std::size_t i);

/// Concatenates rank-4 tensors along the batch axis.
Tensor stack_batch(const std::vector<const Tensor*>& items);

/// Concatenates rank-4 tensors with equal batch and spatial dims along channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace omnisal::nn
