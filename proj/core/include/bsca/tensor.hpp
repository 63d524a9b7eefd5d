#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsca/errors.hpp"

namespace bsca {

/// Dense N-dimensional array of 32-bit floats, row-major.
/// Activations follow the N x C x H x W convention.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  static Tensor full(std::vector<int> shape, float value);
  static Tensor from(std::vector<int> shape, std::vector<float> values);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Convenience accessors for the common ranks. Not bounds-checked.
  float& at(int a, int b) { return data_[static_cast<std::size_t>(flat2(a, b))]; }
  float at(int a, int b) const { return data_[static_cast<std::size_t>(flat2(a, b))]; }
  float& at(int n, int c, int h, int w) { return data_[static_cast<std::size_t>(flat4(n, c, h, w))]; }
  float at(int n, int c, int h, int w) const { return data_[static_cast<std::size_t>(flat4(n, c, h, w))]; }

  std::int64_t flat2(int a, int b) const {
    return static_cast<std::int64_t>(a) * shape_[1] + b;
  }
  std::int64_t flat4(int n, int c, int h, int w) const {
    return ((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(float value);

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Throws ShapeError unless `t` has exactly the given shape.
void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what);
// Throws NumericError if `t` contains NaN or Inf. `op` names the producer.
void require_finite(const Tensor& t, const char* op);

}  // namespace bsca
