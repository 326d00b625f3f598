#include "crossloc/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "crossloc/errors.hpp"

namespace crossloc::diff {

Tensor::Tensor(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("Tensor dimensions must be positive, got " + shape_str());
  }
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("Tensor dimensions must be positive, got " + shape_str());
  }
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str());
  }
}

Tensor Tensor::scalar(double v) { return Tensor(1, 1, {v}); }

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::scalar_value() const {
  if (!is_scalar()) {
    throw ShapeError("expected a 1x1 tensor, got " + shape_str());
  }
  return data_[0];
}

std::string Tensor::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

}  // namespace crossloc::diff
