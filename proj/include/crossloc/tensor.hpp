#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace crossloc::diff {

/// Dense row-major matrix of doubles. Vectors are 1 x n rows and scalars
/// are 1 x 1; every quantity inside the differentiable core is one of these.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor row(std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
  bool empty() const { return data_.empty(); }

  void fill(double v);
  bool all_finite() const;
  double scalar_value() const;  // throws unless 1 x 1

  /// "rows x cols" for error messages.
  std::string shape_str() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace crossloc::diff
