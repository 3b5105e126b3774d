#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mg::nd {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor vector(std::vector<double> values);
  /// Shape [rows, cols] from a row-major buffer.
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Rank-2 access.
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Parameter {
  Tensor value;
  Tensor grad;
};

/// Named trainable tensors with gradient buffers of identical shape.
/// Iteration order is the lexicographic name order, which fixes the
/// serialization and update order.
class ParameterSet {
 public:
  using Map = std::map<std::string, Parameter>;

  Parameter& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  void zero_grad();
  void scale_grad(double factor);
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t parameter_count() const noexcept;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

 private:
  Map params_;
};

}  // namespace mg::nd
