#include "motionguide/ndiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "motionguide/errors.hpp"

namespace mg::nd {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw structural_error("tensor shape " + shape_string(shape_) + " does not match " +
                           std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw structural_error("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Parameter& ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw structural_error("duplicate parameter '" + name + "'");
  Tensor grad(value.shape());
  auto [it, inserted] = params_.emplace(name, Parameter{std::move(value), std::move(grad)});
  return it->second;
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw structural_error("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw structural_error("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterSet::zero_grad() {
  for (auto& [name, p] : params_) p.grad.fill(0.0);
}

void ParameterSet::scale_grad(double factor) {
  for (auto& [name, p] : params_) {
    for (double& g : p.grad.data()) g *= factor;
  }
}

std::size_t ParameterSet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

}  // namespace mg::nd
