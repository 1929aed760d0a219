#include "stopnav/numeric/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "stopnav/error.hpp"

namespace stopnav::numeric {

std::size_t element_count(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorCode::shape_mismatch, "Array: shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorCode::shape_mismatch, "Array: zero-sized dimension in " + shape_string(shape));
  }
}
}  // namespace

Array::Array(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (element_count(shape_) != data_.size()) {
    throw Error(ErrorCode::shape_mismatch, "Array: shape " + shape_string(shape_) + " does not hold " +
                                               std::to_string(data_.size()) + " values");
  }
}

Array Array::from_vector(std::vector<double> values) {
  const auto n = values.size();
  return Array({n}, std::move(values));
}

void Array::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Array::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void softmax_inplace(std::span<double> values) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "softmax: empty axis");
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : values) v /= total;
}

Array softmax(const Array& z, std::size_t axis) {
  if (axis >= z.rank()) {
    throw Error(ErrorCode::invalid_argument,
                "softmax: axis " + std::to_string(axis) + " out of range for " + shape_string(z.shape()));
  }
  if (!z.all_finite()) throw Error(ErrorCode::invalid_argument, "softmax: non-finite input");
  const auto& shape = z.shape();
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];

  Array out = z;
  std::vector<double> run(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      for (std::size_t k = 0; k < n; ++k) run[k] = out[base + k * inner];
      softmax_inplace(run);
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] = run[k];
    }
  }
  return out;
}

}  // namespace stopnav::numeric
