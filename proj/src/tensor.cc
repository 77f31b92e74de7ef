#include "docner/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "docner/error.h"

namespace docner {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 2) {
    throw Error("tensor rank must be 1 or 2");
  }
  long n = 1;
  for (int d : shape_) {
    if (d < 0) throw Error("negative tensor dimension");
    n *= d;
  }
  values_.assign(n, fill);
}

Tensor::Tensor(int rows, int cols, double fill)
    : Tensor(std::vector<int>{rows, cols}, fill) {}

Tensor::Tensor(int rows, int cols, std::vector<double> values)
    : shape_{rows, cols}, values_(std::move(values)) {
  if (static_cast<long>(values_.size()) != static_cast<long>(rows) * cols) {
    throw Error("tensor value count does not match shape");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape_ = {static_cast<int>(values.size())};
  t.values_ = std::move(values);
  return t;
}

Tensor Tensor::matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw Error("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(values));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw Error("log_sum_exp of empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (std::isinf(m)) return m;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

}  // namespace docner
