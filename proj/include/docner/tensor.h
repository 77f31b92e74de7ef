#ifndef DOCNER_TENSOR_H_
#define DOCNER_TENSOR_H_

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace docner {

// Dense row-major float64 tensor of rank 1 or 2. Rank-1 tensors behave as a
// single row where a matrix is expected.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(int rows, int cols, double fill = 0.0);
  Tensor(int rows, int cols, std::vector<double> values);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  int cols() const { return shape_.empty() ? 0 : shape_.back(); }
  int size() const { return static_cast<int>(values_.size()); }
  bool empty() const { return values_.empty(); }

  double& operator()(int r, int c) { return values_[r * cols() + c]; }
  double operator()(int r, int c) const { return values_[r * cols() + c]; }
  double& operator[](int i) { return values_[i]; }
  double operator[](int i) const { return values_[i]; }

  std::span<double> row(int r) { return {values_.data() + r * cols(), size_t(cols())}; }
  std::span<const double> row(int r) const {
    return {values_.data() + r * cols(), size_t(cols())};
  }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Tensor& other) const {
    return rows() == other.rows() && cols() == other.cols();
  }
  void fill(double v);
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

// Numerically stable log(sum(exp(v))). Throws on empty input.
double log_sum_exp(std::span<const double> v);

}  // namespace docner

#endif  // DOCNER_TENSOR_H_
