#ifndef DOCNER_AUTODIFF_H_
#define DOCNER_AUTODIFF_H_

#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "docner/tensor.h"

namespace docner {

// A named trainable array. `grad` always has the shape of `value`.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}
  void zero_grad() { grad.fill(0.0); }
};

// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grad();
  long value_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Tensor& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records operations in construction order; backward() replays them in
// reverse, so every node is visited once after all of its consumers.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var constant(Tensor value);
  // Gradients flow into p.grad unless p.frozen.
  Var param(Parameter& p);

  // Appends a node computed from `parents`. `backward` reads grad(self) and
  // accumulates into the parents' gradients; it is dropped when no parent
  // needs a gradient.
  Var record(Tensor value, const std::vector<Var>& parents, Backward backward);

  const Tensor& value(int id) const;
  // Gradient buffer for a node, allocated on first use.
  Tensor& grad(int id);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and runs the recorded closures.
  void backward(Var root);

  // When false, parameters enter as constants and nothing is differentiable.
  bool grad_enabled = true;
  // Training-mode flag consulted by dropout.
  bool training = false;
  std::mt19937_64* rng = nullptr;

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

// Differentiable operations. All inputs must live on the same tape.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Adds a [1 x n] row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var gelu(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
// Row gather; used for embedding lookup and first-subword pooling.
Var gather_rows(Var table, const std::vector<int>& rows);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, int start, int count);
Var slice_rows(Var a, int start, int count);
// Inverted dropout in training mode, identity otherwise.
Var dropout(Var a, double p);
Var sum(Var a);
Var mean(Var a);
// Element-wise mean of equally shaped inputs.
Var average(const std::vector<Var>& parts);
// Sum over rows of -log softmax(logits)[row, target[row]].
Var cross_entropy(Var logits, const std::vector<int>& targets);

// Compares tape gradients of `loss` with respect to `params` against central
// differences. Returns the largest element-wise relative error
// |a - n| / max(|a|, |n|, 1e-8). Throws if the loss is not finite.
double grad_check(const std::function<Var(Tape&)>& loss,
                  const std::vector<Parameter*>& params, double epsilon = 1e-5);

}  // namespace docner

#endif  // DOCNER_AUTODIFF_H_
