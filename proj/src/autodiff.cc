#include "docner/autodiff.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "docner/error.h"

namespace docner {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<RowMatrix> mat(Tensor& t) {
  return {t.data(), t.rows(), t.cols()};
}
Eigen::Map<const RowMatrix> mat(const Tensor& t) {
  return {t.data(), t.rows(), t.cols()};
}

void check_same_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw Error("operands live on different tapes");
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw Error(std::string(op) + ": shape mismatch " + a.shape_string() +
                " vs " + b.shape_string());
  }
}

// Output tensors are always rank 2.
Tensor like(const Tensor& t) { return Tensor(t.rows(), t.cols()); }

template <typename F, typename G>
Var unary_elementwise(Var a, F forward, G derivative) {
  const Tensor& x = a.value();
  Tensor y = like(x);
  for (int i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return a.tape()->record(
      std::move(y), {a}, [a = a.id(), derivative](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(self);
        Tensor& ga = t.grad(a);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * derivative(x[i], y[i]);
      });
}

}  // namespace

Parameter& ParameterStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw Error("unknown parameter " + name);
}

const Parameter& ParameterStore::get(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const auto& p) { return p->name == name; });
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

long ParameterStore::value_count() const {
  long n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(this, size() - 1);
}

Var Tape::param(Parameter& p) {
  Node& n = nodes_.emplace_back();
  n.ref = &p.value;
  n.param = &p;
  n.requires_grad = grad_enabled && !p.frozen;
  return Var(this, size() - 1);
}

Var Tape::record(Tensor value, const std::vector<Var>& parents,
                 Backward backward) {
  if (!value.all_finite()) throw Error("non-finite value produced on tape");
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw Error("operand recorded on another tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var(this, size() - 1);
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[id];
  // Frozen parameters get a scratch buffer so their grad stays untouched.
  if (n.param && n.requires_grad) return n.param->grad;
  if (n.grad.empty() && value(id).size() > 0) {
    const Tensor& v = value(id);
    n.grad = Tensor(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw Error("backward root on another tape");
  if (value(root.id()).size() != 1) throw Error("backward root must be scalar");
  if (!requires_grad(root.id())) return;
  grad(root.id())[0] += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) {
    throw Error("matmul: shape mismatch " + x.shape_string() + " x " +
                y.shape_string());
  }
  Tensor out(x.rows(), y.cols());
  mat(out).noalias() = mat(x) * mat(y);
  return a.tape()->record(
      std::move(out), {a, b}, [a = a.id(), b = b.id()](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) {
          mat(t.grad(a)).noalias() += mat(g) * mat(t.value(b)).transpose();
        }
        if (t.requires_grad(b)) {
          mat(t.grad(b)).noalias() += mat(t.value(a)).transpose() * mat(g);
        }
      });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.cols(), x.rows());
  mat(out) = mat(x).transpose();
  return a.tape()->record(std::move(out), {a}, [a = a.id()](Tape& t, int self) {
    mat(t.grad(a)) += mat(t.grad(self)).transpose();
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = like(a.value());
  mat(out) = mat(a.value()) + mat(b.value());
  return a.tape()->record(
      std::move(out), {a, b}, [a = a.id(), b = b.id()](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) mat(t.grad(a)) += mat(g);
        if (t.requires_grad(b)) mat(t.grad(b)) += mat(g);
      });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = like(a.value());
  mat(out) = mat(a.value()) - mat(b.value());
  return a.tape()->record(
      std::move(out), {a, b}, [a = a.id(), b = b.id()](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) mat(t.grad(a)) += mat(g);
        if (t.requires_grad(b)) mat(t.grad(b)) -= mat(g);
      });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = like(a.value());
  mat(out) = mat(a.value()).cwiseProduct(mat(b.value()));
  return a.tape()->record(
      std::move(out), {a, b}, [a = a.id(), b = b.id()](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) {
          mat(t.grad(a)) += mat(g).cwiseProduct(mat(t.value(b)));
        }
        if (t.requires_grad(b)) {
          mat(t.grad(b)) += mat(g).cwiseProduct(mat(t.value(a)));
        }
      });
}

Var add_row(Var a, Var row) {
  check_same_tape(a, row);
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  if (r.size() != x.cols()) {
    throw Error("add_row: row of " + std::to_string(r.size()) +
                " values for " + std::to_string(x.cols()) + " columns");
  }
  Tensor out = like(x);
  Eigen::Map<const Eigen::RowVectorXd> rv(r.data(), r.size());
  mat(out) = mat(x).rowwise() + rv;
  return a.tape()->record(
      std::move(out), {a, row}, [a = a.id(), row = row.id()](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) mat(t.grad(a)) += mat(g);
        if (t.requires_grad(row)) {
          Tensor& gr = t.grad(row);
          Eigen::Map<Eigen::RowVectorXd> grv(gr.data(), gr.size());
          grv += mat(g).colwise().sum();
        }
      });
}

Var scale(Var a, double s) {
  Tensor out = like(a.value());
  mat(out) = mat(a.value()) * s;
  return a.tape()->record(std::move(out), {a},
                          [a = a.id(), s](Tape& t, int self) {
                            mat(t.grad(a)) += mat(t.grad(self)) * s;
                          });
}

Var sigmoid(Var a) {
  return unary_elementwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_elementwise(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var gelu(Var a) {
  static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
  static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);
  return unary_elementwise(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
               x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  Tensor y = like(x);
  for (int r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (int c = 0; c < x.cols(); ++c) z += out[c] = std::exp(in[c] - m);
    for (double& v : out) v /= z;
  }
  return a.tape()->record(std::move(y), {a}, [a = a.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a);
    for (int r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (int c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& x = a.value();
  Tensor y = like(x);
  for (int r = 0; r < x.rows(); ++r) {
    const double lse = log_sum_exp(x.row(r));
    for (int c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) - lse;
  }
  return a.tape()->record(std::move(y), {a}, [a = a.id()](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a);
    for (int r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (int c = 0; c < y.cols(); ++c) total += g(r, c);
      for (int c = 0; c < y.cols(); ++c) {
        ga(r, c) += g(r, c) - std::exp(y(r, c)) * total;
      }
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  check_same_tape(x, gamma);
  check_same_tape(x, beta);
  const Tensor& in = x.value();
  const int n = in.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw Error("layer_norm: gain/bias width mismatch");
  }
  Tensor normalized = like(in);
  std::vector<double> inv_std(in.rows());
  for (int r = 0; r < in.rows(); ++r) {
    double mu = 0.0;
    for (double v : in.row(r)) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : in.row(r)) var += (v - mu) * (v - mu);
    var /= n;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < n; ++c) normalized(r, c) = (in(r, c) - mu) * inv_std[r];
  }
  Tensor out = like(in);
  const Tensor& g = gamma.value();
  const Tensor& b = beta.value();
  for (int r = 0; r < in.rows(); ++r) {
    for (int c = 0; c < n; ++c) out(r, c) = normalized(r, c) * g[c] + b[c];
  }
  return x.tape()->record(
      std::move(out), {x, gamma, beta},
      [x = x.id(), gamma = gamma.id(), beta = beta.id(),
       normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Tape& t, int self) {
        const Tensor& gy = t.grad(self);
        const Tensor& g = t.value(gamma);
        const int rows = gy.rows();
        const int n = gy.cols();
        if (t.requires_grad(gamma) || t.requires_grad(beta)) {
          Tensor& gg = t.grad(gamma);
          Tensor& gb = t.grad(beta);
          for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < n; ++c) {
              gg[c] += gy(r, c) * normalized(r, c);
              gb[c] += gy(r, c);
            }
          }
        }
        if (t.requires_grad(x)) {
          Tensor& gx = t.grad(x);
          std::vector<double> dxhat(n);
          for (int r = 0; r < rows; ++r) {
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (int c = 0; c < n; ++c) {
              dxhat[c] = gy(r, c) * g[c];
              mean_d += dxhat[c];
              mean_dx += dxhat[c] * normalized(r, c);
            }
            mean_d /= n;
            mean_dx /= n;
            for (int c = 0; c < n; ++c) {
              gx(r, c) +=
                  inv_std[r] * (dxhat[c] - mean_d - normalized(r, c) * mean_dx);
            }
          }
        }
      });
}

Var gather_rows(Var table, const std::vector<int>& rows) {
  const Tensor& src = table.value();
  Tensor out(static_cast<int>(rows.size()), src.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= src.rows()) {
      throw Error("gather_rows: index " + std::to_string(rows[i]) +
                  " out of range for " + std::to_string(src.rows()) + " rows");
    }
    std::copy_n(src.row(rows[i]).data(), src.cols(),
                out.row(static_cast<int>(i)).data());
  }
  return table.tape()->record(
      std::move(out), {table}, [table = table.id(), rows](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& gt = t.grad(table);
        for (size_t i = 0; i < rows.size(); ++i) {
          auto dst = gt.row(rows[i]);
          auto in = g.row(static_cast<int>(i));
          for (size_t c = 0; c < dst.size(); ++c) dst[c] += in[c];
        }
      });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols of nothing");
  const int rows = parts.front().rows();
  int cols = 0;
  std::vector<int> offsets;
  for (const Var& p : parts) {
    check_same_tape(parts.front(), p);
    if (p.rows() != rows) throw Error("concat_cols: row count mismatch");
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor out(rows, cols);
  for (size_t k = 0; k < parts.size(); ++k) {
    mat(out).middleCols(offsets[k], parts[k].cols()) = mat(parts[k].value());
  }
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts.front().tape()->record(
      std::move(out), parts, [ids, offsets](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& gp = t.grad(ids[k]);
          mat(gp) += mat(g).middleCols(offsets[k], gp.cols());
        }
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_rows of nothing");
  const int cols = parts.front().cols();
  int rows = 0;
  std::vector<int> offsets;
  for (const Var& p : parts) {
    check_same_tape(parts.front(), p);
    if (p.cols() != cols) throw Error("concat_rows: column count mismatch");
    offsets.push_back(rows);
    rows += p.rows();
  }
  Tensor out(rows, cols);
  for (size_t k = 0; k < parts.size(); ++k) {
    mat(out).middleRows(offsets[k], parts[k].rows()) = mat(parts[k].value());
  }
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts.front().tape()->record(
      std::move(out), parts, [ids, offsets](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& gp = t.grad(ids[k]);
          mat(gp) += mat(g).middleRows(offsets[k], gp.rows());
        }
      });
}

Var slice_cols(Var a, int start, int count) {
  const Tensor& x = a.value();
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw Error("slice_cols out of range");
  }
  Tensor out(x.rows(), count);
  mat(out) = mat(x).middleCols(start, count);
  return a.tape()->record(std::move(out), {a},
                          [a = a.id(), start, count](Tape& t, int self) {
                            mat(t.grad(a)).middleCols(start, count) +=
                                mat(t.grad(self));
                          });
}

Var slice_rows(Var a, int start, int count) {
  const Tensor& x = a.value();
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw Error("slice_rows out of range");
  }
  Tensor out(count, x.cols());
  mat(out) = mat(x).middleRows(start, count);
  return a.tape()->record(std::move(out), {a},
                          [a = a.id(), start, count](Tape& t, int self) {
                            mat(t.grad(a)).middleRows(start, count) +=
                                mat(t.grad(self));
                          });
}

Var dropout(Var a, double p) {
  Tape* tape = a.tape();
  if (!tape->training || p <= 0.0) return a;
  if (p >= 1.0) throw Error("dropout probability must be below 1");
  if (!tape->rng) throw Error("dropout in training mode needs an rng");
  std::bernoulli_distribution keep(1.0 - p);
  const Tensor& x = a.value();
  Tensor mask = like(x);
  for (int i = 0; i < mask.size(); ++i) {
    mask[i] = keep(*tape->rng) ? 1.0 / (1.0 - p) : 0.0;
  }
  Tensor out = like(x);
  mat(out) = mat(x).cwiseProduct(mat(mask));
  return tape->record(std::move(out), {a},
                      [a = a.id(), mask = std::move(mask)](Tape& t, int self) {
                        mat(t.grad(a)) += mat(t.grad(self)).cwiseProduct(mat(mask));
                      });
}

Var sum(Var a) {
  Tensor out(1, 1, mat(a.value()).sum());
  return a.tape()->record(std::move(out), {a}, [a = a.id()](Tape& t, int self) {
    mat(t.grad(a)).array() += t.grad(self)[0];
  });
}

Var mean(Var a) {
  const int n = a.value().size();
  if (n == 0) throw Error("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var average(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("average of nothing");
  Var total = parts.front();
  for (size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  return parts.size() == 1 ? total : scale(total, 1.0 / parts.size());
}

Var cross_entropy(Var logits, const std::vector<int>& targets) {
  const Tensor& x = logits.value();
  if (static_cast<int>(targets.size()) != x.rows()) {
    throw Error("cross_entropy: one target per row required");
  }
  Tensor probs = like(x);
  double loss = 0.0;
  for (int r = 0; r < x.rows(); ++r) {
    if (targets[r] < 0 || targets[r] >= x.cols()) {
      throw Error("cross_entropy: target out of range");
    }
    const double lse = log_sum_exp(x.row(r));
    for (int c = 0; c < x.cols(); ++c) probs(r, c) = std::exp(x(r, c) - lse);
    loss += lse - x(r, targets[r]);
  }
  return logits.tape()->record(
      Tensor(1, 1, loss), {logits},
      [logits = logits.id(), targets, probs = std::move(probs)](Tape& t,
                                                                int self) {
        const double g = t.grad(self)[0];
        Tensor& gl = t.grad(logits);
        for (int r = 0; r < probs.rows(); ++r) {
          for (int c = 0; c < probs.cols(); ++c) {
            gl(r, c) += g * (probs(r, c) - (c == targets[r] ? 1.0 : 0.0));
          }
        }
      });
}

double grad_check(const std::function<Var(Tape&)>& loss,
                  const std::vector<Parameter*>& params, double epsilon) {
  if (epsilon <= 0.0) throw Error("grad_check epsilon must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = loss(tape);
    if (!std::isfinite(out.value()[0])) throw Error("loss is not finite");
    tape.backward(out);
  }
  auto evaluate = [&] {
    Tape tape;
    const double v = loss(tape).value()[0];
    if (!std::isfinite(v)) throw Error("loss is not finite");
    return v;
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    for (int i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + epsilon;
      const double up = evaluate();
      p->value[i] = saved - epsilon;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p->grad[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace docner
