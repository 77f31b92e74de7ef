#include "docner/tagger.h"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "docner/encoder.h"
#include "docner/error.h"

namespace docner {

namespace {

void check_crf_shapes(const Tensor& emissions, const Tensor& transitions) {
  const int labels = emissions.cols();
  if (transitions.rows() != labels + 2 || transitions.cols() != labels + 2) {
    throw Error("CRF transitions " + transitions.shape_string() +
                " do not match " + std::to_string(labels) + " labels");
  }
  if (emissions.rows() == 0) throw Error("CRF over an empty sequence");
}

// Forward (alpha) and backward (beta) log-space tables, [tokens x labels].
struct ForwardBackward {
  Tensor alpha;
  Tensor beta;
  double log_z = 0.0;
};

ForwardBackward forward_backward(const Tensor& e, const Tensor& trans,
                                 bool with_beta) {
  const int n = e.rows();
  const int k = e.cols();
  const int start = k;
  const int stop = k + 1;
  ForwardBackward fb{Tensor(n, k), Tensor(), 0.0};
  std::vector<double> scratch(k);
  for (int j = 0; j < k; ++j) fb.alpha(0, j) = trans(start, j) + e(0, j);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) scratch[i] = fb.alpha(t - 1, i) + trans(i, j);
      fb.alpha(t, j) = log_sum_exp(scratch) + e(t, j);
    }
  }
  for (int j = 0; j < k; ++j) scratch[j] = fb.alpha(n - 1, j) + trans(j, stop);
  fb.log_z = log_sum_exp(scratch);
  if (!with_beta) return fb;

  fb.beta = Tensor(n, k);
  for (int i = 0; i < k; ++i) fb.beta(n - 1, i) = trans(i, stop);
  for (int t = n - 2; t >= 0; --t) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        scratch[j] = trans(i, j) + e(t + 1, j) + fb.beta(t + 1, j);
      }
      fb.beta(t, i) = log_sum_exp(scratch);
    }
  }
  return fb;
}

void check_gold(const std::vector<int>& gold, int tokens, int labels) {
  if (static_cast<int>(gold.size()) != tokens) {
    throw Error("gold path length " + std::to_string(gold.size()) +
                " does not match " + std::to_string(tokens) + " tokens");
  }
  for (int y : gold) {
    if (y < 0 || y >= labels) {
      throw Error("gold label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

Var linear_head(Var token_reps, Var weight, Var bias) {
  if (token_reps.cols() != weight.rows()) {
    throw Error("linear head expects width " + std::to_string(weight.rows()) +
                ", got " + std::to_string(token_reps.cols()));
  }
  return add_row(matmul(token_reps, weight), bias);
}

Tensor linear_head(const Tensor& token_reps, const Tensor& weight,
                   const Tensor& bias) {
  Tape tape;
  return linear_head(tape.constant(token_reps), tape.constant(weight),
                     tape.constant(bias))
      .value();
}

std::vector<int> greedy_decode(const Tensor& emissions) {
  std::vector<int> out;
  out.reserve(emissions.rows());
  for (int t = 0; t < emissions.rows(); ++t) {
    int best = 0;
    for (int j = 1; j < emissions.cols(); ++j) {
      if (emissions(t, j) > emissions(t, best)) best = j;
    }
    out.push_back(best);
  }
  return out;
}

double crf_path_score(const Tensor& emissions, const Tensor& transitions,
                      const std::vector<int>& path) {
  check_crf_shapes(emissions, transitions);
  check_gold(path, emissions.rows(), emissions.cols());
  const int start = emissions.cols();
  const int stop = start + 1;
  double score = transitions(start, path[0]);
  for (size_t t = 0; t < path.size(); ++t) {
    score += emissions(static_cast<int>(t), path[t]);
    if (t > 0) score += transitions(path[t - 1], path[t]);
  }
  return score + transitions(path.back(), stop);
}

double crf_log_partition(const Tensor& emissions, const Tensor& transitions) {
  check_crf_shapes(emissions, transitions);
  return forward_backward(emissions, transitions, false).log_z;
}

Var crf_nll(Var emissions, Var transitions, const std::vector<int>& gold) {
  const Tensor& e = emissions.value();
  const Tensor& trans = transitions.value();
  check_crf_shapes(e, trans);
  check_gold(gold, e.rows(), e.cols());
  ForwardBackward fb = forward_backward(e, trans, true);
  const double loss = fb.log_z - crf_path_score(e, trans, gold);

  return emissions.tape()->record(
      Tensor(1, 1, loss), {emissions, transitions},
      [emissions = emissions.id(), transitions = transitions.id(), gold,
       fb = std::move(fb)](Tape& t, int self) {
        const double g = t.grad(self)[0];
        const Tensor& e = t.value(emissions);
        const Tensor& trans = t.value(transitions);
        const int n = e.rows();
        const int k = e.cols();
        const int start = k;
        const int stop = k + 1;
        if (t.requires_grad(emissions)) {
          Tensor& ge = t.grad(emissions);
          for (int s = 0; s < n; ++s) {
            for (int j = 0; j < k; ++j) {
              const double p = std::exp(fb.alpha(s, j) + fb.beta(s, j) - fb.log_z);
              ge(s, j) += g * (p - (gold[s] == j ? 1.0 : 0.0));
            }
          }
        }
        if (t.requires_grad(transitions)) {
          Tensor& gt = t.grad(transitions);
          for (int j = 0; j < k; ++j) {
            gt(start, j) +=
                g * std::exp(fb.alpha(0, j) + fb.beta(0, j) - fb.log_z);
            gt(j, stop) += g * std::exp(fb.alpha(n - 1, j) +
                                        fb.beta(n - 1, j) - fb.log_z);
          }
          for (int s = 1; s < n; ++s) {
            for (int i = 0; i < k; ++i) {
              for (int j = 0; j < k; ++j) {
                gt(i, j) += g * std::exp(fb.alpha(s - 1, i) + trans(i, j) +
                                         e(s, j) + fb.beta(s, j) - fb.log_z);
              }
            }
          }
          gt(start, gold[0]) -= g;
          gt(gold.back(), stop) -= g;
          for (int s = 1; s < n; ++s) gt(gold[s - 1], gold[s]) -= g;
        }
      });
}

double crf_nll(const Tensor& emissions, const CrfParams& crf,
               const std::vector<int>& gold) {
  Tape tape;
  return crf_nll(tape.constant(emissions), tape.constant(crf.transitions), gold)
      .value()[0];
}

ViterbiResult viterbi(const Tensor& emissions, const Tensor& transitions) {
  check_crf_shapes(emissions, transitions);
  const Tensor& e = emissions;
  const Tensor& trans = transitions;
  const int n = e.rows();
  const int k = e.cols();
  const int start = k;
  const int stop = k + 1;

  std::vector<double> score(k);
  std::vector<double> next(k);
  std::vector<int> backpointer(static_cast<size_t>(n) * k, 0);
  for (int j = 0; j < k; ++j) score[j] = trans(start, j) + e(0, j);
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < k; ++j) {
      int best = 0;
      double best_score = score[0] + trans(0, j);
      for (int i = 1; i < k; ++i) {
        const double s = score[i] + trans(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      next[j] = best_score + e(t, j);
      backpointer[static_cast<size_t>(t) * k + j] = best;
    }
    std::swap(score, next);
  }
  int last = 0;
  double best_score = score[0] + trans(0, stop);
  for (int j = 1; j < k; ++j) {
    const double s = score[j] + trans(j, stop);
    if (s > best_score) {
      best_score = s;
      last = j;
    }
  }
  ViterbiResult result;
  result.score = best_score;
  result.path.assign(n, 0);
  result.path[n - 1] = last;
  for (int t = n - 1; t > 0; --t) {
    result.path[t - 1] = backpointer[static_cast<size_t>(t) * k + result.path[t]];
  }
  return result;
}

Tensor bioes_transition_mask(const std::vector<std::string>& labels) {
  constexpr double kPenalty = -1e4;
  const int k = static_cast<int>(labels.size());
  Tensor mask(k + 2, k + 2);
  auto prefix = [&](int i) { return labels[i] == "O" ? 'O' : labels[i][0]; };
  auto type = [&](int i) {
    return labels[i].size() > 2 ? labels[i].substr(2) : std::string();
  };
  for (int i = 0; i < k + 2; ++i) {
    for (int j = 0; j < k + 2; ++j) {
      bool ok;
      if (j == k || i == k + 1) {
        ok = false;  // into START or out of STOP
      } else if (i == k) {
        ok = j == k + 1 || prefix(j) == 'O' || prefix(j) == 'B' ||
             prefix(j) == 'S';
      } else {
        const char from = prefix(i);
        const bool open = from == 'B' || from == 'I';
        if (j == k + 1) {
          ok = !open;
        } else if (open) {
          ok = (prefix(j) == 'I' || prefix(j) == 'E') && type(i) == type(j);
        } else {
          ok = prefix(j) == 'O' || prefix(j) == 'B' || prefix(j) == 'S';
        }
      }
      mask(i, j) = ok ? 0.0 : kPenalty;
    }
  }
  return mask;
}

BiLstmParams BiLstmParams::create(int input_dim, int hidden_size,
                                  ParameterStore& store, std::mt19937_64& rng,
                                  const std::string& prefix) {
  if (input_dim <= 0 || hidden_size <= 0) throw Error("invalid BiLSTM sizes");
  BiLstmParams p;
  p.input_dim = input_dim;
  p.hidden_size = hidden_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  auto direction = [&](const std::string& name) {
    LstmDirection d;
    d.input_weight = &store.add(prefix + "." + name + ".input_weight",
                                random_normal(input_dim, 4 * hidden_size,
                                              1.0 / std::sqrt(input_dim), rng));
    d.hidden_weight =
        &store.add(prefix + "." + name + ".hidden_weight",
                   random_normal(hidden_size, 4 * hidden_size, scale, rng));
    Tensor bias(1, 4 * hidden_size);
    for (int c = hidden_size; c < 2 * hidden_size; ++c) bias[c] = 1.0;
    d.bias = &store.add(prefix + "." + name + ".bias", std::move(bias));
    return d;
  };
  p.forward = direction("forward");
  p.backward = direction("backward");
  return p;
}

namespace {

std::vector<Var> run_direction(Var features, const LstmDirection& dir,
                               int hidden, bool reverse) {
  Tape& tape = *features.tape();
  const int n = features.rows();
  Var projected = add_row(matmul(features, tape.param(*dir.input_weight)),
                          tape.param(*dir.bias));
  Var hidden_weight = tape.param(*dir.hidden_weight);
  Var h = tape.constant(Tensor(1, hidden));
  Var c = tape.constant(Tensor(1, hidden));
  std::vector<Var> outputs(n);
  for (int s = 0; s < n; ++s) {
    const int t = reverse ? n - 1 - s : s;
    Var gates = add(slice_rows(projected, t, 1), matmul(h, hidden_weight));
    Var in = sigmoid(slice_cols(gates, 0, hidden));
    Var forget = sigmoid(slice_cols(gates, hidden, hidden));
    Var cell = tanh(slice_cols(gates, 2 * hidden, hidden));
    Var out = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    c = add(mul(forget, c), mul(in, cell));
    h = mul(out, tanh(c));
    outputs[t] = h;
  }
  return outputs;
}

}  // namespace

Var bilstm_forward(Var features, const BiLstmParams& params) {
  if (features.rows() == 0) throw Error("BiLSTM over an empty sequence");
  if (features.cols() != params.input_dim) {
    throw Error("BiLSTM expects width " + std::to_string(params.input_dim) +
                ", got " + std::to_string(features.cols()));
  }
  auto fwd = run_direction(features, params.forward, params.hidden_size, false);
  auto bwd = run_direction(features, params.backward, params.hidden_size, true);
  return concat_cols({concat_rows(fwd), concat_rows(bwd)});
}

Tensor bilstm_forward(const Tensor& features, const BiLstmParams& params) {
  Tape tape;
  tape.grad_enabled = false;
  return bilstm_forward(tape.constant(features), params).value();
}

}  // namespace docner
