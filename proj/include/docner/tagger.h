#ifndef DOCNER_TAGGER_H_
#define DOCNER_TAGGER_H_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "docner/autodiff.h"

namespace docner {

// Affine map from token representations [tokens x in] to emissions
// [tokens x labels].
Var linear_head(Var token_reps, Var weight, Var bias);
Tensor linear_head(const Tensor& token_reps, const Tensor& weight,
                   const Tensor& bias);

// Per-token argmax, lowest label index on ties.
std::vector<int> greedy_decode(const Tensor& emissions);

// Linear-chain CRF over `labels` tags. Transitions are stored as a
// (labels + 2) x (labels + 2) matrix, entry (from, to); index `labels` is the
// virtual START state and `labels + 1` the virtual STOP state.
struct CrfParams {
  Tensor transitions;

  explicit CrfParams(int labels) : transitions(labels + 2, labels + 2) {}
  explicit CrfParams(Tensor t) : transitions(std::move(t)) {}

  int labels() const { return transitions.rows() - 2; }
  int start() const { return labels(); }
  int stop() const { return labels() + 1; }
};

// Score of one label path: emissions plus transitions, including
// START -> first and last -> STOP.
double crf_path_score(const Tensor& emissions, const Tensor& transitions,
                      const std::vector<int>& path);
// Log partition function by the forward algorithm.
double crf_log_partition(const Tensor& emissions, const Tensor& transitions);
// log Z - score(gold), differentiable in emissions and transitions.
Var crf_nll(Var emissions, Var transitions, const std::vector<int>& gold);
double crf_nll(const Tensor& emissions, const CrfParams& crf,
               const std::vector<int>& gold);

struct ViterbiResult {
  std::vector<int> path;
  double score = 0.0;
};
// Highest-scoring path; ties resolve to the lowest label index.
ViterbiResult viterbi(const Tensor& emissions, const Tensor& transitions);
inline ViterbiResult viterbi(const Tensor& emissions, const CrfParams& crf) {
  return viterbi(emissions, crf.transitions);
}

// -1e4 penalties on transitions that no well-formed BIOES sequence uses,
// zero elsewhere. `labels` is the BIOES label inventory.
Tensor bioes_transition_mask(const std::vector<std::string>& labels);

// One direction of an LSTM. Gate blocks in the fused weights are ordered
// input, forget, cell, output.
struct LstmDirection {
  Parameter* input_weight;   // [in x 4H]
  Parameter* hidden_weight;  // [H x 4H]
  Parameter* bias;           // [1 x 4H]
};

struct BiLstmParams {
  int input_dim = 0;
  int hidden_size = 256;
  LstmDirection forward;
  LstmDirection backward;

  int output_dim() const { return 2 * hidden_size; }
  static BiLstmParams create(int input_dim, int hidden_size,
                             ParameterStore& store, std::mt19937_64& rng,
                             const std::string& prefix = "bilstm");
};

// Runs both directions from zero states and concatenates per token:
// [tokens x 2H], forward half first.
Var bilstm_forward(Var features, const BiLstmParams& params);
Tensor bilstm_forward(const Tensor& features, const BiLstmParams& params);

}  // namespace docner

#endif  // DOCNER_TAGGER_H_
