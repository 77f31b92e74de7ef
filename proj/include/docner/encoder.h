#ifndef DOCNER_ENCODER_H_
#define DOCNER_ENCODER_H_

#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "docner/autodiff.h"
#include "docner/context.h"

namespace docner {

struct TransformerConfig {
  int layers = 4;
  int heads = 4;
  int model_dim = 128;
  int ff_dim = 512;
  int max_positions = 512;
  int vocab_size = 0;
  double dropout = 0.0;

  void validate() const;
};

// Hidden states of every layer: hidden[0] is the embedding layer output,
// hidden[l] the output of transformer layer l.
struct EncoderOutput {
  std::vector<Tensor> hidden;
};

enum class LayerStrategy { kLastLayer, kAllLayerMean, kLastFourConcat };

std::string_view layer_strategy_name(LayerStrategy s);
LayerStrategy parse_layer_strategy(std::string_view name);
// Width of the pooled representation for a given model dimension.
int pooled_width(LayerStrategy s, int model_dim);

// Pre-norm transformer encoder with learned absolute position embeddings.
// Parameters live in the ParameterStore passed at construction, under names
// prefixed with `prefix`.
class TransformerEncoder {
 public:
  TransformerEncoder(const TransformerConfig& config, ParameterStore& store,
                     std::mt19937_64& rng, const std::string& prefix = "encoder");

  const TransformerConfig& config() const { return config_; }

  // All layer outputs for one input sequence.
  std::vector<Var> forward(Tape& tape, const std::vector<int>& ids) const;
  // Gradient-free forward pass over the assembled input.
  EncoderOutput encode(const ContextualizedSentence& input) const;

  std::vector<Parameter*> parameters() const { return params_; }
  void set_frozen(bool frozen);

 private:
  struct Layer {
    Parameter *ln1_gain, *ln1_bias, *qkv_weight, *qv_bias, *out_weight,
        *out_bias, *ln2_gain, *ln2_bias, *ff1_weight, *ff1_bias, *ff2_weight,
        *ff2_bias;
  };

  TransformerConfig config_;
  Parameter* token_embedding_;
  Parameter* position_embedding_;
  std::vector<Layer> layers_;
  std::vector<Parameter*> params_;
};

Var pool_layers(const std::vector<Var>& hidden, LayerStrategy strategy);
Tensor pool_layers(const EncoderOutput& out, LayerStrategy strategy);

// One row per core token: rows of the pooled assembled input at the core's
// first-subtoken positions.
Var extract_core_tokens(Var pooled, const ContextualizedSentence& ctx);
Tensor extract_core_tokens(const Tensor& pooled,
                           const ContextualizedSentence& ctx);

// Static word vectors appended to token representations (+WE). Row `size()`
// of the table is the out-of-vocabulary vector.
class StaticEmbeddingTable {
 public:
  // Zero-width table: concatenation is the identity.
  StaticEmbeddingTable() = default;
  StaticEmbeddingTable(std::vector<std::string> words, int dim,
                       ParameterStore& store, std::mt19937_64& rng,
                       const std::string& name = "word_embeddings");

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  Parameter* table() const { return table_; }

  // Exact match, then lowercase match, then the OOV row.
  int row_of(const std::string& token) const;
  Tensor lookup(const std::string& token) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  int dim_ = 0;
  Parameter* table_ = nullptr;
};

Var concat_word_embeddings(Var token_reps, const std::vector<std::string>& tokens,
                           const StaticEmbeddingTable& table);
Tensor concat_word_embeddings(const Tensor& token_reps,
                              const std::vector<std::string>& tokens,
                              const StaticEmbeddingTable& table);

// Fills a tensor with N(0, stddev) draws.
Tensor random_normal(int rows, int cols, double stddev, std::mt19937_64& rng);

}  // namespace docner

#endif  // DOCNER_ENCODER_H_
