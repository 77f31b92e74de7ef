#ifndef DOCNER_MODEL_H_
#define DOCNER_MODEL_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "docner/context.h"
#include "docner/corpus.h"
#include "docner/encoder.h"
#include "docner/tagger.h"
#include "docner/tokenizer.h"

#include <json.hpp>

namespace docner {

enum class TrainingMode { kFineTune, kFeatureBased };
enum class HeadType { kLinear, kCrf };

std::string_view mode_name(TrainingMode m);
TrainingMode parse_mode(std::string_view name);
std::string_view head_name(HeadType h);
HeadType parse_head(std::string_view name);

struct ModelConfig {
  TrainingMode mode = TrainingMode::kFineTune;
  HeadType head = HeadType::kLinear;
  LayerStrategy layer_strategy = LayerStrategy::kLastLayer;
  bool use_word_embeddings = false;
  int word_embedding_dim = 32;
  // BiLSTM hidden size per direction; feature-based mode only.
  int lstm_hidden = 256;
  bool constrain_transitions = false;
  TransformerConfig transformer;
  ContextConfig context;

  // Mode-specific defaults: fine-tuning pools the last layer with a linear
  // head, the feature-based path averages all layers into a BiLSTM-CRF.
  static ModelConfig defaults(TrainingMode mode);
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j,
                                   ModelConfig base = {});

// Transformer encoder, optional static word embeddings, optional BiLSTM and a
// linear or CRF head, trained on BIOES labels.
class SequenceTagger {
 public:
  SequenceTagger(const ModelConfig& config, SubwordVocab vocab,
                 std::vector<std::string> labels,
                 std::vector<std::string> word_vocab, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const SubwordVocab& vocab() const { return vocab_; }
  const std::vector<std::string>& labels() const { return labels_; }
  int label_id(const std::string& tag) const;
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const TransformerEncoder& encoder() const { return *encoder_; }
  const StaticEmbeddingTable& word_embeddings() const { return words_; }

  // Transformer and static-embedding parameters, i.e. everything that the
  // feature-based regime keeps frozen.
  std::vector<Parameter*> feature_parameters();
  // Everything downstream of the token features.
  std::vector<Parameter*> head_parameters();
  void freeze_features(bool frozen);

  // Core-token representations: encoder over the assembled input, layer
  // pooling, first-subword selection, then +WE concatenation.
  Var token_features(Tape& tape, const ContextualizedSentence& ctx,
                     const std::vector<std::string>& tokens) const;
  Tensor token_features(const ContextualizedSentence& ctx,
                        const std::vector<std::string>& tokens) const;

  Var emissions(Tape& tape, Var features) const;
  // Sum of per-token cross entropy (linear head) or CRF negative
  // log-likelihood.
  Var loss(Tape& tape, Var features, const std::vector<int>& gold) const;
  std::vector<int> decode(const Tensor& emissions) const;

  std::vector<int> predict_from_features(const Tensor& features) const;
  std::vector<int> predict(const ContextualizedSentence& ctx,
                           const std::vector<std::string>& tokens) const;

  // Self-describing JSON checkpoint; see docs/checkpoint.md.
  nlohmann::json to_json() const;
  static std::unique_ptr<SequenceTagger> from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static std::unique_ptr<SequenceTagger> load(const std::string& path);

 private:
  Var transitions(Tape& tape) const;

  ModelConfig config_;
  SubwordVocab vocab_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> label_ids_;
  ParameterStore store_;
  std::unique_ptr<TransformerEncoder> encoder_;
  StaticEmbeddingTable words_;
  std::optional<BiLstmParams> bilstm_;
  Parameter* head_weight_ = nullptr;
  Parameter* head_bias_ = nullptr;
  Parameter* transitions_ = nullptr;
  Tensor transition_mask_;
};

// Distinct token texts of the given corpora, sorted; used as the +WE vocab.
std::vector<std::string> word_vocabulary(const std::vector<const Corpus*>& corpora);

// FNV-1a over the raw bytes of the given parameters' values.
uint64_t parameter_checksum(const std::vector<const Parameter*>& params);

// Tags every sentence; predictions are written in the corpus' own scheme.
Corpus tag_corpus(const SequenceTagger& model, const Corpus& corpus,
                  const ContextConfig& context);

}  // namespace docner

#endif  // DOCNER_MODEL_H_
