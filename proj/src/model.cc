#include "docner/model.h"

#include <cstring>
#include <fstream>
#include <set>

#include "docner/error.h"

namespace docner {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFormat = "docner-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

std::string_view mode_name(TrainingMode m) {
  return m == TrainingMode::kFineTune ? "finetune" : "feature";
}

TrainingMode parse_mode(std::string_view name) {
  if (name == "finetune") return TrainingMode::kFineTune;
  if (name == "feature") return TrainingMode::kFeatureBased;
  throw Error("unknown mode: " + std::string(name));
}

std::string_view head_name(HeadType h) {
  return h == HeadType::kLinear ? "linear" : "crf";
}

HeadType parse_head(std::string_view name) {
  if (name == "linear") return HeadType::kLinear;
  if (name == "crf") return HeadType::kCrf;
  throw Error("unknown head: " + std::string(name));
}

ModelConfig ModelConfig::defaults(TrainingMode mode) {
  ModelConfig c;
  c.mode = mode;
  if (mode == TrainingMode::kFeatureBased) {
    c.head = HeadType::kCrf;
    c.layer_strategy = LayerStrategy::kAllLayerMean;
  }
  return c;
}

json to_json(const ModelConfig& c) {
  return json{
      {"mode", mode_name(c.mode)},
      {"head", head_name(c.head)},
      {"layer_strategy", layer_strategy_name(c.layer_strategy)},
      {"use_word_embeddings", c.use_word_embeddings},
      {"word_embedding_dim", c.word_embedding_dim},
      {"lstm_hidden", c.lstm_hidden},
      {"constrain_transitions", c.constrain_transitions},
      {"transformer",
       {{"layers", c.transformer.layers},
        {"heads", c.transformer.heads},
        {"model_dim", c.transformer.model_dim},
        {"ff_dim", c.transformer.ff_dim},
        {"max_positions", c.transformer.max_positions},
        {"vocab_size", c.transformer.vocab_size},
        {"dropout", c.transformer.dropout}}},
      {"context_window", c.context.window},
      {"enforce_boundaries", c.context.enforce_boundaries},
  };
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  if (j.contains("mode")) {
    c = ModelConfig::defaults(parse_mode(j.at("mode").get<std::string>()));
  }
  if (j.contains("head")) c.head = parse_head(j.at("head").get<std::string>());
  if (j.contains("layer_strategy")) {
    c.layer_strategy =
        parse_layer_strategy(j.at("layer_strategy").get<std::string>());
  }
  c.use_word_embeddings = j.value("use_word_embeddings", c.use_word_embeddings);
  c.word_embedding_dim = j.value("word_embedding_dim", c.word_embedding_dim);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.constrain_transitions =
      j.value("constrain_transitions", c.constrain_transitions);
  if (j.contains("transformer")) {
    const json& t = j.at("transformer");
    c.transformer.layers = t.value("layers", c.transformer.layers);
    c.transformer.heads = t.value("heads", c.transformer.heads);
    c.transformer.model_dim = t.value("model_dim", c.transformer.model_dim);
    c.transformer.ff_dim = t.value("ff_dim", c.transformer.ff_dim);
    c.transformer.max_positions =
        t.value("max_positions", c.transformer.max_positions);
    c.transformer.vocab_size = t.value("vocab_size", c.transformer.vocab_size);
    c.transformer.dropout = t.value("dropout", c.transformer.dropout);
  }
  c.context.window = j.value("context_window", c.context.window);
  c.context.enforce_boundaries =
      j.value("enforce_boundaries", c.context.enforce_boundaries);
  return c;
}

SequenceTagger::SequenceTagger(const ModelConfig& config, SubwordVocab vocab,
                               std::vector<std::string> labels,
                               std::vector<std::string> word_vocab,
                               uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), labels_(std::move(labels)) {
  if (labels_.empty()) throw Error("a tagger needs at least one label");
  for (size_t i = 0; i < labels_.size(); ++i) {
    label_ids_.emplace(labels_[i], static_cast<int>(i));
  }
  config_.transformer.vocab_size = vocab_.size();
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<TransformerEncoder>(config_.transformer, store_, rng);
  if (config_.use_word_embeddings) {
    words_ = StaticEmbeddingTable(std::move(word_vocab),
                                  config_.word_embedding_dim, store_, rng);
  }
  int width = pooled_width(config_.layer_strategy, config_.transformer.model_dim) +
              words_.dim();
  if (config_.mode == TrainingMode::kFeatureBased) {
    bilstm_ = BiLstmParams::create(width, config_.lstm_hidden, store_, rng);
    width = bilstm_->output_dim();
  }
  const int k = static_cast<int>(labels_.size());
  head_weight_ = &store_.add("head.weight",
                             random_normal(width, k, 1.0 / std::sqrt(width), rng));
  head_bias_ = &store_.add("head.bias", Tensor(1, k));
  if (config_.head == HeadType::kCrf) {
    transitions_ = &store_.add("crf.transitions", Tensor(k + 2, k + 2));
    transition_mask_ = config_.constrain_transitions
                           ? bioes_transition_mask(labels_)
                           : Tensor(k + 2, k + 2);
  }
  if (config_.mode == TrainingMode::kFeatureBased) freeze_features(true);
}

int SequenceTagger::label_id(const std::string& tag) const {
  auto it = label_ids_.find(tag);
  if (it == label_ids_.end()) throw Error("label " + tag + " unknown to the model");
  return it->second;
}

std::vector<Parameter*> SequenceTagger::feature_parameters() {
  std::vector<Parameter*> out = encoder_->parameters();
  if (words_.table()) out.push_back(words_.table());
  return out;
}

std::vector<Parameter*> SequenceTagger::head_parameters() {
  auto features = feature_parameters();
  std::set<Parameter*> excluded(features.begin(), features.end());
  std::vector<Parameter*> out;
  for (Parameter* p : store_.all()) {
    if (!excluded.count(p)) out.push_back(p);
  }
  return out;
}

void SequenceTagger::freeze_features(bool frozen) {
  for (Parameter* p : feature_parameters()) p->frozen = frozen;
}

Var SequenceTagger::token_features(Tape& tape, const ContextualizedSentence& ctx,
                                   const std::vector<std::string>& tokens) const {
  if (static_cast<int>(tokens.size()) != ctx.core.token_count()) {
    throw Error("token list does not match the encoded sentence");
  }
  auto hidden = encoder_->forward(tape, ctx.assembled());
  Var pooled = pool_layers(hidden, config_.layer_strategy);
  Var core = extract_core_tokens(pooled, ctx);
  return concat_word_embeddings(core, tokens, words_);
}

Tensor SequenceTagger::token_features(const ContextualizedSentence& ctx,
                                      const std::vector<std::string>& tokens) const {
  Tape tape;
  tape.grad_enabled = false;
  return token_features(tape, ctx, tokens).value();
}

Var SequenceTagger::transitions(Tape& tape) const {
  Var t = tape.param(*transitions_);
  return config_.constrain_transitions
             ? add(t, tape.constant(transition_mask_))
             : t;
}

Var SequenceTagger::emissions(Tape& tape, Var features) const {
  Var reps = features;
  if (bilstm_) reps = bilstm_forward(reps, *bilstm_);
  return linear_head(reps, tape.param(*head_weight_), tape.param(*head_bias_));
}

Var SequenceTagger::loss(Tape& tape, Var features,
                         const std::vector<int>& gold) const {
  Var e = emissions(tape, features);
  if (config_.head == HeadType::kCrf) return crf_nll(e, transitions(tape), gold);
  return cross_entropy(e, gold);
}

std::vector<int> SequenceTagger::decode(const Tensor& emissions) const {
  if (config_.head == HeadType::kLinear) return greedy_decode(emissions);
  Tensor trans = transitions_->value;
  if (config_.constrain_transitions) {
    for (int i = 0; i < trans.size(); ++i) trans[i] += transition_mask_[i];
  }
  return viterbi(emissions, trans).path;
}

std::vector<int> SequenceTagger::predict_from_features(const Tensor& features) const {
  Tape tape;
  tape.grad_enabled = false;
  return decode(emissions(tape, tape.constant(features)).value());
}

std::vector<int> SequenceTagger::predict(
    const ContextualizedSentence& ctx,
    const std::vector<std::string>& tokens) const {
  Tape tape;
  tape.grad_enabled = false;
  return decode(emissions(tape, token_features(tape, ctx, tokens)).value());
}

json SequenceTagger::to_json() const {
  json params = json::array();
  for (const Parameter* p : store_.all()) {
    params.push_back({{"name", p->name},
                      {"shape", p->value.shape()},
                      {"values", p->value.values()}});
  }
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"config", docner::to_json(config_)},
              {"labels", labels_},
              {"vocab", vocab_.serialize()},
              {"word_vocab", words_.words()},
              {"parameters", std::move(params)}};
}

std::unique_ptr<SequenceTagger> SequenceTagger::from_json(const json& j) {
  if (j.value("format", "") != kCheckpointFormat) {
    throw Error("not a docner checkpoint");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " +
                std::to_string(j.value("version", 0)));
  }
  ModelConfig config = model_config_from_json(j.at("config"));
  auto vocab = SubwordVocab::deserialize(j.at("vocab").get<std::string>());
  if (vocab.size() != config.transformer.vocab_size) {
    throw Error("checkpoint vocab has " + std::to_string(vocab.size()) +
                " symbols but the encoder expects " +
                std::to_string(config.transformer.vocab_size));
  }
  auto model = std::make_unique<SequenceTagger>(
      config, std::move(vocab), j.at("labels").get<std::vector<std::string>>(),
      j.at("word_vocab").get<std::vector<std::string>>(), 0);
  size_t seen = 0;
  for (const json& p : j.at("parameters")) {
    Parameter& target = model->store_.get(p.at("name").get<std::string>());
    auto shape = p.at("shape").get<std::vector<int>>();
    auto values = p.at("values").get<std::vector<double>>();
    if (shape != target.value.shape() ||
        static_cast<int>(values.size()) != target.value.size()) {
      throw Error("checkpoint parameter " + target.name + " has wrong shape");
    }
    target.value.values() = std::move(values);
    ++seen;
  }
  if (seen != model->store_.all().size()) {
    throw Error("checkpoint is missing parameters");
  }
  return model;
}

void SequenceTagger::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << to_json().dump();
}

std::unique_ptr<SequenceTagger> SequenceTagger::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

std::vector<std::string> word_vocabulary(
    const std::vector<const Corpus*>& corpora) {
  std::set<std::string> words;
  for (const Corpus* c : corpora) {
    for (const Sentence* s : all_sentences(*c)) {
      for (const Token& t : s->tokens) words.insert(t.text);
    }
  }
  return {words.begin(), words.end()};
}

uint64_t parameter_checksum(const std::vector<const Parameter*>& params) {
  uint64_t h = 1469598103934665603ull;
  for (const Parameter* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    const size_t n = p->value.values().size() * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

Corpus tag_corpus(const SequenceTagger& model, const Corpus& corpus,
                  const ContextConfig& context) {
  EncodedCorpus encoded(corpus, model.vocab());
  Corpus out = corpus;
  for (int d = 0; d < encoded.document_count(); ++d) {
    for (int p = 0; p < encoded.sentence_count(d); ++p) {
      Sentence& sentence = out.documents[d].sentences[p];
      auto ctx = build_context(encoded, d, p, context);
      fit_context(ctx, model.config().transformer.max_positions);
      auto ids = model.predict(ctx, sentence.texts());
      std::vector<std::string> bioes;
      bioes.reserve(ids.size());
      for (int id : ids) bioes.push_back(model.labels()[id]);
      auto tags = convert_scheme(bioes, TagScheme::kBIOES, corpus.scheme);
      for (size_t i = 0; i < tags.size(); ++i) {
        sentence.tokens[i].predicted_tag = tags[i];
      }
    }
  }
  return out;
}

}  // namespace docner
