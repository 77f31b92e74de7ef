#include "docner/encoder.h"

#include <cctype>
#include <cmath>

#include "docner/error.h"
#include "docner/tokenizer.h"

namespace docner {

void TransformerConfig::validate() const {
  if (layers < 0 || heads <= 0 || model_dim <= 0 || ff_dim <= 0 ||
      max_positions <= 2 || vocab_size <= 0) {
    throw Error("invalid transformer configuration");
  }
  if (model_dim % heads != 0) {
    throw Error("model_dim " + std::to_string(model_dim) +
                " is not divisible by heads " + std::to_string(heads));
  }
}

std::string_view layer_strategy_name(LayerStrategy s) {
  switch (s) {
    case LayerStrategy::kLastLayer:
      return "last_layer";
    case LayerStrategy::kAllLayerMean:
      return "all_layer_mean";
    case LayerStrategy::kLastFourConcat:
      return "last_four_concat";
  }
  return "?";
}

LayerStrategy parse_layer_strategy(std::string_view name) {
  if (name == "last_layer") return LayerStrategy::kLastLayer;
  if (name == "all_layer_mean") return LayerStrategy::kAllLayerMean;
  if (name == "last_four_concat") return LayerStrategy::kLastFourConcat;
  throw Error("unknown layer strategy: " + std::string(name));
}

int pooled_width(LayerStrategy s, int model_dim) {
  return s == LayerStrategy::kLastFourConcat ? 4 * model_dim : model_dim;
}

Tensor random_normal(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

TransformerEncoder::TransformerEncoder(const TransformerConfig& config,
                                       ParameterStore& store,
                                       std::mt19937_64& rng,
                                       const std::string& prefix)
    : config_(config) {
  config_.validate();
  const int d = config_.model_dim;
  const int f = config_.ff_dim;
  auto add = [&](const std::string& name, Tensor value) {
    Parameter* p = &store.add(prefix + "." + name, std::move(value));
    params_.push_back(p);
    return p;
  };
  token_embedding_ = add("token_embedding",
                         random_normal(config_.vocab_size, d, 0.1, rng));
  position_embedding_ = add("position_embedding",
                            random_normal(config_.max_positions, d, 0.1, rng));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string n = "layer" + std::to_string(l) + ".";
    Layer layer;
    layer.ln1_gain = add(n + "ln1.gain", Tensor(1, d, 1.0));
    layer.ln1_bias = add(n + "ln1.bias", Tensor(1, d));
    layer.qkv_weight =
        add(n + "attn.qkv.weight", random_normal(d, 3 * d, 1.0 / std::sqrt(d), rng));
    // No key bias: it shifts every score in a softmax row by the same amount
    // and so never receives a gradient.
    layer.qv_bias = add(n + "attn.qv.bias", Tensor(1, 2 * d));
    layer.out_weight =
        add(n + "attn.out.weight", random_normal(d, d, 1.0 / std::sqrt(d), rng));
    layer.out_bias = add(n + "attn.out.bias", Tensor(1, d));
    layer.ln2_gain = add(n + "ln2.gain", Tensor(1, d, 1.0));
    layer.ln2_bias = add(n + "ln2.bias", Tensor(1, d));
    layer.ff1_weight =
        add(n + "ff1.weight", random_normal(d, f, 1.0 / std::sqrt(d), rng));
    layer.ff1_bias = add(n + "ff1.bias", Tensor(1, f));
    layer.ff2_weight =
        add(n + "ff2.weight", random_normal(f, d, 1.0 / std::sqrt(f), rng));
    layer.ff2_bias = add(n + "ff2.bias", Tensor(1, d));
    layers_.push_back(layer);
  }
}

void TransformerEncoder::set_frozen(bool frozen) {
  for (Parameter* p : params_) p->frozen = frozen;
}

std::vector<Var> TransformerEncoder::forward(Tape& tape,
                                             const std::vector<int>& ids) const {
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw Error("empty encoder input");
  if (n > config_.max_positions) {
    throw Error("input of " + std::to_string(n) +
                " subtokens exceeds max_positions " +
                std::to_string(config_.max_positions) +
                "; reduce the context window");
  }
  for (int id : ids) {
    if (id < 0 || id >= config_.vocab_size) {
      throw Error("subtoken id " + std::to_string(id) +
                  " outside the encoder vocabulary");
    }
  }
  std::vector<int> positions(n);
  for (int i = 0; i < n; ++i) positions[i] = i;

  const int d = config_.model_dim;
  const int heads = config_.heads;
  const int head_dim = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Var x = add(gather_rows(tape.param(*token_embedding_), ids),
              gather_rows(tape.param(*position_embedding_), positions));
  x = dropout(x, config_.dropout);
  std::vector<Var> hidden{x};

  for (const Layer& layer : layers_) {
    Var h = layer_norm(x, tape.param(*layer.ln1_gain), tape.param(*layer.ln1_bias));
    Var qv_bias = tape.param(*layer.qv_bias);
    Var qkv = add_row(matmul(h, tape.param(*layer.qkv_weight)),
                      concat_cols({slice_cols(qv_bias, 0, d),
                                   tape.constant(Tensor(1, d)),
                                   slice_cols(qv_bias, d, d)}));
    std::vector<Var> head_outputs;
    head_outputs.reserve(heads);
    for (int k = 0; k < heads; ++k) {
      Var q = slice_cols(qkv, k * head_dim, head_dim);
      Var key = slice_cols(qkv, d + k * head_dim, head_dim);
      Var v = slice_cols(qkv, 2 * d + k * head_dim, head_dim);
      Var attn = softmax_rows(scale(matmul(q, transpose(key)), inv_sqrt));
      head_outputs.push_back(matmul(dropout(attn, config_.dropout), v));
    }
    Var merged = heads == 1 ? head_outputs.front() : concat_cols(head_outputs);
    Var attn_out = add_row(matmul(merged, tape.param(*layer.out_weight)),
                           tape.param(*layer.out_bias));
    x = add(x, dropout(attn_out, config_.dropout));

    h = layer_norm(x, tape.param(*layer.ln2_gain), tape.param(*layer.ln2_bias));
    Var ff = gelu(add_row(matmul(h, tape.param(*layer.ff1_weight)),
                          tape.param(*layer.ff1_bias)));
    ff = add_row(matmul(ff, tape.param(*layer.ff2_weight)),
                 tape.param(*layer.ff2_bias));
    x = add(x, dropout(ff, config_.dropout));
    hidden.push_back(x);
  }
  return hidden;
}

EncoderOutput TransformerEncoder::encode(
    const ContextualizedSentence& input) const {
  Tape tape;
  tape.grad_enabled = false;
  EncoderOutput out;
  for (const Var& v : forward(tape, input.assembled())) {
    out.hidden.push_back(v.value());
  }
  return out;
}

Var pool_layers(const std::vector<Var>& hidden, LayerStrategy strategy) {
  if (hidden.empty()) throw Error("no encoder layers to pool");
  switch (strategy) {
    case LayerStrategy::kLastLayer:
      return hidden.back();
    case LayerStrategy::kAllLayerMean:
      return average(hidden);
    case LayerStrategy::kLastFourConcat: {
      const int layers = static_cast<int>(hidden.size()) - 1;
      if (layers < 4) {
        throw Error("last_four_concat needs at least 4 transformer layers, have " +
                    std::to_string(layers));
      }
      return concat_cols({hidden.end() - 4, hidden.end()});
    }
  }
  throw Error("unknown layer strategy");
}

Tensor pool_layers(const EncoderOutput& out, LayerStrategy strategy) {
  Tape tape;
  std::vector<Var> hidden;
  for (const Tensor& t : out.hidden) hidden.push_back(tape.constant(t));
  return pool_layers(hidden, strategy).value();
}

namespace {

void check_covers(int rows, const ContextualizedSentence& ctx) {
  if (rows != ctx.assembled_length()) {
    throw Error("pooled states have " + std::to_string(rows) +
                " rows but the assembled input has " +
                std::to_string(ctx.assembled_length()));
  }
  if (ctx.core_start != static_cast<int>(ctx.left_ids.size()) + 1) {
    throw Error("core offset does not match the left context length");
  }
}

}  // namespace

Var extract_core_tokens(Var pooled, const ContextualizedSentence& ctx) {
  check_covers(pooled.rows(), ctx);
  return gather_rows(pooled, ctx.core_alignment());
}

Tensor extract_core_tokens(const Tensor& pooled,
                           const ContextualizedSentence& ctx) {
  check_covers(pooled.rows(), ctx);
  return first_subword_pool(pooled, ctx.core_alignment());
}

StaticEmbeddingTable::StaticEmbeddingTable(std::vector<std::string> words,
                                           int dim, ParameterStore& store,
                                           std::mt19937_64& rng,
                                           const std::string& name)
    : words_(std::move(words)), dim_(dim) {
  if (dim < 0) throw Error("negative embedding dimension");
  for (size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], static_cast<int>(i));
  }
  if (dim_ > 0) {
    table_ = &store.add(name, random_normal(size() + 1, dim_, 0.1, rng));
  }
}

int StaticEmbeddingTable::row_of(const std::string& token) const {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  std::string lower = token;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (auto it = index_.find(lower); it != index_.end()) return it->second;
  return size();
}

Tensor StaticEmbeddingTable::lookup(const std::string& token) const {
  if (!table_) return Tensor(1, 0);
  const int r = row_of(token);
  Tensor out(1, dim_);
  std::copy_n(table_->value.row(r).data(), dim_, out.data());
  return out;
}

Var concat_word_embeddings(Var token_reps, const std::vector<std::string>& tokens,
                           const StaticEmbeddingTable& table) {
  if (token_reps.rows() != static_cast<int>(tokens.size())) {
    throw Error("one representation row per token required");
  }
  if (table.dim() == 0) return token_reps;
  std::vector<int> rows;
  rows.reserve(tokens.size());
  for (const std::string& t : tokens) rows.push_back(table.row_of(t));
  Tape& tape = *token_reps.tape();
  return concat_cols({token_reps, gather_rows(tape.param(*table.table()), rows)});
}

Tensor concat_word_embeddings(const Tensor& token_reps,
                              const std::vector<std::string>& tokens,
                              const StaticEmbeddingTable& table) {
  Tape tape;
  tape.grad_enabled = false;
  return concat_word_embeddings(tape.constant(token_reps), tokens, table).value();
}

}  // namespace docner
