#include "docner/training.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "docner/error.h"
#include "docner/eval.h"

namespace docner {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<int> shuffled_order(int n, std::mt19937_64& rng) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  return order;
}

std::vector<int> gold_ids(const SequenceTagger& model, const Sentence& s,
                          TagScheme scheme) {
  auto tags = convert_scheme(s.gold_tags(), scheme, TagScheme::kBIOES);
  std::vector<int> ids;
  ids.reserve(tags.size());
  for (const std::string& t : tags) ids.push_back(model.label_id(t));
  return ids;
}

}  // namespace

void FineTuneConfig::validate() const {
  if (!(peak_lr() > 0.0) || batch_size <= 0 || max_epochs < 0) {
    throw Error("fine-tuning needs a positive learning rate and batch size");
  }
}

void FeatureBasedConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size <= 0 || max_epochs < 0 ||
      patience <= 0) {
    throw Error("invalid feature-based training configuration");
  }
  if (!(anneal_factor > 0.0 && anneal_factor < 1.0)) {
    throw Error("anneal_factor must lie in (0, 1)");
  }
  if (!(min_lr < learning_rate)) throw Error("min_lr must be below learning_rate");
}

json to_json(const FineTuneConfig& c) {
  return json{{"learning_rate", c.learning_rate}, {"lr_scale", c.lr_scale},
              {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
              {"beta1", c.beta1},                 {"beta2", c.beta2},
              {"adam_epsilon", c.adam_epsilon},   {"weight_decay", c.weight_decay},
              {"include_dev", c.include_dev}};
}

FineTuneConfig finetune_config_from_json(const json& j, FineTuneConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_scale = j.value("lr_scale", c.lr_scale);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.include_dev = j.value("include_dev", c.include_dev);
  return c;
}

json to_json(const FeatureBasedConfig& c) {
  return json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},       {"anneal_factor", c.anneal_factor},
              {"patience", c.patience},           {"min_lr", c.min_lr},
              {"clip_norm", c.clip_norm}};
}

FeatureBasedConfig feature_config_from_json(const json& j,
                                            FeatureBasedConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.anneal_factor = j.value("anneal_factor", c.anneal_factor);
  c.patience = j.value("patience", c.patience);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  return c;
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,lr,loss,dev_f1,seconds\n";
  char buf[256];
  for (const EpochRecord& r : epochs) {
    std::string dev = r.dev_f1 ? format2(*r.dev_f1) : "";
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%s,%.3f\n", r.epoch, r.lr,
                  r.train_loss, dev.c_str(), r.seconds);
    out += buf;
  }
  return out;
}

double one_cycle_lr(int step, int total_steps, double peak_lr) {
  if (total_steps <= 0) throw Error("one-cycle schedule needs total_steps > 0");
  if (step < 0 || step > total_steps) {
    throw Error("step " + std::to_string(step) + " outside [0, " +
                std::to_string(total_steps) + "]");
  }
  return peak_lr * (1.0 - static_cast<double>(step) / total_steps);
}

std::vector<TrainingInstance> make_instances(const SequenceTagger& model,
                                             const Corpus& corpus,
                                             const ContextConfig& context,
                                             std::vector<std::string>* warnings) {
  EncodedCorpus encoded(corpus, model.vocab());
  std::vector<TrainingInstance> out;
  out.reserve(corpus.sentence_count());
  const int max_length = model.config().transformer.max_positions;
  for (int d = 0; d < encoded.document_count(); ++d) {
    for (int p = 0; p < encoded.sentence_count(d); ++p) {
      const Sentence& s = corpus.documents[d].sentences[p];
      TrainingInstance inst;
      inst.context = build_context(encoded, d, p, context);
      const int dropped = fit_context(inst.context, max_length);
      if (dropped > 0 && warnings) {
        warnings->push_back("document " + std::to_string(d) + " sentence " +
                            std::to_string(p) + ": dropped " +
                            std::to_string(dropped) +
                            " context subtokens to fit max_positions");
      }
      inst.tokens = s.texts();
      inst.gold = gold_ids(model, s, corpus.scheme);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

void AdamW::step(const std::vector<Parameter*>& params, double lr) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape(), 0.0);
      v_.emplace_back(p->value.shape(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw Error("AdamW parameter set changed");
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.frozen) continue;
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    const int n = p.value.size();
    for (int i = 0; i < n; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * weight_decay_ * w[i];
      w[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + epsilon_);
    }
  }
}

void sgd_step(const std::vector<Parameter*>& params, double lr,
              double clip_norm) {
  double factor = 1.0;
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const Parameter* p : params) {
      if (p->frozen) continue;
      for (double g : p->grad.values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) factor = clip_norm / norm;
  }
  for (Parameter* p : params) {
    if (p->frozen) continue;
    for (int i = 0; i < p->value.size(); ++i) {
      p->value[i] -= lr * factor * p->grad[i];
    }
  }
}

TrainLog train_finetune(SequenceTagger& model, const Corpus& train,
                        const Corpus* dev, const FineTuneConfig& config,
                        uint64_t seed) {
  config.validate();
  if (model.config().mode != TrainingMode::kFineTune) {
    throw Error("train_finetune needs a fine-tuning model");
  }
  TrainLog log;
  const ContextConfig& context = model.config().context;
  auto instances = make_instances(model, train, context, &log.warnings);
  if (config.include_dev) {
    if (!dev) throw Error("include_dev requested without a dev split");
    auto extra = make_instances(model, *dev, context, &log.warnings);
    for (auto& inst : extra) instances.push_back(std::move(inst));
  }
  if (instances.empty()) throw Error("no training sentences");

  auto params = model.parameters().all();
  AdamW optimizer(config.beta1, config.beta2, config.adam_epsilon,
                  config.weight_decay);
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(instances.size());
  const int steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const int total_steps = steps_per_epoch * config.max_epochs;
  int step = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = Clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.lr = one_cycle_lr(step, total_steps, config.peak_lr());
    const auto order = shuffled_order(n, rng);
    double epoch_loss = 0.0;
    for (int b = 0; b < n; b += config.batch_size) {
      const int end = std::min(n, b + config.batch_size);
      model.parameters().zero_grad();
      for (int i = b; i < end; ++i) {
        const TrainingInstance& inst = instances[order[i]];
        Tape tape;
        tape.training = true;
        tape.rng = &rng;
        Var loss = scale(model.loss(tape, model.token_features(tape, inst.context,
                                                               inst.tokens),
                                    inst.gold),
                         1.0 / (end - b));
        epoch_loss += loss.value()[0] * (end - b);
        tape.backward(loss);
      }
      const double lr = one_cycle_lr(step, total_steps, config.peak_lr());
      optimizer.step(params, lr);
      log.step_lrs.push_back(lr);
      ++step;
    }
    record.train_loss = epoch_loss / n;
    record.seconds = seconds_since(start);
    log.epochs.push_back(record);
  }
  log.final_lr = total_steps > 0 ? one_cycle_lr(step, total_steps, config.peak_lr())
                                 : config.peak_lr();
  return log;
}

namespace {

struct FeatureInstance {
  Tensor features;
  std::vector<int> gold;
};

std::vector<FeatureInstance> precompute(const SequenceTagger& model,
                                        std::vector<TrainingInstance> instances) {
  std::vector<FeatureInstance> out;
  out.reserve(instances.size());
  for (TrainingInstance& inst : instances) {
    out.push_back({model.token_features(inst.context, inst.tokens),
                   std::move(inst.gold)});
  }
  return out;
}

double features_f1(const SequenceTagger& model, const Corpus& dev,
                   const std::vector<FeatureInstance>& features) {
  Corpus tagged = dev;
  tagged.scheme = TagScheme::kBIOES;
  size_t k = 0;
  for (Document& d : tagged.documents) {
    for (Sentence& s : d.sentences) {
      auto ids = model.predict_from_features(features[k].features);
      for (size_t i = 0; i < ids.size(); ++i) {
        s.tokens[i].gold_tag = model.labels()[features[k].gold[i]];
        s.tokens[i].predicted_tag = model.labels()[ids[i]];
      }
      ++k;
    }
  }
  return score(tagged).micro.f1;
}

}  // namespace

TrainLog train_feature_based(SequenceTagger& model, const Corpus& train,
                             const Corpus& dev, const FeatureBasedConfig& config,
                             uint64_t seed, const DevScorer& dev_scorer) {
  config.validate();
  if (model.config().mode != TrainingMode::kFeatureBased) {
    throw Error("train_feature_based needs a feature-based model");
  }
  if (dev.sentence_count() == 0) {
    throw Error("feature-based training anneals against dev data; the dev split is empty");
  }
  model.freeze_features(true);
  TrainLog log;
  const ContextConfig& context = model.config().context;
  auto train_set =
      precompute(model, make_instances(model, train, context, &log.warnings));
  std::vector<FeatureInstance> dev_set;
  if (!dev_scorer) {
    dev_set = precompute(model, make_instances(model, dev, context, &log.warnings));
  }
  if (train_set.empty()) throw Error("no training sentences");

  auto params = model.head_parameters();
  std::vector<Tensor> best_values;
  auto snapshot = [&] {
    best_values.clear();
    for (const Parameter* p : params) best_values.push_back(p->value);
  };
  snapshot();

  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(train_set.size());
  double lr = config.learning_rate;
  double best_f1 = -std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = Clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    const auto order = shuffled_order(n, rng);
    double epoch_loss = 0.0;
    for (int b = 0; b < n; b += config.batch_size) {
      const int end = std::min(n, b + config.batch_size);
      for (Parameter* p : params) p->zero_grad();
      for (int i = b; i < end; ++i) {
        const FeatureInstance& inst = train_set[order[i]];
        Tape tape;
        tape.training = true;
        tape.rng = &rng;
        Var loss = scale(model.loss(tape, tape.constant(inst.features), inst.gold),
                         1.0 / (end - b));
        epoch_loss += loss.value()[0] * (end - b);
        tape.backward(loss);
      }
      sgd_step(params, lr, config.clip_norm);
      log.step_lrs.push_back(lr);
    }
    record.train_loss = epoch_loss / n;

    const double f1 = dev_scorer ? dev_scorer(epoch, model)
                                 : features_f1(model, dev, dev_set);
    record.dev_f1 = f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      bad_epochs = 0;
      snapshot();
    } else if (++bad_epochs >= config.patience) {
      lr *= config.anneal_factor;
      bad_epochs = 0;
    }
    record.seconds = seconds_since(start);
    log.epochs.push_back(record);
    if (lr < config.min_lr) break;
  }
  for (size_t k = 0; k < params.size(); ++k) params[k]->value = best_values[k];
  log.final_lr = lr;
  return log;
}

double evaluate_f1(const SequenceTagger& model, const Corpus& corpus,
                   const ContextConfig& context) {
  return score(tag_corpus(model, corpus, context)).micro.f1;
}

}  // namespace docner
