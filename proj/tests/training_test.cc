#include <doctest.h>

#include <cmath>

#include "docner/error.h"
#include "docner/synthetic.h"
#include "docner/training.h"

using namespace docner;

namespace {

ModelConfig small_config(TrainingMode mode, int window = 8) {
  ModelConfig c = ModelConfig::defaults(mode);
  c.transformer.layers = 1;
  c.transformer.heads = 2;
  c.transformer.model_dim = 8;
  c.transformer.ff_dim = 16;
  c.transformer.max_positions = 128;
  c.lstm_hidden = 4;
  c.context.window = window;
  return c;
}

SequenceTagger make_model(const ModelConfig& config, const Corpus& corpus,
                          uint64_t seed) {
  const SubwordVocab vocab = train_vocab(corpus, 120);
  ModelConfig c = config;
  c.transformer.vocab_size = vocab.size();
  return SequenceTagger(c, vocab, label_inventory(corpus.label_set, TagScheme::kBIOES),
                        {}, seed);
}

std::vector<double> values_of(const std::vector<Parameter*>& params) {
  std::vector<double> out;
  for (const Parameter* p : params) {
    out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  }
  return out;
}

}  // namespace

TEST_CASE("one-cycle schedule") {
  CHECK(one_cycle_lr(0, 20, 0.5) == 0.5);
  CHECK(one_cycle_lr(19, 20, 0.5) == doctest::Approx(0.5 / 20));
  CHECK(one_cycle_lr(20, 20, 0.5) == 0.0);
  CHECK_THROWS_AS(one_cycle_lr(0, 0, 0.5), Error);
  CHECK_THROWS_AS(one_cycle_lr(21, 20, 0.5), Error);
}

TEST_CASE("config validation") {
  FineTuneConfig f;
  CHECK(f.peak_lr() == doctest::Approx(5e-4));
  f.batch_size = 0;
  CHECK_THROWS_AS(f.validate(), Error);
  FeatureBasedConfig g;
  g.anneal_factor = 1.0;
  CHECK_THROWS_AS(g.validate(), Error);
  g = {};
  g.min_lr = 0.2;
  CHECK_THROWS_AS(g.validate(), Error);

  const FineTuneConfig back = finetune_config_from_json(to_json(FineTuneConfig{}));
  CHECK(back.weight_decay == 0.01);
  CHECK(back.max_epochs == 20);
}

TEST_CASE("zero epochs leave the model untouched") {
  const Corpus train = synthetic::template_corpus(1, 10);
  SequenceTagger model = make_model(small_config(TrainingMode::kFineTune), train, 1);
  const auto before = values_of(model.parameters().all());
  FineTuneConfig cfg;
  cfg.max_epochs = 0;
  const TrainLog log = train_finetune(model, train, nullptr, cfg, 1);
  CHECK(log.epochs.empty());
  CHECK(values_of(model.parameters().all()) == before);
}

TEST_CASE("fine-tuning runs every epoch and decays to zero") {
  const Corpus train = synthetic::template_corpus(2, 10);
  SequenceTagger model = make_model(small_config(TrainingMode::kFineTune), train, 2);
  FineTuneConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 4;
  const TrainLog log = train_finetune(model, train, nullptr, cfg, 2);
  REQUIRE(log.epochs.size() == 3);
  for (int e = 0; e < 3; ++e) CHECK(log.epochs[e].epoch == e + 1);
  // 10 sentences in batches of 4: 3 updates per epoch.
  REQUIRE(log.step_lrs.size() == 9);
  CHECK(log.step_lrs.front() == cfg.peak_lr());
  CHECK(log.step_lrs.back() == doctest::Approx(cfg.peak_lr() / 9));
  CHECK(log.final_lr == 0.0);
  for (size_t i = 1; i < log.step_lrs.size(); ++i) {
    CHECK(log.step_lrs[i] < log.step_lrs[i - 1]);
  }
  const std::string csv = log.to_csv();
  CHECK(csv.rfind("epoch,lr,loss,dev_f1,seconds\n", 0) == 0);
}

TEST_CASE("fine-tuning updates every parameter") {
  const Corpus train = synthetic::template_corpus(3, 10);
  ModelConfig c = small_config(TrainingMode::kFineTune);
  c.head = HeadType::kCrf;
  c.use_word_embeddings = true;
  c.word_embedding_dim = 3;
  const SubwordVocab vocab = train_vocab(train, 120);
  c.transformer.vocab_size = vocab.size();
  SequenceTagger model(c, vocab, label_inventory(train.label_set, TagScheme::kBIOES),
                       word_vocabulary({&train}), 3);
  std::vector<std::vector<double>> before;
  for (const Parameter* p : model.parameters().all()) before.push_back(p->value.values());
  FineTuneConfig cfg;
  cfg.max_epochs = 1;
  train_finetune(model, train, nullptr, cfg, 3);
  const auto after = model.parameters().all();
  for (size_t k = 0; k < after.size(); ++k) {
    CAPTURE(after[k]->name);
    CHECK(after[k]->value.values() != before[k]);
  }
}

TEST_CASE("equal seeds give identical runs") {
  const Corpus train = synthetic::template_corpus(4, 12);
  FineTuneConfig cfg;
  cfg.max_epochs = 2;
  SequenceTagger a = make_model(small_config(TrainingMode::kFineTune), train, 9);
  SequenceTagger b = make_model(small_config(TrainingMode::kFineTune), train, 9);
  const TrainLog la = train_finetune(a, train, nullptr, cfg, 5);
  const TrainLog lb = train_finetune(b, train, nullptr, cfg, 5);
  for (size_t e = 0; e < la.epochs.size(); ++e) {
    CHECK(la.epochs[e].train_loss == lb.epochs[e].train_loss);
  }
  CHECK(values_of(a.parameters().all()) == values_of(b.parameters().all()));

  SequenceTagger c = make_model(small_config(TrainingMode::kFineTune), train, 9);
  const TrainLog lc = train_finetune(c, train, nullptr, cfg, 6);
  CHECK(lc.epochs[0].train_loss != la.epochs[0].train_loss);
}

TEST_CASE("include_dev adds exactly the dev sentences") {
  const Corpus train = synthetic::template_corpus(5, 10);
  Corpus dev = synthetic::template_corpus(6, 7);
  dev.split = Split::kDev;
  FineTuneConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 1;
  SequenceTagger a = make_model(small_config(TrainingMode::kFineTune), train, 1);
  CHECK(train_finetune(a, train, &dev, cfg, 1).step_lrs.size() == 10);
  cfg.include_dev = true;
  SequenceTagger b = make_model(small_config(TrainingMode::kFineTune), train, 1);
  CHECK(train_finetune(b, train, &dev, cfg, 1).step_lrs.size() == 17);
  SequenceTagger c = make_model(small_config(TrainingMode::kFineTune), train, 1);
  CHECK_THROWS_AS(train_finetune(c, train, nullptr, cfg, 1), Error);
}

TEST_CASE("over-long inputs lose context, not core tokens") {
  const Corpus train = synthetic::template_corpus(7, 10);
  ModelConfig c = small_config(TrainingMode::kFineTune, 64);
  c.transformer.max_positions = 40;
  SequenceTagger model = make_model(c, train, 1);
  std::vector<std::string> warnings;
  const auto instances = make_instances(model, train, c.context, &warnings);
  CHECK_FALSE(warnings.empty());
  for (size_t i = 0; i < instances.size(); ++i) {
    CHECK(instances[i].context.assembled_length() <= 40);
    CHECK(instances[i].context.core.token_count() ==
          static_cast<int>(instances[i].tokens.size()));
  }
}

TEST_CASE("toy model training loss falls over the first epochs") {
  // Default toy transformer, no context so the check stays fast.
  int decreasing = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const Corpus train = synthetic::template_corpus(seed, 50);
    ModelConfig c = ModelConfig::defaults(TrainingMode::kFineTune);
    c.context.window = 0;
    SequenceTagger model = make_model(c, train, seed);
    FineTuneConfig cfg;
    cfg.max_epochs = 5;
    const TrainLog log = train_finetune(model, train, nullptr, cfg, seed);
    bool strictly = true;
    for (size_t e = 1; e < log.epochs.size(); ++e) {
      strictly = strictly && log.epochs[e].train_loss < log.epochs[e - 1].train_loss;
    }
    decreasing += strictly;
  }
  CHECK(decreasing >= 4);
}

TEST_CASE("feature-based training leaves the encoder untouched") {
  const Corpus train = synthetic::template_corpus(8, 15);
  Corpus dev = synthetic::template_corpus(9, 6);
  dev.split = Split::kDev;
  SequenceTagger model = make_model(small_config(TrainingMode::kFeatureBased), train, 2);
  const auto frozen = [&] {
    std::vector<const Parameter*> out;
    for (Parameter* p : model.feature_parameters()) out.push_back(p);
    return parameter_checksum(out);
  };
  const uint64_t before = frozen();
  FeatureBasedConfig cfg;
  cfg.max_epochs = 4;
  const TrainLog log = train_feature_based(model, train, dev, cfg, 2);
  CHECK(frozen() == before);
  CHECK(log.epochs.size() == 4);
  for (const EpochRecord& r : log.epochs) CHECK(r.dev_f1.has_value());
}

TEST_CASE("frozen dev F1 anneals to the learning-rate floor") {
  const Corpus train = synthetic::template_corpus(10, 8);
  Corpus dev = synthetic::template_corpus(11, 4);
  SequenceTagger model = make_model(small_config(TrainingMode::kFeatureBased, 0), train, 3);
  FeatureBasedConfig cfg;
  const TrainLog log = train_feature_based(model, train, dev, cfg, 3,
                                           [](int, const SequenceTagger&) { return 42.0; });
  // Independent simulation: the first epoch sets the best score, every
  // `patience` further epochs halve the rate.
  int anneals = 0;
  double lr = cfg.learning_rate;
  while (lr >= cfg.min_lr) {
    lr *= cfg.anneal_factor;
    ++anneals;
  }
  const int expected = 1 + cfg.patience * anneals;
  CHECK(anneals == 10);
  CHECK(expected == 31);
  CHECK(static_cast<int>(log.epochs.size()) == expected);
  CHECK(log.final_lr < cfg.min_lr);
  CHECK(log.epochs[0].lr == 0.1);
  CHECK(log.epochs[3].lr == 0.1);
  CHECK(log.epochs[4].lr == 0.05);
  CHECK(log.epochs[7].lr == 0.025);
}

TEST_CASE("improving dev F1 never anneals") {
  const Corpus train = synthetic::template_corpus(12, 8);
  Corpus dev = synthetic::template_corpus(13, 4);
  SequenceTagger model = make_model(small_config(TrainingMode::kFeatureBased, 0), train, 4);
  FeatureBasedConfig cfg;
  cfg.max_epochs = 12;
  const TrainLog log = train_feature_based(
      model, train, dev, cfg, 4, [](int epoch, const SequenceTagger&) { return epoch * 1.0; });
  REQUIRE(log.epochs.size() == 12);
  for (const EpochRecord& r : log.epochs) CHECK(r.lr == 0.1);
}

TEST_CASE("feature-based training restores the best dev epoch") {
  const Corpus train = synthetic::template_corpus(14, 8);
  Corpus dev = synthetic::template_corpus(15, 4);
  SequenceTagger model = make_model(small_config(TrainingMode::kFeatureBased, 0), train, 5);
  std::vector<double> at_epoch_two;
  FeatureBasedConfig cfg;
  cfg.max_epochs = 6;
  train_feature_based(model, train, dev, cfg, 5, [&](int epoch, const SequenceTagger& m) {
    if (epoch == 2) {
      for (const Parameter* p : m.parameters().all()) {
        at_epoch_two.insert(at_epoch_two.end(), p->value.values().begin(),
                            p->value.values().end());
      }
    }
    return epoch == 2 ? 90.0 : 10.0;
  });
  CHECK(values_of(model.parameters().all()) == at_epoch_two);
}

TEST_CASE("feature-based training needs dev data") {
  const Corpus train = synthetic::template_corpus(16, 8);
  SequenceTagger model = make_model(small_config(TrainingMode::kFeatureBased, 0), train, 6);
  CHECK_THROWS_AS(train_feature_based(model, train, Corpus{}, FeatureBasedConfig{}, 1),
                  Error);
  SequenceTagger ft = make_model(small_config(TrainingMode::kFineTune, 0), train, 6);
  CHECK_THROWS_AS(train_feature_based(ft, train, train, FeatureBasedConfig{}, 1), Error);
}

TEST_CASE("sgd clipping bounds the update") {
  Parameter p("p", Tensor(1, 2, 0.0));
  p.grad[0] = 30.0;
  p.grad[1] = 40.0;
  sgd_step({&p}, 1.0, 5.0);
  CHECK(p.value[0] == doctest::Approx(-3.0));
  CHECK(p.value[1] == doctest::Approx(-4.0));
  Parameter q("q", Tensor(1, 1, 0.0));
  q.grad[0] = 2.0;
  sgd_step({&q}, 0.5, 5.0);
  CHECK(q.value[0] == doctest::Approx(-1.0));
}

TEST_CASE("AdamW first step moves by the learning rate") {
  Parameter p("p", Tensor(1, 2, 1.0));
  p.grad[0] = 0.3;
  p.grad[1] = -2.0;
  AdamW opt(0.9, 0.999, 1e-8, 0.0);
  opt.step({&p}, 0.01);
  CHECK(p.value[0] == doctest::Approx(0.99));
  CHECK(p.value[1] == doctest::Approx(1.01));

  Parameter d("d", Tensor(1, 1, 2.0));
  AdamW decay(0.9, 0.999, 1e-8, 0.01);
  decay.step({&d}, 0.1);
  CHECK(d.value[0] == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0));
}
