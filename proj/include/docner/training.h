#ifndef DOCNER_TRAINING_H_
#define DOCNER_TRAINING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "docner/model.h"

#include <json.hpp>

namespace docner {

// Fine-tuning recipe: AdamW with a linear one-cycle decay, a fixed number of
// epochs and no stopping criterion.
struct FineTuneConfig {
  double learning_rate = 5e-6;
  // Multiplier on learning_rate; models trained from scratch need a larger
  // step than a pretrained encoder.
  double lr_scale = 100.0;
  int batch_size = 4;
  int max_epochs = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.01;
  // Merge the dev split into the training data (+dev).
  bool include_dev = false;

  double peak_lr() const { return learning_rate * lr_scale; }
  void validate() const;
};

// Feature-based recipe: SGD over a frozen encoder, learning rate annealed
// against dev micro-F1, stopping once it drops below min_lr.
struct FeatureBasedConfig {
  double learning_rate = 0.1;
  int batch_size = 16;
  int max_epochs = 500;
  double anneal_factor = 0.5;
  // Epochs without dev improvement before the learning rate is annealed.
  int patience = 3;
  double min_lr = 1e-4;
  // Global gradient-norm clip; 0 disables it.
  double clip_norm = 5.0;

  void validate() const;
};

nlohmann::json to_json(const FineTuneConfig& c);
FineTuneConfig finetune_config_from_json(const nlohmann::json& j,
                                         FineTuneConfig base = {});
nlohmann::json to_json(const FeatureBasedConfig& c);
FeatureBasedConfig feature_config_from_json(const nlohmann::json& j,
                                            FeatureBasedConfig base = {});

struct EpochRecord {
  int epoch = 0;
  // Learning rate at the first update of the epoch.
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> dev_f1;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  // Learning rate applied at every optimizer update, in order.
  std::vector<double> step_lrs;
  // Schedule value after the last update.
  double final_lr = 0.0;
  std::vector<std::string> warnings;

  // epoch,lr,loss,dev_f1,seconds
  std::string to_csv() const;
};

// Linear decay from peak_lr at step 0 to zero at step == total_steps.
double one_cycle_lr(int step, int total_steps, double peak_lr);

// One sentence prepared for training: context assembled and fitted to the
// encoder, gold tags as BIOES label ids.
struct TrainingInstance {
  ContextualizedSentence context;
  std::vector<std::string> tokens;
  std::vector<int> gold;
};

std::vector<TrainingInstance> make_instances(const SequenceTagger& model,
                                             const Corpus& corpus,
                                             const ContextConfig& context,
                                             std::vector<std::string>* warnings);

class AdamW {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
        weight_decay_(weight_decay) {}

  void step(const std::vector<Parameter*>& params, double lr);

 private:
  double beta1_, beta2_, epsilon_, weight_decay_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Plain SGD; clips the global gradient norm to `clip_norm` when positive.
void sgd_step(const std::vector<Parameter*>& params, double lr,
              double clip_norm);

// Trains every parameter for exactly config.max_epochs, shuffling sentences
// each epoch with `seed`. `dev` is merged into training when include_dev.
TrainLog train_finetune(SequenceTagger& model, const Corpus& train,
                        const Corpus* dev, const FineTuneConfig& config,
                        uint64_t seed);

// Replaces the dev evaluation after each epoch; receives the epoch number.
using DevScorer = std::function<double(int epoch, const SequenceTagger&)>;

// Trains only the parameters downstream of the frozen features and returns
// the model restored to its best dev epoch.
TrainLog train_feature_based(SequenceTagger& model, const Corpus& train,
                             const Corpus& dev, const FeatureBasedConfig& config,
                             uint64_t seed, const DevScorer& dev_scorer = {});

// Micro F1 of the model on a corpus.
double evaluate_f1(const SequenceTagger& model, const Corpus& corpus,
                   const ContextConfig& context);

}  // namespace docner

#endif  // DOCNER_TRAINING_H_
