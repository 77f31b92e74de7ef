#ifndef DOCNER_EXPERIMENT_H_
#define DOCNER_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "docner/eval.h"
#include "docner/training.h"

#include <json.hpp>

namespace docner {

struct ExperimentConfig {
  std::string name = "experiment";
  ModelConfig model;
  FineTuneConfig finetune;
  FeatureBasedConfig feature;
  std::vector<uint64_t> seeds{1};

  std::string train_path;
  std::string dev_path;   // optional for fine-tuning
  std::string test_path;  // optional
  // Existing vocab file; when empty a vocab of vocab_size is trained on the
  // training split.
  std::string vocab_path;
  int vocab_size = 4000;
  // Checkpoint whose encoder (and word embedding) weights initialise the
  // model, typically a fine-tuned run feeding the feature-based path.
  std::string encoder_checkpoint;
  ConllOptions conll;

  // Runs land in output_dir/name/seed/; empty disables all file output.
  std::string output_dir = "runs";

  // Checks seeds and that every referenced file exists.
  void validate() const;
};

// Flat JSON: model keys (see model_config_from_json), training keys applied
// to the recipe of the selected mode, and the experiment keys above.
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::string& path);

// Corpora already in memory; test may be empty.
struct ExperimentData {
  Corpus train;
  std::optional<Corpus> dev;
  std::optional<Corpus> test;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

struct SeedResult {
  uint64_t seed = 0;
  std::optional<double> dev_f1;
  std::optional<double> test_f1;
  TrainLog log;
  uint64_t checksum = 0;
};

struct ExperimentResult {
  std::string name;
  std::vector<SeedResult> runs;
  std::optional<RunAggregate> dev;
  std::optional<RunAggregate> test;

  // name,dev,test with "mean ± std" cells ("-" when a split is absent).
  std::string csv_row() const;
};

// Trains one model per seed, scores dev and test, and aggregates. Stage
// failures are rethrown as Error("<stage>: <message>").
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const ExperimentData& data);

// Text table of experiment rows in "mean ± std" form.
std::string results_table(const std::vector<ExperimentResult>& rows);
std::string results_csv(const std::vector<ExperimentResult>& rows);

struct SweepRow {
  int window = 0;
  ExperimentResult result;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  // One column per window plus the average over windows, for each split.
  std::string to_table() const;
  std::string to_csv() const;
};

// One run_experiment per window, all else fixed. Each run is named
// "<name>-w<window>".
SweepResult sweep_context(const ExperimentConfig& config,
                          const std::vector<int>& windows);
SweepResult sweep_context(const ExperimentConfig& config,
                          const ExperimentData& data,
                          const std::vector<int>& windows);

}  // namespace docner

#endif  // DOCNER_EXPERIMENT_H_
