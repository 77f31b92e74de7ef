#include "docner/experiment.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "docner/error.h"

namespace docner {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw Error(name + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string cell(const std::optional<RunAggregate>& agg) {
  return agg ? agg->to_string() : "-";
}

std::string pad_right(const std::string& s, size_t width) {
  // "±" is two bytes but one column wide.
  size_t shown = 0;
  for (unsigned char c : s) shown += (c & 0xC0) != 0x80;
  return shown >= width ? s : s + std::string(width - shown, ' ');
}

// Copies encoder and word embedding weights from a checkpoint by name.
void load_encoder_weights(SequenceTagger& model, const std::string& path) {
  auto source = SequenceTagger::load(path);
  int copied = 0;
  for (Parameter* p : model.feature_parameters()) {
    if (!source->parameters().contains(p->name)) continue;
    const Parameter& q = source->parameters().get(p->name);
    if (!q.value.same_shape(p->value)) {
      throw Error("parameter " + p->name + " has shape " +
                  q.value.shape_string() + " in the checkpoint, expected " +
                  p->value.shape_string());
    }
    p->value = q.value;
    ++copied;
  }
  if (copied == 0) throw Error(path + " shares no encoder parameters");
}

std::set<std::string> all_types(const ExperimentData& data) {
  std::set<std::string> types = data.train.label_set;
  if (data.dev) types.insert(data.dev->label_set.begin(), data.dev->label_set.end());
  if (data.test) {
    types.insert(data.test->label_set.begin(), data.test->label_set.end());
  }
  return types;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw Error("an experiment needs at least one seed");
  if (name.empty()) throw Error("an experiment needs a name");
  for (const std::string* p : {&train_path, &dev_path, &test_path, &vocab_path,
                               &encoder_checkpoint}) {
    if (!p->empty() && !fs::exists(*p)) throw Error("file not found: " + *p);
  }
  if (model.mode == TrainingMode::kFeatureBased) {
    if (finetune.include_dev) {
      throw Error("include_dev needs the fine-tuning mode; feature-based "
                  "training anneals against dev");
    }
    feature.validate();
  } else {
    finetune.validate();
  }
}

json to_json(const ExperimentConfig& c) {
  json j = to_json(c.model);
  const json training = c.model.mode == TrainingMode::kFineTune
                            ? to_json(c.finetune)
                            : to_json(c.feature);
  j.update(training);
  j["name"] = c.name;
  j["seeds"] = c.seeds;
  j["train"] = c.train_path;
  j["dev"] = c.dev_path;
  j["test"] = c.test_path;
  j["vocab"] = c.vocab_path;
  j["vocab_size"] = c.vocab_size;
  j["encoder_checkpoint"] = c.encoder_checkpoint;
  j["token_column"] = c.conll.token_column;
  j["tag_column"] = c.conll.tag_column;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j,
                                             ExperimentConfig c) {
  if (!j.is_object()) throw Error("experiment config must be a JSON object");
  c.model = model_config_from_json(j, c.model);
  c.finetune = finetune_config_from_json(j, c.finetune);
  if (c.model.mode == TrainingMode::kFeatureBased) {
    // Shared keys (learning_rate, batch_size, max_epochs) default to the
    // feature-based recipe rather than the fine-tuning one.
    c.feature = feature_config_from_json(j, c.feature);
  }
  c.name = j.value("name", c.name);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.train_path = j.value("train", c.train_path);
  c.dev_path = j.value("dev", c.dev_path);
  c.test_path = j.value("test", c.test_path);
  c.vocab_path = j.value("vocab", c.vocab_path);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.encoder_checkpoint = j.value("encoder_checkpoint", c.encoder_checkpoint);
  c.conll.token_column = j.value("token_column", c.conll.token_column);
  c.conll.tag_column = j.value("tag_column", c.conll.tag_column);
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  try {
    return experiment_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  return stage("load", [&] {
    if (config.train_path.empty()) throw Error("no training file configured");
    ExperimentData data;
    data.train = read_conll_file(config.train_path, config.conll, Split::kTrain);
    if (!config.dev_path.empty()) {
      data.dev = read_conll_file(config.dev_path, config.conll, Split::kDev);
    }
    if (!config.test_path.empty()) {
      data.test = read_conll_file(config.test_path, config.conll, Split::kTest);
    }
    return data;
  });
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  stage("config", [&] { config.validate(); });
  return run_experiment(config, load_experiment_data(config));
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const ExperimentData& data) {
  stage("config", [&] {
    if (config.seeds.empty()) throw Error("an experiment needs at least one seed");
    if (config.model.mode == TrainingMode::kFeatureBased) {
      if (config.finetune.include_dev) {
        throw Error("include_dev is only valid for fine-tuning");
      }
      if (!data.dev) throw Error("feature-based training needs a dev split");
    }
  });

  const SubwordVocab vocab = stage("vocab", [&] {
    if (!config.encoder_checkpoint.empty()) {
      return SequenceTagger::load(config.encoder_checkpoint)->vocab();
    }
    if (!config.vocab_path.empty()) return SubwordVocab::load(config.vocab_path);
    return train_vocab(data.train, config.vocab_size);
  });
  const auto labels = label_inventory(all_types(data), TagScheme::kBIOES);
  std::vector<const Corpus*> word_sources{&data.train};
  if (config.finetune.include_dev && data.dev) word_sources.push_back(&*data.dev);
  const auto words = config.model.use_word_embeddings
                         ? word_vocabulary(word_sources)
                         : std::vector<std::string>{};

  const fs::path root =
      config.output_dir.empty() ? fs::path() : fs::path(config.output_dir) / config.name;
  ExperimentResult result;
  result.name = config.name;
  std::vector<double> dev_f1s, test_f1s;

  for (uint64_t seed : config.seeds) {
    const std::string tag = " (seed " + std::to_string(seed) + ")";
    ModelConfig mc = config.model;
    mc.transformer.vocab_size = vocab.size();
    SequenceTagger model = stage("model" + tag, [&] {
      return SequenceTagger(mc, vocab, labels, words, seed);
    });
    if (!config.encoder_checkpoint.empty()) {
      stage("model" + tag, [&] {
        load_encoder_weights(model, config.encoder_checkpoint);
      });
    }

    SeedResult run;
    run.seed = seed;
    run.log = stage("train" + tag, [&] {
      if (mc.mode == TrainingMode::kFineTune) {
        return train_finetune(model, data.train, data.dev ? &*data.dev : nullptr,
                              config.finetune, seed);
      }
      return train_feature_based(model, data.train, *data.dev, config.feature,
                                 seed);
    });

    std::optional<Corpus> dev_pred, test_pred;
    std::optional<EvalReport> dev_report, test_report;
    stage("evaluate" + tag, [&] {
      if (data.dev) {
        dev_pred = tag_corpus(model, *data.dev, mc.context);
        dev_report = score(*dev_pred);
        run.dev_f1 = dev_report->micro.f1;
        dev_f1s.push_back(*run.dev_f1);
      }
      if (data.test) {
        test_pred = tag_corpus(model, *data.test, mc.context);
        test_report = score(*test_pred);
        run.test_f1 = test_report->micro.f1;
        test_f1s.push_back(*run.test_f1);
      }
    });
    run.checksum = parameter_checksum(
        static_cast<const SequenceTagger&>(model).parameters().all());

    if (!root.empty()) {
      stage("write" + tag, [&] {
        const fs::path dir = root / std::to_string(seed);
        fs::create_directories(dir);
        json snapshot = to_json(config);
        snapshot["seed"] = seed;
        snapshot["vocab_symbols"] = vocab.size();
        write_file(dir / "config.json", snapshot.dump(2) + "\n");
        model.save((dir / "model.json").string());
        vocab.save((dir / "vocab.txt").string());
        write_file(dir / "train_log.csv", run.log.to_csv());
        std::string text;
        json reports = json::object();
        if (dev_pred) {
          write_file(dir / "dev.pred.conll", write_conll(*dev_pred, true, true));
          text += "dev\n" + dev_report->to_text();
          reports["dev"] = dev_report->to_json();
        }
        if (test_pred) {
          write_file(dir / "test.pred.conll", write_conll(*test_pred, true, true));
          text += "test\n" + test_report->to_text();
          reports["test"] = test_report->to_json();
        }
        for (const std::string& w : run.log.warnings) text += "warning: " + w + "\n";
        write_file(dir / "report.txt", text);
        write_file(dir / "report.json", reports.dump(2) + "\n");
      });
    }
    result.runs.push_back(std::move(run));
  }

  if (!dev_f1s.empty()) result.dev = aggregate_runs(dev_f1s);
  if (!test_f1s.empty()) result.test = aggregate_runs(test_f1s);
  if (!root.empty()) {
    stage("write", [&] {
      write_file(root / "results.csv", results_csv({result}));
      write_file(root / "results.txt", results_table({result}));
    });
  }
  return result;
}

std::string ExperimentResult::csv_row() const {
  return name + "," + cell(dev) + "," + cell(test);
}

std::string results_csv(const std::vector<ExperimentResult>& rows) {
  std::string out = "name,dev,test\n";
  for (const ExperimentResult& r : rows) out += r.csv_row() + "\n";
  return out;
}

std::string results_table(const std::vector<ExperimentResult>& rows) {
  size_t width = 10;
  for (const ExperimentResult& r : rows) width = std::max(width, r.name.size() + 2);
  std::string out = pad_right("Variant", width) + pad_right("Dev", 16) + "Test\n";
  for (const ExperimentResult& r : rows) {
    out += pad_right(r.name, width) + pad_right(cell(r.dev), 16) + cell(r.test) +
           "\n";
  }
  return out;
}

SweepResult sweep_context(const ExperimentConfig& config,
                          const std::vector<int>& windows) {
  stage("config", [&] { config.validate(); });
  return sweep_context(config, load_experiment_data(config), windows);
}

SweepResult sweep_context(const ExperimentConfig& config,
                          const ExperimentData& data,
                          const std::vector<int>& windows) {
  if (windows.empty()) throw Error("sweep_context needs at least one window");
  for (int w : windows) {
    if (w < 0) throw Error("context windows must be non-negative");
  }
  SweepResult sweep;
  for (int w : windows) {
    ExperimentConfig c = config;
    c.model.context.window = w;
    c.name = config.name + "-w" + std::to_string(w);
    sweep.rows.push_back({w, run_experiment(c, data)});
  }
  if (!config.output_dir.empty()) {
    const fs::path dir = fs::path(config.output_dir) / config.name;
    fs::create_directories(dir);
    write_file(dir / "sweep.csv", sweep.to_csv());
    write_file(dir / "sweep.txt", sweep.to_table());
  }
  return sweep;
}

namespace {

// Per-window means of one split plus their average; empty when the split
// is missing from any row.
std::vector<double> split_means(const SweepResult& s, bool dev) {
  std::vector<double> out;
  for (const SweepRow& r : s.rows) {
    const auto& agg = dev ? r.result.dev : r.result.test;
    if (!agg) return {};
    out.push_back(agg->mean);
  }
  double total = 0.0;
  for (double v : out) total += v;
  out.push_back(total / s.rows.size());
  return out;
}

}  // namespace

std::string SweepResult::to_table() const {
  std::string out = pad_right("Split", 8);
  for (const SweepRow& r : rows) out += pad_right(std::to_string(r.window), 10);
  out += "Avg\n";
  for (bool dev : {true, false}) {
    const auto means = split_means(*this, dev);
    if (means.empty()) continue;
    out += pad_right(dev ? "dev" : "test", 8);
    for (size_t i = 0; i + 1 < means.size(); ++i) {
      out += pad_right(format2(means[i]), 10);
    }
    out += format2(means.back()) + "\n";
  }
  return out;
}

std::string SweepResult::to_csv() const {
  std::string out = "window,dev,test\n";
  for (const SweepRow& r : rows) {
    out += std::to_string(r.window) + "," + cell(r.result.dev) + "," +
           cell(r.result.test) + "\n";
  }
  const auto dev = split_means(*this, true);
  const auto test = split_means(*this, false);
  out += "avg," + (dev.empty() ? std::string("-") : format2(dev.back())) + "," +
         (test.empty() ? std::string("-") : format2(test.back())) + "\n";
  return out;
}

}  // namespace docner
