// docner command line: vocab training, model training, tagging, scoring and
// experiment grids.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "docner/error.h"
#include "docner/experiment.h"
#include "docner/synthetic.h"

namespace fs = std::filesystem;
using namespace docner;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

// Flags shared by every command that builds an experiment config.
struct ExperimentFlags {
  std::string config_path;
  std::string mode;
  std::string name;
  std::string train, dev, test, vocab, output_dir;
  std::vector<uint64_t> seeds;
  std::optional<int> context_window;
  std::optional<bool> enforce_boundaries;
  std::optional<double> lr_scale;
  std::optional<int> epochs;
  std::string head, layer_strategy;
  std::optional<bool> word_embeddings, constrain_transitions;
  bool include_dev = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config")
        ->check(CLI::ExistingFile);
    cmd->add_option("--mode", mode, "finetune or feature")
        ->check(CLI::IsMember({"finetune", "feature"}));
    cmd->add_option("--name", name, "run name");
    cmd->add_option("--train", train, "training CoNLL file");
    cmd->add_option("--dev", dev, "dev CoNLL file");
    cmd->add_option("--test", test, "test CoNLL file");
    cmd->add_option("--vocab", vocab, "subword vocab file");
    cmd->add_option("--output-dir", output_dir, "root of runs/<name>/<seed>/");
    cmd->add_option("--context-window", context_window,
                    "context subtokens per side");
    cmd->add_option("--enforce-boundaries", enforce_boundaries,
                    "keep context inside the document (true|false)");
    cmd->add_option("--lr-scale", lr_scale, "fine-tuning learning rate multiplier");
    cmd->add_option("--epochs", epochs, "maximum epochs");
    cmd->add_option("--head", head, "linear or crf")
        ->check(CLI::IsMember({"linear", "crf"}));
    cmd->add_option("--layer-strategy", layer_strategy,
                    "last_layer, all_layer_mean or last_four_concat")
        ->check(CLI::IsMember({"last_layer", "all_layer_mean", "last_four_concat"}));
    cmd->add_option("--word-embeddings", word_embeddings,
                    "concatenate static word embeddings (true|false)");
    cmd->add_option("--constrain-transitions", constrain_transitions,
                    "forbid invalid BIOES bigrams when decoding (true|false)");
    cmd->add_flag("--include-dev", include_dev,
                  "train on train+dev (fine-tuning only)");
  }

  ExperimentConfig build() const {
    ExperimentConfig c;
    if (!config_path.empty()) c = load_experiment_config(config_path);
    if (!mode.empty()) {
      const TrainingMode m = parse_mode(mode);
      if (m != c.model.mode) {
        // Switching regimes resets the mode-specific model defaults, then
        // re-applies what the config file set.
        nlohmann::json j = config_path.empty()
                               ? nlohmann::json::object()
                               : nlohmann::json::parse(read_text(config_path));
        j["mode"] = mode;
        c = experiment_config_from_json(j);
      }
    }
    if (!name.empty()) c.name = name;
    if (!train.empty()) c.train_path = train;
    if (!dev.empty()) c.dev_path = dev;
    if (!test.empty()) c.test_path = test;
    if (!vocab.empty()) c.vocab_path = vocab;
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (!seeds.empty()) c.seeds = seeds;
    if (context_window) c.model.context.window = *context_window;
    if (enforce_boundaries) c.model.context.enforce_boundaries = *enforce_boundaries;
    if (lr_scale) c.finetune.lr_scale = *lr_scale;
    if (epochs) {
      c.finetune.max_epochs = *epochs;
      c.feature.max_epochs = *epochs;
    }
    if (!head.empty()) c.model.head = parse_head(head);
    if (!layer_strategy.empty()) c.model.layer_strategy = parse_layer_strategy(layer_strategy);
    if (word_embeddings) c.model.use_word_embeddings = *word_embeddings;
    if (constrain_transitions) c.model.constrain_transitions = *constrain_transitions;
    if (include_dev) c.finetune.include_dev = true;
    return c;
  }
};

void print_result(const ExperimentResult& r) {
  for (const SeedResult& s : r.runs) {
    std::printf("seed %llu:", static_cast<unsigned long long>(s.seed));
    if (s.dev_f1) std::printf(" dev F1 %s", format2(*s.dev_f1).c_str());
    if (s.test_f1) std::printf(" test F1 %s", format2(*s.test_f1).c_str());
    std::printf(" (%zu epochs)\n", s.log.epochs.size());
    for (const std::string& w : s.log.warnings) std::printf("  warning: %s\n", w.c_str());
  }
  std::cout << results_table({r});
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw Error("not an integer: " + item);
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document-context named entity recognition"};
  app.require_subcommand(1);

  // train-vocab
  auto* vocab_cmd = app.add_subcommand("train-vocab", "train a BPE subword vocab");
  std::vector<std::string> vocab_inputs;
  int vocab_size = 4000;
  std::string vocab_out;
  vocab_cmd->add_option("inputs", vocab_inputs, "CoNLL files")
      ->required()
      ->check(CLI::ExistingFile);
  vocab_cmd->add_option("--size", vocab_size, "target vocab size");
  vocab_cmd->add_option("--out", vocab_out, "output vocab file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model");
  ExperimentFlags train_flags;
  train_flags.attach(train_cmd);
  uint64_t train_seed = 1;
  train_cmd->add_option("--seed", train_seed, "random seed");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "tag a CoNLL file");
  std::string model_path, predict_in, predict_out, predict_vocab;
  std::optional<int> predict_window;
  std::optional<bool> predict_enforce;
  predict_cmd->add_option("--model", model_path, "checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--input", predict_in, "CoNLL input")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--output", predict_out, "output file (default stdout)");
  predict_cmd->add_option("--vocab", predict_vocab,
                          "vocab file that must match the checkpoint")
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--context-window", predict_window,
                          "override the trained context window");
  predict_cmd->add_option("--enforce-boundaries", predict_enforce,
                          "keep context inside the document (true|false)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions");
  std::string gold_path, pred_path, eval_json;
  eval_cmd->add_option("--gold", gold_path, "gold CoNLL file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", pred_path,
                       "CoNLL file whose last column is the prediction")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--json", eval_json, "also write the report as JSON");

  // run-experiment
  auto* exp_cmd = app.add_subcommand("run-experiment", "train and score over seeds");
  ExperimentFlags exp_flags;
  exp_flags.attach(exp_cmd);
  exp_cmd->add_option("--seeds", exp_flags.seeds, "seeds, e.g. --seeds 1 2 3");

  // sweep-context
  auto* sweep_cmd = app.add_subcommand("sweep-context", "one experiment per window");
  ExperimentFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--seeds", sweep_flags.seeds, "seeds");
  std::string windows_text = "48,64,96,128";
  sweep_cmd->add_option("--windows", windows_text, "comma-separated windows");

  // make-synthetic
  auto* synth_cmd = app.add_subcommand("make-synthetic", "write a synthetic corpus");
  std::string synth_kind = "template", synth_out;
  uint64_t synth_seed = 1;
  int synth_sentences = 50;
  bool synth_adversarial = false, synth_entity_first = false;
  synth_cmd->add_option("--kind", synth_kind, "template, ambiguity or random")
      ->check(CLI::IsMember({"template", "ambiguity", "random"}));
  synth_cmd->add_option("--seed", synth_seed, "random seed");
  synth_cmd->add_option("--sentences", synth_sentences, "sentence count");
  synth_cmd->add_flag("--adversarial", synth_adversarial,
                      "alternate document topics (ambiguity only)");
  synth_cmd->add_flag("--entity-first", synth_entity_first,
                      "start documents with an entity sentence (ambiguity only)");
  synth_cmd->add_option("--out", synth_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*vocab_cmd) {
      std::vector<Corpus> corpora;
      for (const std::string& p : vocab_inputs) corpora.push_back(read_conll_file(p));
      std::vector<const Corpus*> ptrs;
      for (const Corpus& c : corpora) ptrs.push_back(&c);
      const SubwordVocab vocab = train_vocab(ptrs, vocab_size);
      vocab.save(vocab_out);
      std::printf("%d symbols (%d characters, %zu merges) -> %s\n", vocab.size(),
                  vocab.alphabet_size(), vocab.merges().size(), vocab_out.c_str());
    } else if (*train_cmd) {
      ExperimentConfig c = train_flags.build();
      c.seeds = {train_seed};
      print_result(run_experiment(c));
      if (!c.output_dir.empty()) {
        std::printf("checkpoint: %s\n",
                    (fs::path(c.output_dir) / c.name / std::to_string(train_seed) /
                     "model.json")
                        .c_str());
      }
    } else if (*predict_cmd) {
      auto model = SequenceTagger::load(model_path);
      if (!predict_vocab.empty() && !(SubwordVocab::load(predict_vocab) == model->vocab())) {
        throw Error("vocab " + predict_vocab + " does not match the checkpoint");
      }
      ContextConfig context = model->config().context;
      if (predict_window) context.window = *predict_window;
      if (predict_enforce) context.enforce_boundaries = *predict_enforce;
      const Corpus input = read_conll_file(predict_in);
      if (input.sentence_count() == 0) {
        write_text(predict_out, "");
        return 0;
      }
      // The input's last column is the gold tag; predictions are appended.
      write_text(predict_out, write_conll(tag_corpus(*model, input, context), true, true));
    } else if (*eval_cmd) {
      const Corpus gold = read_conll_file(gold_path);
      const Corpus pred = read_conll_file(pred_path);
      const EvalReport report = score(gold, pred);
      std::cout << report.to_text();
      if (!eval_json.empty()) write_text(eval_json, report.to_json().dump(2) + "\n");
    } else if (*exp_cmd) {
      print_result(run_experiment(exp_flags.build()));
    } else if (*sweep_cmd) {
      const SweepResult sweep =
          sweep_context(sweep_flags.build(), parse_int_list(windows_text));
      std::cout << sweep.to_table();
    } else if (*synth_cmd) {
      Corpus corpus;
      if (synth_kind == "template") {
        corpus = synthetic::template_corpus(synth_seed, synth_sentences);
      } else if (synth_kind == "random") {
        corpus = synthetic::random_corpus(synth_seed, std::max(1, synth_sentences / 5),
                                          5, 12);
      } else {
        synthetic::AmbiguityOptions o;
        o.sentences = synth_sentences;
        o.adversarial_boundaries = synth_adversarial;
        o.entity_first = synth_entity_first;
        corpus = synthetic::ambiguity_corpus(synth_seed, o);
      }
      write_text(synth_out, write_conll(corpus, false, true));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
