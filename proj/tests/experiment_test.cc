#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "docner/error.h"
#include "docner/experiment.h"
#include "docner/synthetic.h"

namespace fs = std::filesystem;
using namespace docner;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Fresh scratch directory, removed on scope exit.
struct ScratchDir {
  fs::path path;
  ScratchDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("docner-test-" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ExperimentConfig tiny_config(TrainingMode mode) {
  ExperimentConfig c;
  c.name = "tiny";
  c.model = ModelConfig::defaults(mode);
  c.model.transformer.layers = 1;
  c.model.transformer.heads = 2;
  c.model.transformer.model_dim = 8;
  c.model.transformer.ff_dim = 16;
  c.model.transformer.max_positions = 96;
  c.model.lstm_hidden = 4;
  c.model.word_embedding_dim = 4;
  c.model.context.window = 8;
  c.finetune.max_epochs = 2;
  c.feature.max_epochs = 2;
  c.vocab_size = 80;
  c.output_dir = "";
  return c;
}

ExperimentData tiny_data() {
  ExperimentData d;
  d.train = synthetic::template_corpus(1, 12);
  d.dev = synthetic::template_corpus(2, 6);
  d.dev->split = Split::kDev;
  d.test = synthetic::template_corpus(3, 6);
  d.test->split = Split::kTest;
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DOCNER_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("a single seed has zero spread") {
  const ExperimentResult r = run_experiment(tiny_config(TrainingMode::kFineTune), tiny_data());
  REQUIRE(r.runs.size() == 1);
  REQUIRE(r.dev);
  REQUIRE(r.test);
  CHECK(r.dev->stddev == 0.0);
  CHECK(r.dev->mean == *r.runs[0].dev_f1);
  CHECK(r.test->n_runs == 1);
  CHECK(r.csv_row().rfind("tiny,", 0) == 0);
  CHECK(r.csv_row().find("± 0.00") != std::string::npos);
}

TEST_CASE("experiments are reproducible on disk") {
  ScratchDir a, b;
  ExperimentConfig c = tiny_config(TrainingMode::kFineTune);
  c.seeds = {1, 2};
  const ExperimentData data = tiny_data();
  c.output_dir = a.path.string();
  const ExperimentResult ra = run_experiment(c, data);
  c.output_dir = b.path.string();
  const ExperimentResult rb = run_experiment(c, data);

  for (size_t i = 0; i < ra.runs.size(); ++i) {
    CHECK(ra.runs[i].checksum == rb.runs[i].checksum);
    CHECK(ra.runs[i].dev_f1 == rb.runs[i].dev_f1);
    CHECK(ra.runs[i].test_f1 == rb.runs[i].test_f1);
  }
  CHECK(ra.csv_row() == rb.csv_row());
  // Wall-clock seconds in train_log.csv legitimately differ between runs.
  for (const std::string seed : {"1", "2"}) {
    for (const char* file : {"model.json", "vocab.txt", "dev.pred.conll",
                             "test.pred.conll", "report.txt", "report.json"}) {
      CAPTURE(file);
      const fs::path pa = a.path / "tiny" / seed / file;
      REQUIRE(fs::exists(pa));
      CHECK(slurp(pa) == slurp(b.path / "tiny" / seed / file));
    }
    const auto snapshot = nlohmann::json::parse(slurp(a.path / "tiny" / seed / "config.json"));
    CHECK(snapshot["seed"] == std::stoull(seed));
    CHECK(fs::exists(a.path / "tiny" / seed / "train_log.csv"));
  }
  CHECK(slurp(a.path / "tiny" / "results.csv") == slurp(b.path / "tiny" / "results.csv"));
}

TEST_CASE("saved checkpoint reproduces the run's predictions") {
  ScratchDir dir;
  ExperimentConfig c = tiny_config(TrainingMode::kFineTune);
  c.output_dir = dir.path.string();
  const ExperimentData data = tiny_data();
  run_experiment(c, data);
  const auto model = SequenceTagger::load((dir.path / "tiny" / "1" / "model.json").string());
  const Corpus tagged = tag_corpus(*model, *data.test, model->config().context);
  CHECK(write_conll(tagged, true, true) == slurp(dir.path / "tiny" / "1" / "test.pred.conll"));
}

TEST_CASE("context sweep") {
  const ExperimentConfig c = tiny_config(TrainingMode::kFineTune);
  const ExperimentData data = tiny_data();

  const SweepResult same = sweep_context(c, data, {4, 4});
  REQUIRE(same.rows.size() == 2);
  CHECK(same.rows[0].result.csv_row() == same.rows[1].result.csv_row());
  CHECK(same.rows[0].result.runs[0].checksum == same.rows[1].result.runs[0].checksum);

  ExperimentConfig direct = c;
  direct.model.context.window = 4;
  const ExperimentResult r = run_experiment(direct, data);
  CHECK(r.runs[0].checksum == same.rows[0].result.runs[0].checksum);
  CHECK(r.dev->mean == same.rows[0].result.dev->mean);
  CHECK(same.rows[0].result.name == "tiny-w4");

  const std::string csv = same.to_csv();
  CHECK(csv.rfind("window,dev,test\n4,", 0) == 0);
  CHECK(csv.find("\navg,") != std::string::npos);
  CHECK(same.to_table().find("Avg") != std::string::npos);

  CHECK_THROWS_AS(sweep_context(c, data, {}), Error);
  CHECK_THROWS_AS(sweep_context(c, data, {4, -1}), Error);
}

TEST_CASE("eight-variant grid runs end to end") {
  const ExperimentData data = tiny_data();
  std::vector<ExperimentResult> rows;
  for (HeadType head : {HeadType::kLinear, HeadType::kCrf}) {
    for (bool words : {false, true}) {
      for (int window : {0, 8}) {
        ExperimentConfig c = tiny_config(TrainingMode::kFineTune);
        c.model.head = head;
        c.model.use_word_embeddings = words;
        c.model.context.window = window;
        c.finetune.max_epochs = 1;
        c.name = std::string(head_name(head)) + (words ? "+we" : "") + "-w" +
                 std::to_string(window);
        const ExperimentResult r = run_experiment(c, data);
        CAPTURE(c.name);
        REQUIRE(r.test);
        CHECK(r.test->mean >= 0.0);
        CHECK(r.test->mean <= 100.0);
        rows.push_back(r);
      }
    }
  }
  const std::string table = results_table(rows);
  CHECK(std::count(table.begin(), table.end(), '\n') == 9);
  CHECK(results_csv(rows).rfind("name,dev,test\n", 0) == 0);
}

TEST_CASE("feature-based experiment") {
  ExperimentConfig c = tiny_config(TrainingMode::kFeatureBased);
  const ExperimentResult r = run_experiment(c, tiny_data());
  REQUIRE(r.runs.size() == 1);
  CHECK(r.runs[0].log.epochs.size() <= 2);

  c.finetune.include_dev = true;
  CHECK_THROWS_WITH_AS(run_experiment(c, tiny_data()), doctest::Contains("config"), Error);

  c.finetune.include_dev = false;
  ExperimentData no_dev = tiny_data();
  no_dev.dev.reset();
  CHECK_THROWS_AS(run_experiment(c, no_dev), Error);
}

TEST_CASE("experiment config JSON round trip") {
  ExperimentConfig c = tiny_config(TrainingMode::kFineTune);
  c.name = "round-trip";
  c.seeds = {3, 1, 4};
  c.train_path = "a.conll";
  c.dev_path = "b.conll";
  c.finetune.lr_scale = 600;
  c.finetune.include_dev = true;
  c.model.head = HeadType::kCrf;
  c.model.context = {48, true};
  const nlohmann::json j = to_json(c);
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.seeds == c.seeds);
  CHECK(back.model.context.window == 48);
  CHECK(back.model.context.enforce_boundaries);
  CHECK(back.finetune.lr_scale == 600);

  ExperimentConfig f = tiny_config(TrainingMode::kFeatureBased);
  f.feature.patience = 5;
  const ExperimentConfig fb = experiment_config_from_json(to_json(f));
  CHECK(fb.model.mode == TrainingMode::kFeatureBased);
  CHECK(fb.feature.patience == 5);
  CHECK(to_json(fb) == to_json(f));
}

TEST_CASE("config validation names missing files") {
  ExperimentConfig c;
  c.train_path = "/nonexistent/train.conll";
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_WITH_AS(run_experiment(c), doctest::Contains("config"), Error);
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("command line round trip") {
  ScratchDir dir;
  const fs::path train = dir.path / "train.conll";
  const fs::path test = dir.path / "test.conll";
  const fs::path config = dir.path / "config.json";
  REQUIRE(run_cli("make-synthetic --kind template --seed 1 --sentences 12 --out " +
                  train.string()) == 0);
  REQUIRE(run_cli("make-synthetic --kind template --seed 3 --sentences 6 --out " +
                  test.string()) == 0);
  CHECK(read_conll_file(train.string()).sentence_count() == 12);

  ExperimentConfig c = tiny_config(TrainingMode::kFineTune);
  c.output_dir = (dir.path / "runs").string();
  spit(config, to_json(c).dump(2));
  REQUIRE(run_cli("train --config " + config.string() + " --train " + train.string() +
                  " --test " + test.string() + " --name cli --seed 7") == 0);
  const fs::path model = dir.path / "runs" / "cli" / "7" / "model.json";
  REQUIRE(fs::exists(model));

  const fs::path pred = dir.path / "pred.conll";
  REQUIRE(run_cli("predict --model " + model.string() + " --input " + test.string() +
                  " --output " + pred.string()) == 0);
  CHECK(slurp(pred) == slurp(dir.path / "runs" / "cli" / "7" / "test.pred.conll"));

  const fs::path report = dir.path / "report.json";
  REQUIRE(run_cli("evaluate --gold " + test.string() + " --pred " + pred.string() +
                  " --json " + report.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(report));
  const auto saved = nlohmann::json::parse(slurp(dir.path / "runs" / "cli" / "7" / "report.json"));
  CHECK(j == saved["test"]);

  // Empty input gives empty output.
  const fs::path empty = dir.path / "empty.conll";
  const fs::path empty_out = dir.path / "empty.out";
  spit(empty, "");
  REQUIRE(run_cli("predict --model " + model.string() + " --input " + empty.string() +
                  " --output " + empty_out.string()) == 0);
  CHECK(slurp(empty_out).empty());

  // Errors exit nonzero.
  CHECK(run_cli("train --config " + config.string() + " --train " + train.string() +
                " --mode feature --include-dev") != 0);
  CHECK(run_cli("predict --model " + model.string() + " --input /nonexistent") != 0);
}
