#include "docner/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "docner/error.h"

namespace docner {

namespace {

void finalize(TypeScores& s) {
  s.precision = s.predicted > 0 ? 100.0 * s.correct / s.predicted : 0.0;
  s.recall = s.gold > 0 ? 100.0 * s.correct / s.gold : 0.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
}

bool has_predictions(const Corpus& c) {
  for (const Sentence* s : all_sentences(c)) {
    for (const Token& t : s->tokens) {
      if (t.predicted_tag) return true;
    }
  }
  return false;
}

std::string pad_left(const std::string& s, size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

double round2(double value) {
  // The epsilon absorbs binary representation error (66.665 is stored as
  // 66.66499...).
  return std::floor(value * 100.0 + 0.5 + 1e-7) / 100.0;
}

std::string format2(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", round2(value));
  return buf;
}

EvalReport score(const Corpus& gold, const Corpus& predicted) {
  const auto gold_sentences = all_sentences(gold);
  const auto pred_sentences = all_sentences(predicted);
  if (gold_sentences.size() != pred_sentences.size()) {
    throw Error("gold has " + std::to_string(gold_sentences.size()) +
                " sentences, prediction has " +
                std::to_string(pred_sentences.size()));
  }
  const bool use_pred_column = has_predictions(predicted);

  EvalReport report;
  int token_matches = 0;
  for (size_t i = 0; i < gold_sentences.size(); ++i) {
    const Sentence& g = *gold_sentences[i];
    const Sentence& p = *pred_sentences[i];
    bool same = g.tokens.size() == p.tokens.size();
    for (size_t k = 0; same && k < g.tokens.size(); ++k) {
      same = g.tokens[k].text == p.tokens[k].text;
    }
    if (!same) {
      throw Error("sentence " + std::to_string(i) +
                  " differs between gold and prediction");
    }
    const auto gold_tags = g.gold_tags();
    const auto pred_tags = use_pred_column ? p.predicted_tags() : p.gold_tags();
    const auto gold_spans = spans_from_tags(gold_tags, gold.scheme);
    const auto pred_spans = spans_from_tags(pred_tags, predicted.scheme);

    for (const Span& s : gold_spans) ++report.per_type[s.entity_type].gold;
    for (const Span& s : pred_spans) ++report.per_type[s.entity_type].predicted;
    const std::set<Span> gold_set(gold_spans.begin(), gold_spans.end());
    for (const Span& s : pred_spans) {
      if (gold_set.count(s)) ++report.per_type[s.entity_type].correct;
    }

    const auto gold_bio = convert_scheme(gold_tags, gold.scheme, TagScheme::kBIO);
    const auto pred_bio =
        convert_scheme(pred_tags, predicted.scheme, TagScheme::kBIO);
    for (size_t k = 0; k < gold_bio.size(); ++k) {
      token_matches += gold_bio[k] == pred_bio[k];
    }
    report.tokens += static_cast<int>(gold_bio.size());
  }

  for (auto& [type, s] : report.per_type) {
    finalize(s);
    report.micro.gold += s.gold;
    report.micro.predicted += s.predicted;
    report.micro.correct += s.correct;
  }
  finalize(report.micro);
  report.token_accuracy =
      report.tokens > 0 ? 100.0 * token_matches / report.tokens : 0.0;
  return report;
}

EvalReport score(const Corpus& tagged) { return score(tagged, tagged); }

std::string EvalReport::to_text() const {
  std::string out = "processed " + std::to_string(tokens) + " tokens with " +
                    std::to_string(micro.gold) + " phrases; found: " +
                    std::to_string(micro.predicted) + " phrases; correct: " +
                    std::to_string(micro.correct) + ".\n";
  out += "accuracy: " + pad_left(format2(token_accuracy), 6) +
         "%; precision: " + pad_left(format2(micro.precision), 6) +
         "%; recall: " + pad_left(format2(micro.recall), 6) +
         "%; FB1: " + pad_left(format2(micro.f1), 6) + "\n";
  for (const auto& [type, s] : per_type) {
    out += pad_left(type, 17) + ": precision: " +
           pad_left(format2(s.precision), 6) + "%; recall: " +
           pad_left(format2(s.recall), 6) + "%; FB1: " +
           pad_left(format2(s.f1), 6) + "  " + std::to_string(s.predicted) +
           "\n";
  }
  return out;
}

nlohmann::json EvalReport::to_json() const {
  auto scores = [](const TypeScores& s) {
    return nlohmann::json{{"gold", s.gold},
                          {"predicted", s.predicted},
                          {"correct", s.correct},
                          {"precision", round2(s.precision)},
                          {"recall", round2(s.recall)},
                          {"f1", round2(s.f1)}};
  };
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, s] : per_type) types[type] = scores(s);
  return {{"tokens", tokens},
          {"token_accuracy", round2(token_accuracy)},
          {"micro", scores(micro)},
          {"per_type", std::move(types)}};
}

std::map<std::string, double> per_type_delta(const EvalReport& a,
                                             const EvalReport& b) {
  std::map<std::string, double> out;
  if (a.per_type.size() != b.per_type.size()) {
    throw Error("reports cover different entity types");
  }
  for (const auto& [type, s] : a.per_type) {
    auto it = b.per_type.find(type);
    if (it == b.per_type.end()) {
      throw Error("entity type " + type + " missing from the second report");
    }
    out[type] = it->second.f1 - s.f1;
  }
  return out;
}

std::string RunAggregate::to_string() const {
  return format2(mean) + " ± " + format2(stddev);
}

RunAggregate aggregate_runs(const std::vector<double>& f1s) {
  if (f1s.empty()) throw Error("cannot aggregate zero runs");
  RunAggregate agg;
  agg.n_runs = static_cast<int>(f1s.size());
  double total = 0.0;
  for (double f : f1s) total += f;
  agg.mean = total / agg.n_runs;
  if (agg.n_runs > 1) {
    double ss = 0.0;
    for (double f : f1s) ss += (f - agg.mean) * (f - agg.mean);
    agg.stddev = std::sqrt(ss / (agg.n_runs - 1));
  }
  return agg;
}

}  // namespace docner
