#ifndef DOCNER_EVAL_H_
#define DOCNER_EVAL_H_

#include <map>
#include <string>
#include <vector>

#include "docner/corpus.h"

#include <json.hpp>

namespace docner {

// Span counts and percentage scores for one entity type (or the micro total).
struct TypeScores {
  int gold = 0;
  int predicted = 0;
  int correct = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::map<std::string, TypeScores> per_type;
  TypeScores micro;
  double token_accuracy = 0.0;
  int tokens = 0;

  // conlleval-style text block.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

// Rounds half-up to two decimals, the precision every report uses.
double round2(double value);
std::string format2(double value);

// Exact-match span scoring with conlleval semantics. Gold labels come from
// `gold`'s gold tags. Predicted labels come from `predicted`'s prediction
// column when any token carries one, otherwise from its gold tag column.
// Both corpora must have identical sentence and token structure.
EvalReport score(const Corpus& gold, const Corpus& predicted);
// Scores a corpus' predictions against its own gold tags.
EvalReport score(const Corpus& tagged);

// f1(b) - f1(a) per entity type, in percentage points.
std::map<std::string, double> per_type_delta(const EvalReport& a,
                                             const EvalReport& b);

struct RunAggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) standard deviation
  int n_runs = 0;

  // "96.64 ± 0.14"
  std::string to_string() const;
};

RunAggregate aggregate_runs(const std::vector<double>& f1s);

}  // namespace docner

#endif  // DOCNER_EVAL_H_
