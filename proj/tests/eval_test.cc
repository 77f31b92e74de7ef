#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "docner/error.h"
#include "docner/eval.h"
#include "docner/synthetic.h"
#include "scoring_fixtures.h"

using namespace docner;

namespace {

// Corpus whose predictions are a noisy copy of random gold tags.
Corpus noisy_corpus(uint64_t seed) {
  Corpus c = synthetic::random_corpus(seed, 3, 4, 8);
  std::mt19937_64 rng(seed * 7 + 1);
  const std::vector<std::string> types{"LOC", "MISC", "ORG", "PER"};
  for (Document& d : c.documents) {
    for (Sentence& s : d.sentences) {
      const auto noise = synthetic::random_bio_tags(rng, static_cast<int>(s.tokens.size()), types);
      for (size_t i = 0; i < s.tokens.size(); ++i) {
        s.tokens[i].predicted_tag =
            std::uniform_int_distribution<int>(0, 2)(rng) == 0 ? noise[i] : s.tokens[i].gold_tag;
      }
    }
  }
  return c;
}

Corpus swapped(const Corpus& c) {
  Corpus out = c;
  for (Document& d : out.documents) {
    for (Sentence& s : d.sentences) {
      for (Token& t : s.tokens) std::swap(t.gold_tag, *t.predicted_tag);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("hand-counted fixtures") {
  for (const auto& f : fixtures::scoring_fixtures()) {
    CAPTURE(f.name);
    const EvalReport r = score(fixtures::build(f.gold, f.pred));
    CHECK(r.micro.gold == f.gold_spans);
    CHECK(r.micro.predicted == f.pred_spans);
    CHECK(r.micro.correct == f.correct);
    CHECK(format2(r.micro.precision) == f.precision);
    CHECK(format2(r.micro.recall) == f.recall);
    CHECK(format2(r.micro.f1) == f.f1);
  }
}

TEST_CASE("per-type counts of the three-sentence fixture") {
  const auto f = fixtures::scoring_fixtures()[4];
  const EvalReport r = score(fixtures::build(f.gold, f.pred));
  CHECK(r.per_type.at("PER").f1 == 100.0);
  CHECK(r.per_type.at("ORG").f1 == 100.0);
  CHECK(r.per_type.at("LOC").gold == 2);
  CHECK(r.per_type.at("LOC").correct == 1);
  CHECK(format2(r.per_type.at("LOC").f1) == "50.00");
  CHECK(r.per_type.at("MISC").predicted == 0);
  CHECK(r.per_type.at("MISC").f1 == 0.0);
  // 10 tokens, 8 tags right.
  CHECK(r.tokens == 10);
  CHECK(format2(r.token_accuracy) == "80.00");
}

TEST_CASE("report text and json") {
  const auto f = fixtures::scoring_fixtures()[4];
  const EvalReport r = score(fixtures::build(f.gold, f.pred));
  const std::string text = r.to_text();
  CHECK(text.find("processed 10 tokens with 5 phrases; found: 4 phrases; correct: 3.") == 0);
  CHECK(text.find("FB1:  66.67") != std::string::npos);
  const auto j = r.to_json();
  CHECK(j["micro"]["f1"] == 66.67);
  CHECK(j["per_type"]["LOC"]["gold"] == 2);
}

TEST_CASE("gold and prediction from separate corpora") {
  const Corpus gold = parse_conll("a B-PER\nb I-PER\nc O\n");
  const Corpus pred = parse_conll("a B-PER\nb O\nc O\n");
  CHECK(score(gold, pred).micro.f1 == 0.0);
  CHECK(score(gold, gold).micro.f1 == 100.0);
  const Corpus other = parse_conll("x B-PER\nb I-PER\nc O\n");
  CHECK_THROWS_AS(score(gold, other), Error);
  const Corpus longer = parse_conll("a O\n\nb O\n");
  CHECK_THROWS_AS(score(gold, longer), Error);
}

TEST_CASE("scoring invariants on random corpora") {
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    const Corpus c = noisy_corpus(seed);
    const EvalReport r = score(c);
    int gold = 0, pred = 0, correct = 0;
    for (const auto& [type, s] : r.per_type) {
      CHECK(s.correct <= std::min(s.gold, s.predicted));
      gold += s.gold;
      pred += s.predicted;
      correct += s.correct;
    }
    CHECK(r.micro.gold == gold);
    CHECK(r.micro.predicted == pred);
    CHECK(r.micro.correct == correct);
    if (r.micro.precision + r.micro.recall > 0) {
      CHECK(r.micro.f1 == doctest::Approx(2 * r.micro.precision * r.micro.recall /
                                          (r.micro.precision + r.micro.recall)));
    }

    // Swapping roles swaps precision and recall.
    const EvalReport s = score(swapped(c));
    CHECK(s.micro.precision == r.micro.recall);
    CHECK(s.micro.recall == r.micro.precision);

    // Sentence order and scheme do not matter.
    Corpus reversed = c;
    for (Document& d : reversed.documents) {
      std::reverse(d.sentences.begin(), d.sentences.end());
    }
    std::reverse(reversed.documents.begin(), reversed.documents.end());
    CHECK(score(reversed).micro.f1 == r.micro.f1);
    CHECK(score(convert_corpus(c, TagScheme::kBIOES)).micro.f1 == r.micro.f1);

    // No predictions at all.
    Corpus blank = c;
    for (Document& d : blank.documents) {
      for (Sentence& t : d.sentences) {
        for (Token& k : t.tokens) k.predicted_tag = "O";
      }
    }
    const EvalReport b = score(blank);
    CHECK(b.micro.precision == 0.0);
    CHECK(b.micro.recall == 0.0);
    CHECK(b.micro.f1 == 0.0);
  }
}

TEST_CASE("round2 is half-up") {
  CHECK(format2(66.665) == "66.67");
  CHECK(format2(3.125) == "3.13");
  CHECK(format2(0.004999) == "0.00");
  CHECK(format2(100.0) == "100.00");
  CHECK(round2(93.645) == doctest::Approx(93.65));
}

TEST_CASE("per_type_delta") {
  const Corpus c = noisy_corpus(3);
  const EvalReport a = score(c);
  for (const auto& [type, d] : per_type_delta(a, a)) CHECK(d == 0.0);

  EvalReport before, after;
  before.per_type["ORG"].f1 = 80.00;
  after.per_type["ORG"].f1 = 81.21;
  CHECK(format2(per_type_delta(before, after).at("ORG")) == "1.21");

  const EvalReport b = score(noisy_corpus(4));
  if (a.per_type.size() == b.per_type.size()) {
    for (const auto& [type, d] : per_type_delta(a, b)) {
      if (b.per_type.count(type)) CHECK(d == b.per_type.at(type).f1 - a.per_type.at(type).f1);
    }
  }
  EvalReport other;
  other.per_type["PER"].f1 = 1.0;
  CHECK_THROWS_AS(per_type_delta(before, other), Error);
  other.per_type["ORG"].f1 = 1.0;
  CHECK_THROWS_AS(per_type_delta(before, other), Error);
}

TEST_CASE("aggregate_runs") {
  const RunAggregate one = aggregate_runs({90.0});
  CHECK(one.mean == 90.0);
  CHECK(one.stddev == 0.0);
  CHECK(one.n_runs == 1);

  const RunAggregate three = aggregate_runs({96.64 + 0.14, 96.64 - 0.14, 96.64});
  CHECK(three.to_string() == "96.64 ± 0.14");

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(50.0, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> xs{u(rng), u(rng), u(rng)};
    const double mean = (xs[0] + xs[1] + xs[2]) / 3.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const RunAggregate a = aggregate_runs(xs);
    CHECK(std::abs(a.mean - mean) < 1e-12);
    CHECK(std::abs(a.stddev - std::sqrt(ss / 2.0)) < 1e-12);
  }
  CHECK_THROWS_AS(aggregate_runs({}), Error);
}
