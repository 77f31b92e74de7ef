#include <doctest.h>

#include "docner/context.h"
#include "docner/error.h"
#include "docner/synthetic.h"
#include "oracles.h"

using namespace docner;

namespace {

Corpus sentences_corpus(const std::vector<std::vector<std::vector<std::string>>>& docs) {
  Corpus c;
  for (size_t d = 0; d < docs.size(); ++d) {
    c.documents.push_back({"doc-" + std::to_string(d), {}});
    for (const auto& words : docs[d]) {
      Sentence s;
      for (const auto& w : words) s.tokens.push_back({w, "O", {}});
      s.doc_index = static_cast<int>(d);
      s.position_in_doc = static_cast<int>(c.documents[d].sentences.size());
      c.documents[d].sentences.push_back(s);
    }
  }
  return c;
}

}  // namespace

TEST_CASE("window zero gives BOS core EOS") {
  const Corpus c = synthetic::random_corpus(1, 3, 4, 6);
  const SubwordVocab v = train_vocab(c, 80);
  EncodedCorpus enc(c, v);
  const auto ctx = build_context(enc, 1, 0, {0, false});
  CHECK(ctx.left_ids.empty());
  CHECK(ctx.right_ids.empty());
  std::vector<int> expected{SubwordVocab::kBos};
  const auto& core = enc.encoding(1, 0).ids;
  expected.insert(expected.end(), core.begin(), core.end());
  expected.push_back(SubwordVocab::kEos);
  CHECK(ctx.assembled() == expected);
  CHECK(ctx.core_start == 1);
}

TEST_CASE("enforced context never reaches the previous document") {
  const Corpus c = sentences_corpus({{{"alpha", "beta"}, {"gamma"}}, {{"delta"}, {"eps"}}});
  const SubwordVocab v = train_vocab(c, 40);
  EncodedCorpus enc(c, v);
  const auto enforced = build_context(enc, 1, 0, {64, true});
  CHECK(enforced.left_ids.empty());
  const auto open = build_context(enc, 1, 0, {64, false});
  CHECK_FALSE(open.left_ids.empty());
  // Right context of the last sentence of document 0 stops at the boundary.
  CHECK(build_context(enc, 0, 1, {64, true}).right_ids.empty());
  CHECK_FALSE(build_context(enc, 0, 1, {64, false}).right_ids.empty());
}

TEST_CASE("long document middle sentence gets full windows") {
  std::vector<std::vector<std::string>> doc;
  for (int i = 0; i < 40; ++i) doc.push_back({"word", "another", "token"});
  const Corpus c = sentences_corpus({doc});
  const SubwordVocab v = train_vocab(c, 0 + 14);  // character level
  EncodedCorpus enc(c, v);
  const ContextConfig cfg{64, true};
  const auto ctx = build_context(enc, 0, 20, cfg);
  CHECK(ctx.left_ids.size() == 64);
  CHECK(ctx.right_ids.size() == 64);
  const auto ref = oracles::context(c, v, 0, 20, cfg);
  CHECK(ctx.left_ids == ref.left_ids);
  CHECK(ctx.right_ids == ref.right_ids);
}

TEST_CASE("context matches the concatenate-and-slice oracle") {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    const Corpus c = synthetic::random_corpus(seed, 4, 5, 8);
    const SubwordVocab v = train_vocab(c, 60);
    EncodedCorpus enc(c, v);
    for (int window : {0, 1, 3, 48, 64}) {
      for (bool enforce : {false, true}) {
        const ContextConfig cfg{window, enforce};
        for (int d = 0; d < enc.document_count(); ++d) {
          for (int p = 0; p < enc.sentence_count(d); ++p) {
            const auto got = build_context(enc, d, p, cfg);
            const auto want = oracles::context(c, v, d, p, cfg);
            REQUIRE(got.left_ids == want.left_ids);
            REQUIRE(got.right_ids == want.right_ids);
            REQUIRE(got.core.ids == want.core.ids);
            REQUIRE(got.core_start == want.core_start);
            const auto [l, r] = context_coverage(enc, d, p, cfg);
            REQUIRE(l == static_cast<int>(got.left_ids.size()));
            REQUIRE(r == static_cast<int>(got.right_ids.size()));
          }
        }
      }
    }
  }
}

TEST_CASE("coverage examples") {
  const Corpus single = sentences_corpus({{{"only", "one"}}});
  const SubwordVocab v1 = train_vocab(single, 30);
  EncodedCorpus e1(single, v1);
  CHECK(context_coverage(e1, 0, 0, {64, false}) == std::pair<int, int>{0, 0});

  // Character-level vocab: "abcdefghij" is 10 subtokens.
  const Corpus two = sentences_corpus({{{"abcdefghij"}, {"k"}}});
  const SubwordVocab v2 = train_vocab(two, 4 + 11);
  EncodedCorpus e2(two, v2);
  CHECK(context_coverage(e2, 0, 1, {64, true}).first == 10);

  std::vector<std::vector<std::string>> doc;
  for (int i = 0; i < 60; ++i) doc.push_back({"xyz"});
  const Corpus long_doc = sentences_corpus({doc});
  const SubwordVocab v3 = train_vocab(long_doc, 4 + 3);
  EncodedCorpus e3(long_doc, v3);
  CHECK(context_coverage(e3, 0, 30, {48, false}) == std::pair<int, int>{48, 48});
  CHECK(context_coverage(e3, 0, 30, {64, false}) == std::pair<int, int>{64, 64});
}

TEST_CASE("monotonicity, enforcement dominance and core preservation") {
  for (uint64_t seed = 100; seed < 120; ++seed) {
    const Corpus c = synthetic::random_corpus(seed, 3, 4, 7);
    const SubwordVocab v = train_vocab(c, 50);
    EncodedCorpus enc(c, v);
    for (int d = 0; d < enc.document_count(); ++d) {
      for (int p = 0; p < enc.sentence_count(d); ++p) {
        std::pair<int, int> prev{0, 0};
        const auto base = build_context(enc, d, p, {0, false});
        for (int w = 0; w <= 70; w += 7) {
          const auto open = context_coverage(enc, d, p, {w, false});
          const auto closed = context_coverage(enc, d, p, {w, true});
          CHECK(open.first >= prev.first);
          CHECK(open.second >= prev.second);
          CHECK(closed.first <= open.first);
          CHECK(closed.second <= open.second);
          prev = open;
          const auto ctx = build_context(enc, d, p, {w, false});
          CHECK(ctx.core.ids == base.core.ids);
          const auto align = ctx.core_alignment();
          for (size_t t = 0; t < align.size(); ++t) {
            CHECK(align[t] - ctx.core_start == base.core.first_subtoken_of_token[t]);
          }
        }
      }
    }
  }
}

TEST_CASE("convenience build_context agrees with the cached form") {
  const Corpus c = synthetic::random_corpus(9, 3, 3, 5);
  const SubwordVocab v = train_vocab(c, 50);
  EncodedCorpus enc(c, v);
  const Sentence& s = c.documents[1].sentences[0];
  const auto a = build_context(s, c, v, {5, false});
  const auto b = build_context(enc, 1, 0, {5, false});
  CHECK(a.assembled() == b.assembled());
}

TEST_CASE("fit_context trims the outer ends symmetrically") {
  ContextualizedSentence ctx;
  ctx.left_ids = {10, 11, 12, 13, 14, 15};
  ctx.core.ids = {20, 21};
  ctx.core.first_subtoken_of_token = {0, 1};
  ctx.core.subtoken_count_per_token = {1, 1};
  ctx.right_ids = {30, 31};
  ctx.core_start = 7;
  // 1 + 6 + 2 + 2 + 1 = 12 subtokens; fit into 8 drops 4.
  CHECK(fit_context(ctx, 8) == 4);
  CHECK(ctx.assembled_length() == 8);
  CHECK(ctx.left_ids == std::vector<int>{14, 15});
  CHECK(ctx.right_ids == std::vector<int>{30, 31});
  CHECK(ctx.core_start == 3);
  // Once balanced, both sides shrink alternately.
  CHECK(fit_context(ctx, 6) == 2);
  CHECK(ctx.left_ids == std::vector<int>{15});
  CHECK(ctx.right_ids == std::vector<int>{30});
  CHECK(fit_context(ctx, 100) == 0);
  CHECK_THROWS_AS(fit_context(ctx, 3), Error);
}
