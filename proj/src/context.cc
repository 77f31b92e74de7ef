#include "docner/context.h"

#include <algorithm>

#include "docner/error.h"

namespace docner {

std::vector<int> ContextualizedSentence::assembled() const {
  std::vector<int> ids;
  ids.reserve(assembled_length());
  ids.push_back(SubwordVocab::kBos);
  ids.insert(ids.end(), left_ids.begin(), left_ids.end());
  ids.insert(ids.end(), core.ids.begin(), core.ids.end());
  ids.insert(ids.end(), right_ids.begin(), right_ids.end());
  ids.push_back(SubwordVocab::kEos);
  return ids;
}

int ContextualizedSentence::assembled_length() const {
  return static_cast<int>(left_ids.size() + core.ids.size() + right_ids.size()) +
         2;
}

std::vector<int> ContextualizedSentence::core_alignment() const {
  std::vector<int> out = core.first_subtoken_of_token;
  for (int& i : out) i += core_start;
  return out;
}

EncodedCorpus::EncodedCorpus(const Corpus& corpus, const SubwordVocab& vocab)
    : corpus_(&corpus) {
  encodings_.reserve(corpus.documents.size());
  for (const Document& d : corpus.documents) {
    auto& docs = encodings_.emplace_back();
    docs.reserve(d.sentences.size());
    for (const Sentence& s : d.sentences) docs.push_back(encode(s.texts(), vocab));
  }
}

namespace {

// Gathers up to `window` subtokens walking away from (doc, position) in
// direction `step` (-1 left, +1 right), excluding the sentence itself.
std::vector<int> gather(const EncodedCorpus& encoded, int doc, int position,
                        int step, const ContextConfig& config) {
  std::vector<int> out;
  if (config.window <= 0) return out;
  std::vector<const std::vector<int>*> pieces;
  int have = 0;
  int d = doc;
  int p = position + step;
  while (have < config.window) {
    if (p < 0 || p >= encoded.sentence_count(d)) {
      if (config.enforce_boundaries) break;
      d += step;
      if (d < 0 || d >= encoded.document_count()) break;
      p = step < 0 ? encoded.sentence_count(d) - 1 : 0;
      continue;
    }
    const auto& ids = encoded.encoding(d, p).ids;
    pieces.push_back(&ids);
    have += static_cast<int>(ids.size());
    p += step;
  }
  const int take = std::min(have, config.window);
  out.reserve(take);
  if (step < 0) {
    // Pieces were collected nearest-first; emit in text order and keep the
    // suffix closest to the sentence.
    std::vector<int> stream;
    stream.reserve(have);
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
      stream.insert(stream.end(), (*it)->begin(), (*it)->end());
    }
    out.assign(stream.end() - take, stream.end());
  } else {
    for (const auto* ids : pieces) {
      for (int id : *ids) {
        if (static_cast<int>(out.size()) == take) break;
        out.push_back(id);
      }
    }
  }
  return out;
}

}  // namespace

ContextualizedSentence build_context(const EncodedCorpus& encoded, int doc,
                                     int position,
                                     const ContextConfig& config) {
  if (config.window < 0) throw Error("context window must be non-negative");
  ContextualizedSentence ctx;
  ctx.core = encoded.encoding(doc, position);
  ctx.left_ids = gather(encoded, doc, position, -1, config);
  ctx.right_ids = gather(encoded, doc, position, +1, config);
  ctx.core_start = static_cast<int>(ctx.left_ids.size()) + 1;
  return ctx;
}

ContextualizedSentence build_context(const Sentence& sentence,
                                     const Corpus& corpus,
                                     const SubwordVocab& vocab,
                                     const ContextConfig& config) {
  EncodedCorpus encoded(corpus, vocab);
  return build_context(encoded, sentence.doc_index, sentence.position_in_doc,
                       config);
}

std::pair<int, int> context_coverage(const EncodedCorpus& encoded, int doc,
                                     int position,
                                     const ContextConfig& config) {
  auto ctx = build_context(encoded, doc, position, config);
  return {static_cast<int>(ctx.left_ids.size()),
          static_cast<int>(ctx.right_ids.size())};
}

int fit_context(ContextualizedSentence& ctx, int max_length) {
  const int core_length = static_cast<int>(ctx.core.ids.size()) + 2;
  if (core_length > max_length) {
    throw Error("sentence of " + std::to_string(ctx.core.ids.size()) +
                " subtokens exceeds the maximum input length " +
                std::to_string(max_length));
  }
  int excess = ctx.assembled_length() - max_length;
  int dropped = 0;
  while (excess > 0) {
    if (ctx.left_ids.size() >= ctx.right_ids.size()) {
      ctx.left_ids.erase(ctx.left_ids.begin());
    } else {
      ctx.right_ids.pop_back();
    }
    --excess;
    ++dropped;
  }
  ctx.core_start = static_cast<int>(ctx.left_ids.size()) + 1;
  return dropped;
}

}  // namespace docner
