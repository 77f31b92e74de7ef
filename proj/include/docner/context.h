#ifndef DOCNER_CONTEXT_H_
#define DOCNER_CONTEXT_H_

#include <utility>
#include <vector>

#include "docner/corpus.h"
#include "docner/tokenizer.h"

namespace docner {

struct ContextConfig {
  // Subtokens of context added on each side of the sentence.
  int window = 64;
  // Restrict context to the sentence's own document.
  bool enforce_boundaries = false;
};

// A sentence's subtokens flanked by neighbouring-sentence context. The
// transformer input is [BOS] + left_ids + core.ids + right_ids + [EOS].
struct ContextualizedSentence {
  std::vector<int> left_ids;
  SubwordEncoding core;
  std::vector<int> right_ids;
  int core_start = 1;

  std::vector<int> assembled() const;
  int assembled_length() const;
  // First-subtoken positions of the core tokens within assembled().
  std::vector<int> core_alignment() const;
};

// Per-sentence encodings of a corpus, computed once. Context for any sentence
// is sliced out of these, so the order in which sentences are visited (e.g.
// per-epoch shuffling) does not matter.
class EncodedCorpus {
 public:
  EncodedCorpus(const Corpus& corpus, const SubwordVocab& vocab);

  const Corpus& corpus() const { return *corpus_; }
  int document_count() const { return static_cast<int>(encodings_.size()); }
  int sentence_count(int doc) const {
    return static_cast<int>(encodings_[doc].size());
  }
  const SubwordEncoding& encoding(int doc, int position) const {
    return encodings_[doc][position];
  }

 private:
  const Corpus* corpus_;
  std::vector<std::vector<SubwordEncoding>> encodings_;
};

ContextualizedSentence build_context(const EncodedCorpus& encoded, int doc,
                                     int position, const ContextConfig& config);

// Convenience form that encodes the corpus on the fly.
ContextualizedSentence build_context(const Sentence& sentence,
                                     const Corpus& corpus,
                                     const SubwordVocab& vocab,
                                     const ContextConfig& config);

// Numbers of left and right context subtokens actually available.
std::pair<int, int> context_coverage(const EncodedCorpus& encoded, int doc,
                                     int position, const ContextConfig& config);

// Shrinks context symmetrically from its outer ends until the assembled input
// fits `max_length`. Returns the number of subtokens dropped. Throws when the
// core alone does not fit.
int fit_context(ContextualizedSentence& ctx, int max_length);

}  // namespace docner

#endif  // DOCNER_CONTEXT_H_
