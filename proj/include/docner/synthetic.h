#ifndef DOCNER_SYNTHETIC_H_
#define DOCNER_SYNTHETIC_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "docner/corpus.h"

namespace docner::synthetic {

// Pronounceable pseudo-word built from `syllables` random syllables.
std::string pseudo_word(std::mt19937_64& rng, int syllables);

// Random well-formed BIO tag sequence over `types`.
std::vector<std::string> random_bio_tags(std::mt19937_64& rng, int length,
                                         const std::vector<std::string>& types);

// Documents of random pseudo-word sentences with random valid BIO tags.
Corpus random_corpus(uint64_t seed, int documents, int max_sentences,
                     int max_tokens);

// Small template corpus with PER, LOC, ORG and MISC entities whose types are
// recoverable from the sentence alone.
Corpus template_corpus(uint64_t seed, int sentences);

struct AmbiguityOptions {
  int sentences = 500;
  // Sentences per document; documents alternate cue and entity sentences.
  int sentences_per_document = 6;
  // Topic of consecutive documents alternates instead of being random, so
  // context leaking across a boundary carries the opposite cue.
  bool adversarial_boundaries = false;
  // When true, documents begin with an entity sentence so that their
  // left neighbour lies in the previous document.
  bool entity_first = false;
  Split split = Split::kTrain;
};

// Entity mentions share one name pool for LOC and ORG; the type of a mention
// is fixed only by the topic cue words in the neighbouring cue sentences of
// the same document.
Corpus ambiguity_corpus(uint64_t seed, const AmbiguityOptions& options);

}  // namespace docner::synthetic

#endif  // DOCNER_SYNTHETIC_H_
