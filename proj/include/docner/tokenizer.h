#ifndef DOCNER_TOKENIZER_H_
#define DOCNER_TOKENIZER_H_

#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "docner/corpus.h"
#include "docner/tensor.h"

namespace docner {

// Character-level byte-pair-encoding vocabulary.
//
// Ids are dense: the four special symbols come first (PAD, UNK, BOS, EOS),
// then the training alphabet in code-point order, then one id per merge in
// training order. Characters are UTF-8 code points.
class SubwordVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSpecialCount = 4;

  SubwordVocab() = default;
  SubwordVocab(std::vector<std::string> alphabet,
               std::vector<std::pair<std::string, std::string>> merges);

  int size() const { return static_cast<int>(symbols_.size()); }
  int alphabet_size() const { return static_cast<int>(alphabet_.size()); }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }

  // Symbol for an id; specials render as <pad>, <unk>, <s>, </s>.
  const std::string& symbol(int id) const { return symbols_.at(id); }
  // Id of a symbol, or kUnk.
  int id(const std::string& symbol) const;

  // Subtoken ids of one whitespace-free token.
  std::vector<int> encode_token(const std::string& token) const;
  // Concatenated symbols; specials are dropped, UNK renders as its symbol.
  std::string decode(const std::vector<int>& ids) const;

  // Text form: a header line, one "#alphabet" line per character, one merge
  // pair per line in training order, then the special-token declarations.
  std::string serialize() const;
  static SubwordVocab deserialize(const std::string& text);
  void save(const std::string& path) const;
  static SubwordVocab load(const std::string& path);

  friend bool operator==(const SubwordVocab& a, const SubwordVocab& b) {
    return a.alphabet_ == b.alphabet_ && a.merges_ == b.merges_;
  }

 private:
  std::vector<std::string> alphabet_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> symbol_ids_;
  std::map<std::pair<std::string, std::string>, int> merge_rank_;
};

// Splits UTF-8 text into code points. Invalid bytes become single-byte
// characters.
std::vector<std::string> utf8_chars(const std::string& text);

// Greedy BPE training over the corpus' token texts: repeatedly merge the most
// frequent adjacent pair (ties broken by the lexicographically smallest pair)
// until `vocab_size` symbols exist or no pair occurs at least twice.
SubwordVocab train_vocab(const Corpus& corpus, int vocab_size);
SubwordVocab train_vocab(const std::vector<const Corpus*>& corpora,
                         int vocab_size);

struct SubwordEncoding {
  std::vector<int> ids;
  std::vector<int> first_subtoken_of_token;
  std::vector<int> subtoken_count_per_token;

  int token_count() const {
    return static_cast<int>(first_subtoken_of_token.size());
  }
};

// Encodes each token independently and records the first-subtoken alignment.
SubwordEncoding encode(const std::vector<std::string>& tokens,
                       const SubwordVocab& vocab);

// Selects row alignment[t] of `states` for every token t.
Tensor first_subword_pool(const Tensor& states,
                          const std::vector<int>& alignment);

}  // namespace docner

#endif  // DOCNER_TOKENIZER_H_
