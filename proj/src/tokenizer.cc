#include "docner/tokenizer.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "docner/error.h"

namespace docner {

namespace {

constexpr const char* kHeader = "docner-bpe 1";
const char* const kSpecialSymbols[SubwordVocab::kSpecialCount] = {
    "<pad>", "<unk>", "<s>", "</s>"};

int utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

std::vector<std::string> utf8_chars(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    size_t n = utf8_length(static_cast<unsigned char>(text[i]));
    if (i + n > text.size()) n = 1;
    for (size_t k = 1; k < n; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        n = 1;
        break;
      }
    }
    out.push_back(text.substr(i, n));
    i += n;
  }
  return out;
}

SubwordVocab::SubwordVocab(
    std::vector<std::string> alphabet,
    std::vector<std::pair<std::string, std::string>> merges)
    : alphabet_(std::move(alphabet)), merges_(std::move(merges)) {
  std::sort(alphabet_.begin(), alphabet_.end());
  alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()),
                  alphabet_.end());
  auto add = [this](const std::string& s) {
    if (symbol_ids_.emplace(s, size()).second) symbols_.push_back(s);
  };
  for (const char* s : kSpecialSymbols) {
    symbols_.push_back(s);
  }
  for (const std::string& c : alphabet_) add(c);
  for (size_t r = 0; r < merges_.size(); ++r) {
    const auto& [left, right] = merges_[r];
    if (!symbol_ids_.count(left) || !symbol_ids_.count(right)) {
      throw Error("merge (" + left + ", " + right +
                  ") references an unknown symbol");
    }
    merge_rank_.emplace(merges_[r], static_cast<int>(r));
    add(left + right);
  }
}

int SubwordVocab::id(const std::string& symbol) const {
  auto it = symbol_ids_.find(symbol);
  return it == symbol_ids_.end() ? kUnk : it->second;
}

std::vector<int> SubwordVocab::encode_token(const std::string& token) const {
  // Unknown characters are kept as empty placeholders that never merge.
  std::vector<std::string> parts;
  std::vector<bool> known;
  for (std::string& c : utf8_chars(token)) {
    bool k = symbol_ids_.count(c) > 0;
    known.push_back(k);
    parts.push_back(k ? std::move(c) : std::string());
  }

  while (parts.size() > 1) {
    int best_rank = -1;
    const std::pair<std::string, std::string>* best = nullptr;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!known[i] || !known[i + 1]) continue;
      auto it = merge_rank_.find({parts[i], parts[i + 1]});
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best = &it->first;
      }
    }
    if (!best) break;
    const auto pair = *best;
    std::vector<std::string> next;
    std::vector<bool> next_known;
    for (size_t i = 0; i < parts.size(); ++i) {
      if (i + 1 < parts.size() && known[i] && known[i + 1] &&
          parts[i] == pair.first && parts[i + 1] == pair.second) {
        next.push_back(pair.first + pair.second);
        next_known.push_back(true);
        ++i;
      } else {
        next.push_back(std::move(parts[i]));
        next_known.push_back(known[i]);
      }
    }
    parts = std::move(next);
    known = std::move(next_known);
  }

  std::vector<int> ids;
  ids.reserve(parts.size());
  for (size_t i = 0; i < parts.size(); ++i) {
    ids.push_back(known[i] ? id(parts[i]) : kUnk);
  }
  return ids;
}

std::string SubwordVocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    out += symbol(i);
  }
  return out;
}

std::string SubwordVocab::serialize() const {
  std::string out = std::string(kHeader) + "\n";
  for (const std::string& c : alphabet_) out += "#alphabet " + c + "\n";
  for (const auto& [l, r] : merges_) out += l + " " + r + "\n";
  for (int i = 0; i < kSpecialCount; ++i) {
    out += "#special " + std::string(kSpecialSymbols[i]) + " " +
           std::to_string(i) + "\n";
  }
  return out;
}

SubwordVocab SubwordVocab::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_number = 1;
  if (!std::getline(in, line) || line != kHeader) {
    throw ParseError("not a docner BPE vocab", 1);
  }
  std::vector<std::string> alphabet;
  std::vector<std::pair<std::string, std::string>> merges;
  int specials = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (line.rfind("#alphabet ", 0) == 0 && merges.empty() && specials == 0) {
      alphabet.push_back(line.substr(10));
    } else if (line.rfind("#special ", 0) == 0) {
      std::istringstream fields(line.substr(9));
      std::string symbol;
      int id = -1;
      fields >> symbol >> id;
      if (id != specials || symbol != kSpecialSymbols[specials]) {
        throw ParseError("unexpected special token declaration", line_number);
      }
      ++specials;
    } else {
      size_t space = line.find(' ');
      if (space == std::string::npos || space == 0 ||
          space + 1 >= line.size() || specials > 0) {
        throw ParseError("malformed merge line", line_number);
      }
      merges.emplace_back(line.substr(0, space), line.substr(space + 1));
    }
  }
  if (specials != kSpecialCount) {
    throw ParseError("missing special token declarations", line_number);
  }
  return SubwordVocab(std::move(alphabet), std::move(merges));
}

void SubwordVocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize();
}

SubwordVocab SubwordVocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

SubwordVocab train_vocab(const std::vector<const Corpus*>& corpora,
                         int vocab_size) {
  std::map<std::string, long> word_counts;
  for (const Corpus* corpus : corpora) {
    for (const Document& d : corpus->documents) {
      for (const Sentence& s : d.sentences) {
        for (const Token& t : s.tokens) ++word_counts[t.text];
      }
    }
  }

  std::set<std::string> alphabet_set;
  std::vector<std::pair<std::vector<std::string>, long>> words;
  for (const auto& [word, count] : word_counts) {
    auto chars = utf8_chars(word);
    alphabet_set.insert(chars.begin(), chars.end());
    words.emplace_back(std::move(chars), count);
  }
  std::vector<std::string> alphabet(alphabet_set.begin(), alphabet_set.end());
  const int base = SubwordVocab::kSpecialCount + static_cast<int>(alphabet.size());
  if (vocab_size < base) {
    throw Error("vocab_size " + std::to_string(vocab_size) +
                " is below alphabet size plus specials (" +
                std::to_string(base) + ")");
  }

  std::set<std::string> symbols(alphabet.begin(), alphabet.end());
  std::vector<std::pair<std::string, std::string>> merges;
  int size = base;
  while (size < vocab_size) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (const auto& [parts, count] : words) {
      for (size_t i = 0; i + 1 < parts.size(); ++i) {
        pair_counts[{parts[i], parts[i + 1]}] += count;
      }
    }
    // std::map iterates pairs lexicographically, so the first maximum wins.
    const std::pair<std::string, std::string>* best = nullptr;
    long best_count = 1;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (!best) break;
    const auto pair = *best;
    const std::string merged = pair.first + pair.second;
    merges.push_back(pair);
    if (symbols.insert(merged).second) ++size;
    for (auto& [parts, count] : words) {
      std::vector<std::string> next;
      for (size_t i = 0; i < parts.size(); ++i) {
        if (i + 1 < parts.size() && parts[i] == pair.first &&
            parts[i + 1] == pair.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(std::move(parts[i]));
        }
      }
      parts = std::move(next);
    }
  }
  return SubwordVocab(std::move(alphabet), std::move(merges));
}

SubwordVocab train_vocab(const Corpus& corpus, int vocab_size) {
  return train_vocab(std::vector<const Corpus*>{&corpus}, vocab_size);
}

SubwordEncoding encode(const std::vector<std::string>& tokens,
                       const SubwordVocab& vocab) {
  SubwordEncoding enc;
  for (const std::string& token : tokens) {
    auto ids = vocab.encode_token(token);
    enc.first_subtoken_of_token.push_back(static_cast<int>(enc.ids.size()));
    enc.subtoken_count_per_token.push_back(static_cast<int>(ids.size()));
    enc.ids.insert(enc.ids.end(), ids.begin(), ids.end());
  }
  return enc;
}

Tensor first_subword_pool(const Tensor& states,
                          const std::vector<int>& alignment) {
  Tensor out(static_cast<int>(alignment.size()), states.cols());
  for (size_t t = 0; t < alignment.size(); ++t) {
    const int r = alignment[t];
    if (r < 0 || r >= states.rows()) {
      throw Error("alignment index " + std::to_string(r) +
                  " out of range for " + std::to_string(states.rows()) +
                  " subtokens");
    }
    std::copy_n(states.row(r).data(), states.cols(),
                out.row(static_cast<int>(t)).data());
  }
  return out;
}

}  // namespace docner
