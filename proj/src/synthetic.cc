#include "docner/synthetic.h"

#include <array>
#include <random>

#include "docner/error.h"

namespace docner::synthetic {

namespace {

constexpr std::array<const char*, 12> kOnsets = {"b", "d", "k", "l", "m", "n",
                                                 "p", "r", "s", "t", "v", "z"};
constexpr std::array<const char*, 6> kVowels = {"a", "e", "i", "o", "u", "ai"};
constexpr std::array<const char*, 4> kCodas = {"", "n", "r", "l"};

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  std::uniform_int_distribution<size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::string capitalized(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

Document make_document(int index) {
  Document d;
  d.id = "doc-" + std::to_string(index);
  return d;
}

void push_sentence(Corpus& corpus, Sentence s) {
  Document& d = corpus.documents.back();
  s.doc_index = static_cast<int>(corpus.documents.size()) - 1;
  s.position_in_doc = static_cast<int>(d.sentences.size());
  d.sentences.push_back(std::move(s));
}

void add_words(Sentence& s, const std::vector<std::string>& words,
               const std::string& tag = "O") {
  for (const std::string& w : words) s.tokens.push_back(Token{w, tag, {}});
}

void add_entity(Sentence& s, const std::vector<std::string>& words,
                const std::string& type) {
  for (size_t i = 0; i < words.size(); ++i) {
    s.tokens.push_back(Token{words[i], (i == 0 ? "B-" : "I-") + type, {}});
  }
}

}  // namespace

std::string pseudo_word(std::mt19937_64& rng, int syllables) {
  std::string w;
  for (int i = 0; i < syllables; ++i) {
    w += kOnsets[uniform(rng, 0, kOnsets.size() - 1)];
    w += kVowels[uniform(rng, 0, kVowels.size() - 1)];
    w += kCodas[uniform(rng, 0, kCodas.size() - 1)];
  }
  return w;
}

std::vector<std::string> random_bio_tags(std::mt19937_64& rng, int length,
                                         const std::vector<std::string>& types) {
  std::vector<std::string> tags;
  std::string open;
  for (int i = 0; i < length; ++i) {
    const int r = uniform(rng, 0, 9);
    if (r < 5) {
      tags.push_back("O");
      open.clear();
    } else if (r < 8 || open.empty()) {
      open = pick(rng, types);
      tags.push_back("B-" + open);
    } else {
      tags.push_back("I-" + open);
    }
  }
  return tags;
}

Corpus random_corpus(uint64_t seed, int documents, int max_sentences,
                     int max_tokens) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> types{"LOC", "MISC", "ORG", "PER"};
  Corpus corpus;
  for (int d = 0; d < documents; ++d) {
    corpus.documents.push_back(make_document(d));
    const int sentences = uniform(rng, 1, max_sentences);
    for (int s = 0; s < sentences; ++s) {
      Sentence sentence;
      const int length = uniform(rng, 1, max_tokens);
      auto tags = random_bio_tags(rng, length, types);
      for (int t = 0; t < length; ++t) {
        sentence.tokens.push_back(
            Token{pseudo_word(rng, uniform(rng, 1, 3)), tags[t], {}});
      }
      push_sentence(corpus, std::move(sentence));
    }
  }
  for (const Sentence* s : all_sentences(corpus)) {
    for (const Span& span : spans_from_tags(s->gold_tags(), TagScheme::kBIO)) {
      corpus.label_set.insert(span.entity_type);
    }
  }
  return corpus;
}

Corpus template_corpus(uint64_t seed, int sentences) {
  std::mt19937_64 rng(seed);
  const std::vector<std::vector<std::string>> persons{
      {"Anna", "Berg"}, {"Tomas", "Lind"}, {"Mira"}, {"Jon", "Dahl"}, {"Elsa"}};
  const std::vector<std::vector<std::string>> locations{
      {"Paris"}, {"Oslo"}, {"Lima"}, {"New", "Dalby"}, {"Kiruna"}};
  const std::vector<std::vector<std::string>> orgs{
      {"Acme", "Corp"}, {"Nordbank"}, {"Vela", "Labs"}, {"Kronos"}};
  const std::vector<std::vector<std::string>> misc{
      {"Olympic"}, {"Nordic"}, {"Baroque"}};

  Corpus corpus;
  corpus.label_set = {"LOC", "MISC", "ORG", "PER"};
  for (int i = 0; i < sentences; ++i) {
    if (i % 5 == 0) corpus.documents.push_back(make_document(i / 5));
    Sentence s;
    switch (uniform(rng, 0, 4)) {
      case 0:
        add_entity(s, pick(rng, persons), "PER");
        add_words(s, {"visited"});
        add_entity(s, pick(rng, locations), "LOC");
        add_words(s, {"last", "week"});
        break;
      case 1:
        add_entity(s, pick(rng, orgs), "ORG");
        add_words(s, {"hired"});
        add_entity(s, pick(rng, persons), "PER");
        add_words(s, {"in"});
        add_entity(s, pick(rng, locations), "LOC");
        break;
      case 2:
        add_words(s, {"the"});
        add_entity(s, pick(rng, misc), "MISC");
        add_words(s, {"festival", "opened", "in"});
        add_entity(s, pick(rng, locations), "LOC");
        break;
      case 3:
        add_entity(s, pick(rng, persons), "PER");
        add_words(s, {"joined"});
        add_entity(s, pick(rng, orgs), "ORG");
        add_words(s, {"yesterday"});
        break;
      default:
        add_words(s, {"nothing", "happened", "today"});
        break;
    }
    push_sentence(corpus, std::move(s));
  }
  return corpus;
}

Corpus ambiguity_corpus(uint64_t seed, const AmbiguityOptions& options) {
  if (options.sentences_per_document < 2) {
    throw Error("ambiguity documents need at least two sentences");
  }
  // The name pool is shared by all splits.
  std::mt19937_64 pool_rng(20210104);
  std::vector<std::string> names;
  for (int i = 0; i < 12; ++i) names.push_back(capitalized(pseudo_word(pool_rng, 2)));

  const std::vector<std::string> loc_cues{
      "travelled", "valley",  "mountains", "harbour", "tourists",
      "river",     "coast",   "hiked",     "village", "beach"};
  const std::vector<std::string> org_cues{
      "shares", "investors", "profits", "merger",    "board",
      "company", "quarterly", "revenue", "stock", "executives"};
  const std::vector<std::string> fillers{"the", "a",    "of",   "on",  "many",
                                         "some", "again", "very", "we", "they"};
  const std::vector<std::vector<std::string>> frames{
      {"{}", "was", "mentioned", "again"},
      {"they", "talked", "about", "{}", "today"},
      {"nobody", "expected", "{}", "so", "soon"},
      {"{}", "appeared", "in", "the", "news"},
      {"we", "heard", "of", "{}", "twice"}};

  std::mt19937_64 rng(seed);
  Corpus corpus;
  corpus.split = options.split;
  corpus.label_set = {"LOC", "ORG"};
  int doc = -1;
  bool org_topic = false;
  for (int i = 0; i < options.sentences; ++i) {
    const int position = i % options.sentences_per_document;
    if (position == 0) {
      ++doc;
      corpus.documents.push_back(make_document(doc));
      org_topic = options.adversarial_boundaries ? (doc % 2 == 1)
                                                 : uniform(rng, 0, 1) == 1;
    }
    const bool entity_sentence = (position % 2 == 0) == options.entity_first;
    Sentence s;
    if (entity_sentence) {
      const auto& frame = pick(rng, frames);
      std::vector<std::string> mention{pick(rng, names)};
      if (uniform(rng, 0, 3) == 0) mention.push_back(pick(rng, names));
      for (const std::string& w : frame) {
        if (w == "{}") {
          add_entity(s, mention, org_topic ? "ORG" : "LOC");
        } else {
          add_words(s, {w});
        }
      }
    } else {
      const auto& cues = org_topic ? org_cues : loc_cues;
      const int length = uniform(rng, 4, 6);
      std::vector<std::string> words;
      for (int k = 0; k < length; ++k) {
        words.push_back(k % 3 != 1 ? pick(rng, cues) : pick(rng, fillers));
      }
      add_words(s, words);
    }
    push_sentence(corpus, std::move(s));
  }
  return corpus;
}

}  // namespace docner::synthetic
