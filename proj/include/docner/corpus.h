#ifndef DOCNER_CORPUS_H_
#define DOCNER_CORPUS_H_

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace docner {

enum class TagScheme { kBIO, kBIOES };
enum class Split { kTrain, kDev, kTest };

std::string_view scheme_name(TagScheme scheme);
TagScheme parse_scheme(std::string_view name);
std::string_view split_name(Split split);

inline constexpr std::string_view kOutsideTag = "O";
inline constexpr std::string_view kDocStart = "-DOCSTART-";

struct Token {
  std::string text;
  std::string gold_tag;
  std::optional<std::string> predicted_tag;
};

struct Sentence {
  std::vector<Token> tokens;
  int doc_index = 0;
  int position_in_doc = 0;

  std::vector<std::string> texts() const;
  std::vector<std::string> gold_tags() const;
  // Predicted tags, with "O" for tokens that carry no prediction.
  std::vector<std::string> predicted_tags() const;
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;
};

struct Corpus {
  std::vector<Document> documents;
  Split split = Split::kTrain;
  std::set<std::string> label_set;
  TagScheme scheme = TagScheme::kBIO;

  int sentence_count() const;
  int token_count() const;
};

// A typed entity mention covering tokens [start, end] (both inclusive).
struct Span {
  std::string entity_type;
  int start = 0;
  int end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Tag split into its scheme prefix ('B', 'I', 'E', 'S' or 'O') and type.
struct ParsedTag {
  char prefix = 'O';
  std::string type;
};

// Throws ParseError when `tag` is neither "O" nor PREFIX-TYPE with a prefix
// allowed by `scheme`.
ParsedTag parse_tag(std::string_view tag, TagScheme scheme);

struct ConllOptions {
  int token_column = 0;
  // Negative values count from the last column (-1 is the last column).
  int tag_column = -1;
  // Optional column holding a prediction; negative counts from the end,
  // std::nullopt means no prediction column.
  std::optional<int> predicted_column;
  // Scheme of the tags in the file; detected from the tag prefixes when
  // unset (any E-/S- prefix means BIOES).
  std::optional<TagScheme> scheme;
};

// Parses CoNLL column format. Blank lines end sentences; a line whose first
// column is -DOCSTART- opens a new document and is not emitted. Input without
// any -DOCSTART- line yields a single document.
Corpus parse_conll(std::string_view text, const ConllOptions& options = {},
                   Split split = Split::kTrain);

Corpus parse_conll(std::string_view text, int token_column, int tag_column);

Corpus read_conll_file(const std::string& path,
                       const ConllOptions& options = {},
                       Split split = Split::kTrain);

// Writes token, gold tag and (when present) predicted tag columns, with
// -DOCSTART- separators when the corpus has more than one document or
// `always_docstart` is set.
std::string write_conll(const Corpus& corpus, bool with_predictions,
                        bool always_docstart = false);

// Maximal typed spans with conlleval semantics. Ill-formed sequences are read
// tolerantly: an I-/E- tag that does not continue an open span of the same
// type starts a new span.
std::vector<Span> spans_from_tags(const std::vector<std::string>& tags,
                                  TagScheme scheme);

// Renders spans over `length` tokens in the requested scheme.
std::vector<std::string> tags_from_spans(const std::vector<Span>& spans,
                                         int length, TagScheme scheme);

// Converts between schemes preserving the span set. Repairs (I promoted to
// B, unterminated BIOES spans) are described in `warnings` when given.
std::vector<std::string> convert_scheme(const std::vector<std::string>& tags,
                                        TagScheme from, TagScheme to,
                                        std::vector<std::string>* warnings =
                                            nullptr);

// Converts gold and predicted tags of every token.
Corpus convert_corpus(const Corpus& corpus, TagScheme to);

// Token-level label inventory of a scheme: "O" first, then every
// prefix-type combination in a fixed order.
std::vector<std::string> label_inventory(const std::set<std::string>& types,
                                         TagScheme scheme);

// Every sentence in corpus order.
std::vector<const Sentence*> all_sentences(const Corpus& corpus);

}  // namespace docner

#endif  // DOCNER_CORPUS_H_
