#include "docner/corpus.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "docner/error.h"

namespace docner {

namespace {

std::vector<std::string_view> split_columns(std::string_view line) {
  std::vector<std::string_view> columns;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i == line.size()) break;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    columns.push_back(line.substr(i, j - i));
    i = j;
  }
  return columns;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r';
  });
}

// Resolves a possibly negative column index against the row width; returns
// -1 when out of range.
int resolve_column(int column, int width) {
  int resolved = column < 0 ? width + column : column;
  return resolved >= 0 && resolved < width ? resolved : -1;
}

bool allowed_prefix(char prefix, TagScheme scheme) {
  switch (prefix) {
    case 'B':
    case 'I':
      return true;
    case 'E':
    case 'S':
      return scheme == TagScheme::kBIOES;
    default:
      return false;
  }
}

}  // namespace

std::string_view scheme_name(TagScheme scheme) {
  return scheme == TagScheme::kBIO ? "BIO" : "BIOES";
}

TagScheme parse_scheme(std::string_view name) {
  if (name == "BIO" || name == "bio") return TagScheme::kBIO;
  if (name == "BIOES" || name == "bioes") return TagScheme::kBIOES;
  throw Error("unknown tag scheme: " + std::string(name));
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::vector<std::string> Sentence::texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> Sentence::gold_tags() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.gold_tag);
  return out;
}

std::vector<std::string> Sentence::predicted_tags() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) {
    out.push_back(t.predicted_tag ? *t.predicted_tag : std::string(kOutsideTag));
  }
  return out;
}

int Corpus::sentence_count() const {
  int n = 0;
  for (const Document& d : documents) n += static_cast<int>(d.sentences.size());
  return n;
}

int Corpus::token_count() const {
  int n = 0;
  for (const Document& d : documents) {
    for (const Sentence& s : d.sentences) n += static_cast<int>(s.tokens.size());
  }
  return n;
}

ParsedTag parse_tag(std::string_view tag, TagScheme scheme) {
  if (tag == kOutsideTag) return {};
  if (tag.size() < 3 || tag[1] != '-' || !allowed_prefix(tag[0], scheme)) {
    throw ParseError("tag '" + std::string(tag) + "' is not valid under " +
                         std::string(scheme_name(scheme)),
                     0);
  }
  return {tag[0], std::string(tag.substr(2))};
}

Corpus parse_conll(std::string_view text, const ConllOptions& options,
                   Split split) {
  struct RawToken {
    std::string text, tag;
    std::optional<std::string> predicted;
    int line;
  };
  struct RawDocument {
    std::vector<std::vector<RawToken>> sentences;
  };

  std::vector<RawDocument> raw(1);
  std::vector<RawToken> current;
  auto flush = [&] {
    if (!current.empty()) raw.back().sentences.push_back(std::move(current));
    current.clear();
  };

  int line_number = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (is_blank(line)) {
      flush();
      continue;
    }
    auto columns = split_columns(line);
    if (columns.front() == kDocStart) {
      flush();
      if (!raw.back().sentences.empty()) raw.emplace_back();
      continue;
    }
    const int width = static_cast<int>(columns.size());
    const int token_col = resolve_column(options.token_column, width);
    const int tag_col = resolve_column(options.tag_column, width);
    if (token_col < 0 || tag_col < 0) {
      throw ParseError("expected at least " +
                           std::to_string(std::max(options.token_column,
                                                   options.tag_column) +
                                          1) +
                           " columns, found " + std::to_string(width),
                       line_number);
    }
    RawToken token{std::string(columns[token_col]),
                   std::string(columns[tag_col]), std::nullopt, line_number};
    if (options.predicted_column) {
      const int pred_col = resolve_column(*options.predicted_column, width);
      if (pred_col < 0) {
        throw ParseError("missing prediction column", line_number);
      }
      token.predicted = std::string(columns[pred_col]);
    }
    current.push_back(std::move(token));
  }
  flush();
  if (raw.size() > 1 && raw.back().sentences.empty()) raw.pop_back();

  TagScheme scheme = TagScheme::kBIO;
  if (options.scheme) {
    scheme = *options.scheme;
  } else {
    for (const auto& d : raw) {
      for (const auto& s : d.sentences) {
        for (const auto& t : s) {
          for (const std::string* tag :
               {&t.tag, t.predicted ? &*t.predicted : nullptr}) {
            if (tag && tag->size() >= 2 && (*tag)[1] == '-' &&
                ((*tag)[0] == 'E' || (*tag)[0] == 'S')) {
              scheme = TagScheme::kBIOES;
            }
          }
        }
      }
    }
  }

  Corpus corpus;
  corpus.split = split;
  corpus.scheme = scheme;
  for (auto& rd : raw) {
    if (rd.sentences.empty()) continue;
    Document doc;
    const int doc_index = static_cast<int>(corpus.documents.size());
    doc.id = "doc-" + std::to_string(doc_index);
    for (auto& rs : rd.sentences) {
      Sentence sentence;
      sentence.doc_index = doc_index;
      sentence.position_in_doc = static_cast<int>(doc.sentences.size());
      for (auto& rt : rs) {
        try {
          ParsedTag parsed = parse_tag(rt.tag, scheme);
          if (parsed.prefix != 'O') corpus.label_set.insert(parsed.type);
          if (rt.predicted) parse_tag(*rt.predicted, scheme);
        } catch (const ParseError& e) {
          throw ParseError(e.what(), rt.line);
        }
        sentence.tokens.push_back(
            Token{std::move(rt.text), std::move(rt.tag), std::move(rt.predicted)});
      }
      doc.sentences.push_back(std::move(sentence));
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

Corpus parse_conll(std::string_view text, int token_column, int tag_column) {
  ConllOptions options;
  options.token_column = token_column;
  options.tag_column = tag_column;
  return parse_conll(text, options);
}

Corpus read_conll_file(const std::string& path, const ConllOptions& options,
                       Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_conll(buffer.str(), options, split);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

std::string write_conll(const Corpus& corpus, bool with_predictions,
                        bool always_docstart) {
  std::string out;
  const bool docstart = always_docstart || corpus.documents.size() > 1;
  for (const Document& doc : corpus.documents) {
    if (docstart) out += "-DOCSTART- O\n\n";
    for (const Sentence& s : doc.sentences) {
      for (const Token& t : s.tokens) {
        out += t.text;
        out += ' ';
        out += t.gold_tag;
        if (with_predictions) {
          out += ' ';
          out += t.predicted_tag ? *t.predicted_tag : std::string(kOutsideTag);
        }
        out += '\n';
      }
      out += '\n';
    }
  }
  return out;
}

namespace {

// Shared span reader; `repairs` collects a message per tolerant reading.
std::vector<Span> read_spans(const std::vector<std::string>& tags,
                             TagScheme scheme,
                             std::vector<std::string>* repairs) {
  std::vector<Span> spans;
  std::optional<Span> open;
  auto note = [&](int i, const std::string& what) {
    if (repairs) {
      repairs->push_back("token " + std::to_string(i) + ": " + what);
    }
  };
  auto close = [&](int i) {
    if (!open) return;
    if (scheme == TagScheme::kBIOES && i >= 0) {
      note(i, "span of type " + open->entity_type + " not closed by E-/S-");
    }
    spans.push_back(*open);
    open.reset();
  };

  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    // Scheme-agnostic parse: scoring must tolerate any prefix.
    ParsedTag tag = parse_tag(tags[i], TagScheme::kBIOES);
    switch (tag.prefix) {
      case 'O':
        close(i);
        break;
      case 'B':
        close(i);
        open = Span{tag.type, i, i};
        break;
      case 'S':
        close(i);
        spans.push_back(Span{tag.type, i, i});
        break;
      case 'I':
        if (open && open->entity_type == tag.type) {
          open->end = i;
        } else {
          close(i);
          note(i, "I-" + tag.type + " promoted to B-" + tag.type);
          open = Span{tag.type, i, i};
        }
        break;
      case 'E':
        if (open && open->entity_type == tag.type) {
          open->end = i;
          spans.push_back(*open);
          open.reset();
        } else {
          close(i);
          note(i, "E-" + tag.type + " without open span");
          spans.push_back(Span{tag.type, i, i});
        }
        break;
    }
  }
  close(static_cast<int>(tags.size()));
  return spans;
}

}  // namespace

std::vector<Span> spans_from_tags(const std::vector<std::string>& tags,
                                  TagScheme scheme) {
  return read_spans(tags, scheme, nullptr);
}

std::vector<std::string> tags_from_spans(const std::vector<Span>& spans,
                                         int length, TagScheme scheme) {
  std::vector<std::string> tags(length, std::string(kOutsideTag));
  for (const Span& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= length) {
      throw Error("span out of range");
    }
    if (scheme == TagScheme::kBIOES && s.start == s.end) {
      tags[s.start] = "S-" + s.entity_type;
      continue;
    }
    tags[s.start] = "B-" + s.entity_type;
    for (int i = s.start + 1; i <= s.end; ++i) {
      tags[i] = (scheme == TagScheme::kBIOES && i == s.end ? "E-" : "I-") +
                s.entity_type;
    }
  }
  return tags;
}

std::vector<std::string> convert_scheme(const std::vector<std::string>& tags,
                                        TagScheme from, TagScheme to,
                                        std::vector<std::string>* warnings) {
  for (const std::string& t : tags) parse_tag(t, from);
  auto spans = read_spans(tags, from, warnings);
  return tags_from_spans(spans, static_cast<int>(tags.size()), to);
}

Corpus convert_corpus(const Corpus& corpus, TagScheme to) {
  Corpus out = corpus;
  out.scheme = to;
  for (Document& doc : out.documents) {
    for (Sentence& s : doc.sentences) {
      auto gold = convert_scheme(s.gold_tags(), corpus.scheme, to);
      bool has_pred = std::any_of(s.tokens.begin(), s.tokens.end(),
                                  [](const Token& t) {
                                    return t.predicted_tag.has_value();
                                  });
      std::vector<std::string> pred;
      if (has_pred) pred = convert_scheme(s.predicted_tags(), corpus.scheme, to);
      for (size_t i = 0; i < s.tokens.size(); ++i) {
        s.tokens[i].gold_tag = gold[i];
        if (has_pred) s.tokens[i].predicted_tag = pred[i];
      }
    }
  }
  return out;
}

std::vector<std::string> label_inventory(const std::set<std::string>& types,
                                         TagScheme scheme) {
  std::vector<std::string> labels{std::string(kOutsideTag)};
  const std::string prefixes = scheme == TagScheme::kBIO ? "BI" : "BIES";
  for (const std::string& type : types) {
    for (char p : prefixes) labels.push_back(std::string(1, p) + "-" + type);
  }
  return labels;
}

std::vector<const Sentence*> all_sentences(const Corpus& corpus) {
  std::vector<const Sentence*> out;
  for (const Document& d : corpus.documents) {
    for (const Sentence& s : d.sentences) out.push_back(&s);
  }
  return out;
}

}  // namespace docner
