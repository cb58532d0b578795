#pragma once

// BIO-tagged NER corpora in the CoNLL-2003 column layout: one token per line,
// whitespace-separated columns, blank line between sentences.

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histk/error.hpp"
#include "histk/utf8.hpp"

namespace histk {

struct NerToken {
  std::string form;
  std::string tag;
  std::vector<std::string> other;  // remaining columns in file order
  friend bool operator==(const NerToken&, const NerToken&) = default;
};

using NerSentence = std::vector<NerToken>;

struct ColumnLayout {
  int form_column = 0;
  int tag_column = -1;  // negative counts from the end; -1 = last column
  std::set<std::string> entity_types = {"PERSON", "LOCATION"};
};

struct NerCorpus {
  std::vector<NerSentence> sentences;
  std::string partition_name;
  // -DOCSTART- lines seen, keyed by the index of the sentence that follows them.
  std::vector<std::pair<std::size_t, std::string>> docstarts;
  char separator = ' ';
  int form_column = 0;  // resolved, non-negative positions within a token line
  int tag_column = 1;

  friend bool operator==(const NerCorpus& a, const NerCorpus& b) {
    return a.sentences == b.sentences && a.docstarts == b.docstarts;
  }
};

struct EntitySpan {
  std::string entity_type;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

// Splits "B-PERSON" into ('B', "PERSON"); 'O' for the outside tag. Returns
// prefix '\0' for anything that is not BIO-shaped.
inline std::pair<char, std::string_view> split_bio(std::string_view tag) {
  if (tag == "O") return {'O', {}};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return {tag[0], tag.substr(2)};
  return {'\0', {}};
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

inline NerCorpus parse_conll2003(std::istream& in, const ColumnLayout& layout = {},
                                 std::string partition_name = {}) {
  NerCorpus corpus;
  corpus.partition_name = std::move(partition_name);
  NerSentence cur;
  std::size_t line_no = 0;
  std::size_t ncols = 0;
  bool saw_tab = false;
  bool separator_known = false;
  std::string line;

  auto flush = [&] {
    if (!cur.empty()) corpus.sentences.push_back(std::move(cur));
    cur.clear();
  };
  auto fail = [&](const std::string& what) {
    throw FormatError(what, line_no, corpus.sentences.size() + (cur.empty() ? 0 : 1));
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    auto cols = detail::split_ws(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0] == "-DOCSTART-") {
      flush();
      corpus.docstarts.emplace_back(corpus.sentences.size(), line);
      continue;
    }
    if (!utf8::is_valid(line)) fail("invalid UTF-8");
    if (ncols == 0) {
      ncols = cols.size();
      if (ncols < 2) fail("token line needs at least a form and a tag column");
      auto resolve = [&](int c) { return c < 0 ? static_cast<int>(ncols) + c : c; };
      corpus.form_column = resolve(layout.form_column);
      corpus.tag_column = resolve(layout.tag_column);
      if (corpus.form_column < 0 || corpus.form_column >= static_cast<int>(ncols) || corpus.tag_column < 0 ||
          corpus.tag_column >= static_cast<int>(ncols) || corpus.form_column == corpus.tag_column)
        fail("column layout does not fit a " + std::to_string(ncols) + "-column file");
    } else if (cols.size() != ncols) {
      fail("expected " + std::to_string(ncols) + " columns, found " + std::to_string(cols.size()));
    }
    if (!separator_known) {
      saw_tab = line.find('\t') != std::string::npos;
      separator_known = true;
    }

    NerToken tok;
    tok.form = cols[corpus.form_column];
    tok.tag = cols[corpus.tag_column];
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (static_cast<int>(c) != corpus.form_column && static_cast<int>(c) != corpus.tag_column)
        tok.other.push_back(cols[c]);
    auto [prefix, type] = split_bio(tok.tag);
    if (prefix == '\0') fail("malformed tag '" + tok.tag + "'");
    if (prefix != 'O' && !layout.entity_types.count(std::string(type)))
      fail("unknown tag '" + tok.tag + "' (entity type not in inventory)");
    cur.push_back(std::move(tok));
  }
  flush();
  if (corpus.sentences.empty()) throw FormatError("no sentences in input", line_no);
  corpus.separator = saw_tab ? '\t' : ' ';
  return corpus;
}

inline NerCorpus parse_conll2003_string(std::string_view text, const ColumnLayout& layout = {},
                                        std::string partition_name = {}) {
  std::istringstream in{std::string(text)};
  return parse_conll2003(in, layout, std::move(partition_name));
}

inline void serialize_conll2003(std::ostream& out, const NerCorpus& c) {
  std::size_t next_doc = 0;
  const std::size_t ncols = c.sentences.empty() || c.sentences[0].empty()
                                ? 2
                                : c.sentences[0][0].other.size() + 2;
  for (std::size_t si = 0; si <= c.sentences.size(); ++si) {
    while (next_doc < c.docstarts.size() && c.docstarts[next_doc].first == si) {
      out << c.docstarts[next_doc].second << "\n\n";
      ++next_doc;
    }
    if (si == c.sentences.size()) break;
    for (const auto& tok : c.sentences[si]) {
      std::size_t oi = 0;
      for (std::size_t col = 0; col < ncols; ++col) {
        if (col) out << c.separator;
        if (static_cast<int>(col) == c.form_column)
          out << tok.form;
        else if (static_cast<int>(col) == c.tag_column)
          out << tok.tag;
        else
          out << tok.other.at(oi++);
      }
      out << '\n';
    }
    out << '\n';
  }
}

inline std::string serialize_conll2003(const NerCorpus& c) {
  std::ostringstream out;
  serialize_conll2003(out, c);
  return out.str();
}

// ---------------------------------------------------------------------------
// BIO well-formedness

enum class BioMode { kStrict, kRepair };

struct BioViolation {
  std::size_t sentence = 0;
  std::size_t index = 0;
  std::string tag;
  std::string replacement;  // set in repair mode
};

// An I-X is legal only after B-X or I-X. Repair mode rewrites offenders to B-X.
inline std::pair<NerCorpus, std::vector<BioViolation>> validate_bio(const NerCorpus& c, BioMode mode) {
  NerCorpus out = c;
  std::vector<BioViolation> violations;
  for (std::size_t si = 0; si < out.sentences.size(); ++si) {
    auto& sent = out.sentences[si];
    std::string_view prev_type;
    char prev_prefix = 'O';
    for (std::size_t i = 0; i < sent.size(); ++i) {
      auto [prefix, type] = split_bio(sent[i].tag);
      if (prefix == 'I' && (prev_prefix == 'O' || prev_type != type)) {
        BioViolation v{si, i, sent[i].tag, {}};
        if (mode == BioMode::kRepair) {
          sent[i].tag = "B-" + std::string(type);
          v.replacement = sent[i].tag;
          std::tie(prefix, type) = split_bio(sent[i].tag);
        }
        violations.push_back(std::move(v));
      }
      prev_prefix = prefix;
      prev_type = type;
    }
  }
  return {std::move(out), std::move(violations)};
}

// Maximal exact spans. Throws std::invalid_argument on a sequence that fails
// strict BIO validation.
inline std::vector<EntitySpan> spans_from_bio(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto [prefix, type] = split_bio(tags[i]);
    switch (prefix) {
      case 'O':
        break;
      case 'B':
        spans.push_back(EntitySpan{std::string(type), i, i});
        break;
      case 'I':
        if (spans.empty() || spans.back().end + 1 != i || spans.back().entity_type != type)
          throw std::invalid_argument("I- tag at position " + std::to_string(i) + " does not continue a span");
        spans.back().end = i;
        break;
      default:
        throw std::invalid_argument("malformed tag '" + tags[i] + "'");
    }
  }
  return spans;
}

inline std::vector<std::string> tags_of(const NerSentence& s) {
  std::vector<std::string> t;
  t.reserve(s.size());
  for (const auto& tok : s) t.push_back(tok.tag);
  return t;
}

// Inverse of spans_from_bio for non-overlapping spans.
inline std::vector<std::string> bio_from_spans(std::size_t length, const std::vector<EntitySpan>& spans) {
  std::vector<std::string> tags(length, "O");
  for (const auto& sp : spans) {
    if (sp.start > sp.end || sp.end >= length) throw std::invalid_argument("span outside sentence");
    for (std::size_t i = sp.start; i <= sp.end; ++i) {
      if (tags[i] != "O") throw std::invalid_argument("overlapping spans");
      tags[i] = (i == sp.start ? "B-" : "I-") + sp.entity_type;
    }
  }
  return tags;
}

struct NerStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t docstarts = 0;
  std::map<std::string, std::size_t> entities;  // per type

  std::size_t count(const std::string& type) const {
    auto it = entities.find(type);
    return it == entities.end() ? 0 : it->second;
  }
  NerStats& operator+=(const NerStats& o) {
    sentences += o.sentences;
    tokens += o.tokens;
    docstarts += o.docstarts;
    for (const auto& [k, v] : o.entities) entities[k] += v;
    return *this;
  }
};

// Every declared entity type gets a row, even with zero spans.
inline NerStats corpus_stats(const NerCorpus& c, const std::set<std::string>& types = {"PERSON", "LOCATION"}) {
  NerStats st;
  for (const auto& t : types) st.entities[t] = 0;
  st.sentences = c.sentences.size();
  st.docstarts = c.docstarts.size();
  for (const auto& s : c.sentences) {
    st.tokens += s.size();
    for (const auto& sp : spans_from_bio(tags_of(s))) ++st.entities[sp.entity_type];
  }
  return st;
}

}  // namespace histk
