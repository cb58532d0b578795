#pragma once

// CoNLL-U data model, strict reader, canonical writer and tree validator.
//
// Token lines carry ten tab-separated fields. Multiword-token ranges ("3-4")
// are kept beside the word list and written back in front of their first
// word. Empty nodes ("5.1") are rejected. Comment lines are opaque and kept
// in order.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histk/error.hpp"
#include "histk/utf8.hpp"

namespace histk {

// MISC key holding the Perso-Arabic spelling of a word. The released treebank
// may use another key; see detect_script_key().
inline constexpr std::string_view kDefaultScriptKey = "OrigScript";

struct Feature {
  std::string key;
  std::string value;
  friend bool operator==(const Feature&, const Feature&) = default;
};

struct Token {
  int id = 0;
  std::string form;
  std::string lemma = "_";
  std::string upos = "_";
  std::string xpos = "_";
  std::vector<Feature> feats;
  int head = -1;  // -1 only for unannotated input read with allow_missing_heads
  std::string deprel = "_";
  std::string deps = "_";
  std::vector<std::string> misc;  // raw "Key=Value" items, file order

  std::optional<std::string_view> misc_value(std::string_view key) const {
    for (const auto& item : misc) {
      auto eq = item.find('=');
      if (eq != std::string::npos && std::string_view(item).substr(0, eq) == key)
        return std::string_view(item).substr(eq + 1);
    }
    return std::nullopt;
  }

  friend bool operator==(const Token&, const Token&) = default;
};

struct MultiwordRange {
  int start = 0;
  int end = 0;
  std::string form;
  std::string misc = "_";  // verbatim tenth column of the range line
  friend bool operator==(const MultiwordRange&, const MultiwordRange&) = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<MultiwordRange> mwt;
  std::vector<std::string> comments;  // full lines including the leading '#'

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Treebank {
  std::vector<Sentence> sentences;
  std::string source_name;

  bool empty() const { return sentences.empty(); }
  // Equality ignores source_name: two files with the same content compare equal.
  friend bool operator==(const Treebank& a, const Treebank& b) { return a.sentences == b.sentences; }
};

struct ParseOptions {
  // Accept "_" in the HEAD column (raw input for the parser). Such tokens get head -1.
  bool allow_missing_heads = false;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

inline std::optional<int> parse_uint(std::string_view s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  for (char c : s)
    if (c < '0' || c > '9') return std::nullopt;
  int v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

class ConlluReader {
 public:
  ConlluReader(std::istream& in, ParseOptions opts) : in_(in), opts_(opts) {}

  Treebank read(std::string source_name) {
    Treebank tb;
    tb.source_name = std::move(source_name);
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (line.empty() || is_blank(line)) {
        flush(tb);
        continue;
      }
      if (!open_) start_sentence();
      if (line[0] == '#') {
        if (!cur_.tokens.empty() || !cur_.mwt.empty())
          fail("comment line after token lines");
        cur_.comments.push_back(line);
        continue;
      }
      token_line(line);
    }
    flush(tb);
    return tb;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, line_no_, ordinal_); }
  [[noreturn]] void fail_at(const std::string& what, std::size_t line) const {
    throw FormatError(what, line, ordinal_);
  }

  void start_sentence() {
    open_ = true;
    ++ordinal_;
    cur_ = Sentence{};
    token_lines_.clear();
    range_lines_.clear();
  }

  void token_line(const std::string& line) {
    auto f = split(line, '\t');
    if (f.size() != 10)
      fail("expected 10 tab-separated fields, found " + std::to_string(f.size()));
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f[i].empty()) fail("empty field in column " + std::to_string(i + 1));
    if (!utf8::is_valid(line)) fail("invalid UTF-8");

    const std::string_view id = f[0];
    if (id.find('.') != std::string_view::npos) fail("empty nodes (decimal ids) are not supported: " + std::string(id));
    if (auto dash = id.find('-'); dash != std::string_view::npos) {
      auto a = parse_uint(id.substr(0, dash));
      auto b = parse_uint(id.substr(dash + 1));
      if (!a || !b) fail("malformed multiword range id '" + std::string(id) + "'");
      if (*a >= *b) fail("multiword range start must be below its end: " + std::string(id));
      if (*a != static_cast<int>(cur_.tokens.size()) + 1)
        fail("multiword range " + std::string(id) + " must precede its first word");
      for (std::size_t c = 2; c < 9; ++c)
        if (f[c] != "_") fail("multiword range lines carry only FORM and MISC (column " + std::to_string(c + 1) + ")");
      cur_.mwt.push_back(MultiwordRange{*a, *b, std::string(f[1]), std::string(f[9])});
      range_lines_.push_back(line_no_);
      return;
    }

    auto idv = parse_uint(id);
    if (!idv || *idv < 1) fail("non-integer word id '" + std::string(id) + "'");
    const int expected = static_cast<int>(cur_.tokens.size()) + 1;
    if (*idv < expected) fail("duplicate word id " + std::to_string(*idv));
    if (*idv > expected)
      fail("word id " + std::to_string(*idv) + " out of sequence, expected " + std::to_string(expected));

    Token t;
    t.id = *idv;
    t.form = f[1];
    t.lemma = f[2];
    t.upos = f[3];
    t.xpos = f[4];
    t.feats = parse_feats(f[5]);
    if (f[6] == "_" && opts_.allow_missing_heads) {
      t.head = -1;
    } else {
      auto h = parse_uint(f[6]);
      if (!h) fail("non-integer head '" + std::string(f[6]) + "'");
      t.head = *h;
    }
    t.deprel = f[7];
    t.deps = f[8];
    if (f[9] != "_")
      for (auto item : split(f[9], '|')) {
        if (item.empty()) fail("empty MISC item");
        t.misc.emplace_back(item);
      }
    cur_.tokens.push_back(std::move(t));
    token_lines_.push_back(line_no_);
  }

  std::vector<Feature> parse_feats(std::string_view col) {
    std::vector<Feature> out;
    if (col == "_") return out;
    for (auto item : split(col, '|')) {
      auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size())
        fail("malformed feature '" + std::string(item) + "'");
      Feature feat{std::string(item.substr(0, eq)), std::string(item.substr(eq + 1))};
      if (!out.empty()) {
        auto prev = ascii_lower(out.back().key);
        auto cur = ascii_lower(feat.key);
        if (prev == cur) fail("duplicate feature key '" + feat.key + "'");
        if (cur < prev) fail("features not sorted: '" + feat.key + "' after '" + out.back().key + "'");
      }
      out.push_back(std::move(feat));
    }
    return out;
  }

  void flush(Treebank& tb) {
    if (!open_) return;
    open_ = false;
    if (cur_.tokens.empty()) fail("sentence without word lines");
    const int n = static_cast<int>(cur_.tokens.size());
    for (std::size_t i = 0; i < cur_.tokens.size(); ++i) {
      const auto& t = cur_.tokens[i];
      if (t.head > n)
        fail_at("head " + std::to_string(t.head) + " of word " + std::to_string(t.id) +
                    " out of range (sentence has " + std::to_string(n) + " words)",
                token_lines_[i]);
    }
    for (std::size_t i = 0; i < cur_.mwt.size(); ++i)
      if (cur_.mwt[i].end > n)
        fail_at("multiword range ends past the last word", range_lines_[i]);
    tb.sentences.push_back(std::move(cur_));
  }

  std::istream& in_;
  ParseOptions opts_;
  std::size_t line_no_ = 0;
  std::size_t ordinal_ = 0;
  bool open_ = false;
  Sentence cur_;
  std::vector<std::size_t> token_lines_;
  std::vector<std::size_t> range_lines_;
};

inline std::string join_feats(const std::vector<Feature>& feats) {
  if (feats.empty()) return "_";
  std::string out;
  for (const auto& f : feats) {
    if (!out.empty()) out += '|';
    out += f.key;
    out += '=';
    out += f.value;
  }
  return out;
}

inline std::string join_misc(const std::vector<std::string>& misc) {
  if (misc.empty()) return "_";
  std::string out;
  for (const auto& m : misc) {
    if (!out.empty()) out += '|';
    out += m;
  }
  return out;
}

}  // namespace detail

// Strict reader. Throws FormatError naming the line and sentence ordinal.
inline Treebank parse_conllu(std::istream& in, std::string source_name = {}, ParseOptions opts = {}) {
  return detail::ConlluReader(in, opts).read(std::move(source_name));
}

inline Treebank parse_conllu_string(std::string_view text, std::string source_name = {},
                                    ParseOptions opts = {}) {
  std::istringstream in{std::string(text)};
  return parse_conllu(in, std::move(source_name), opts);
}

inline void write_sentence(std::ostream& out, const Sentence& s) {
  for (const auto& c : s.comments) out << c << '\n';
  for (const auto& t : s.tokens) {
    for (const auto& r : s.mwt)
      if (r.start == t.id)
        out << r.start << '-' << r.end << '\t' << r.form << "\t_\t_\t_\t_\t_\t_\t_\t" << r.misc << '\n';
    out << t.id << '\t' << t.form << '\t' << t.lemma << '\t' << t.upos << '\t' << t.xpos << '\t'
        << detail::join_feats(t.feats) << '\t';
    if (t.head < 0)
      out << '_';
    else
      out << t.head;
    out << '\t' << t.deprel << '\t' << t.deps << '\t' << detail::join_misc(t.misc) << '\n';
  }
  out << '\n';
}

inline void serialize_conllu(std::ostream& out, const Treebank& tb) {
  for (const auto& s : tb.sentences) write_sentence(out, s);
}

inline std::string serialize_conllu(const Treebank& tb) {
  std::ostringstream out;
  serialize_conllu(out, tb);
  return out.str();
}

// ---------------------------------------------------------------------------
// Tree validation

enum class ViolationKind {
  kNoRoot,
  kMultipleRoots,
  kRootDeprel,     // head 0 but deprel is not "root"
  kMisplacedRoot,  // deprel "root" on a word whose head is not 0
  kSelfLoop,
  kHeadOutOfRange,
  kMissingHead,
  kCycle,
  kOverlappingRanges,
};

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kNoRoot: return "no_root";
    case ViolationKind::kMultipleRoots: return "multiple_roots";
    case ViolationKind::kRootDeprel: return "root_deprel";
    case ViolationKind::kMisplacedRoot: return "misplaced_root";
    case ViolationKind::kSelfLoop: return "self_loop";
    case ViolationKind::kHeadOutOfRange: return "head_out_of_range";
    case ViolationKind::kMissingHead: return "missing_head";
    case ViolationKind::kCycle: return "cycle";
    case ViolationKind::kOverlappingRanges: return "overlapping_ranges";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::vector<int> ids;  // word ids involved (range starts for overlapping ranges)
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(ViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
  }
};

inline ValidationReport validate_tree(const Sentence& s) {
  ValidationReport rep;
  auto add = [&](ViolationKind k, std::vector<int> ids, std::string msg) {
    rep.violations.push_back(Violation{k, std::move(ids), std::move(msg)});
  };
  const int n = static_cast<int>(s.tokens.size());

  std::vector<int> roots;
  bool heads_usable = true;
  for (const auto& t : s.tokens) {
    if (t.head < 0) {
      add(ViolationKind::kMissingHead, {t.id}, "word " + std::to_string(t.id) + " has no head");
      heads_usable = false;
    } else if (t.head > n) {
      add(ViolationKind::kHeadOutOfRange, {t.id}, "word " + std::to_string(t.id) + " points to missing head " + std::to_string(t.head));
      heads_usable = false;
    } else if (t.head == t.id) {
      add(ViolationKind::kSelfLoop, {t.id}, "word " + std::to_string(t.id) + " is its own head");
      heads_usable = false;
    } else if (t.head == 0) {
      roots.push_back(t.id);
      if (t.deprel != "root")
        add(ViolationKind::kRootDeprel, {t.id}, "word " + std::to_string(t.id) + " attaches to 0 with '" + t.deprel + "'");
    } else if (t.deprel == "root") {
      add(ViolationKind::kMisplacedRoot, {t.id}, "word " + std::to_string(t.id) + " labelled root but head is " + std::to_string(t.head));
    }
  }
  if (roots.empty() && n > 0) add(ViolationKind::kNoRoot, {}, "sentence has no root");
  if (roots.size() > 1) add(ViolationKind::kMultipleRoots, roots, std::to_string(roots.size()) + " words attach to 0");

  if (heads_usable) {
    // 0 = unvisited, 1 = on current path, 2 = done
    std::vector<int> state(n + 1, 0);
    state[0] = 2;
    for (int start = 1; start <= n; ++start) {
      std::vector<int> path;
      int v = start;
      while (state[v] == 0) {
        state[v] = 1;
        path.push_back(v);
        v = s.tokens[v - 1].head;
      }
      if (state[v] == 1) {
        std::vector<int> cyc(std::find(path.begin(), path.end(), v), path.end());
        std::sort(cyc.begin(), cyc.end());
        std::string msg = "cycle through words";
        for (int c : cyc) msg += " " + std::to_string(c);
        add(ViolationKind::kCycle, cyc, msg);
      }
      for (int p : path) state[p] = 2;
    }
  }

  for (std::size_t i = 0; i < s.mwt.size(); ++i)
    for (std::size_t j = i + 1; j < s.mwt.size(); ++j) {
      const auto& a = s.mwt[i];
      const auto& b = s.mwt[j];
      if (a.start <= b.end && b.start <= a.end)
        add(ViolationKind::kOverlappingRanges, {a.start, b.start},
            "ranges " + std::to_string(a.start) + "-" + std::to_string(a.end) + " and " +
                std::to_string(b.start) + "-" + std::to_string(b.end) + " overlap");
    }
  return rep;
}

// ---------------------------------------------------------------------------
// Dual-script access

struct ScriptPair {
  std::string latin;
  std::string original;  // empty when the word carries no original-script value
  friend bool operator==(const ScriptPair&, const ScriptPair&) = default;
};

inline std::vector<ScriptPair> extract_script_pairs(const Sentence& s,
                                                    std::string_view key = kDefaultScriptKey) {
  std::vector<ScriptPair> out;
  out.reserve(s.tokens.size());
  for (const auto& t : s.tokens) {
    auto v = t.misc_value(key);
    out.push_back(ScriptPair{t.form, v ? std::string(*v) : std::string()});
  }
  return out;
}

// The MISC key whose values most often contain Arabic-block characters.
inline std::optional<std::string> detect_script_key(const Treebank& tb) {
  std::map<std::string, std::size_t> hits;
  for (const auto& s : tb.sentences)
    for (const auto& t : s.tokens)
      for (const auto& item : t.misc) {
        auto eq = item.find('=');
        if (eq == std::string::npos) continue;
        if (utf8::contains_arabic(std::string_view(item).substr(eq + 1))) ++hits[item.substr(0, eq)];
      }
  std::optional<std::string> best;
  std::size_t best_n = 0;
  for (const auto& [k, n] : hits)
    if (n > best_n) best = k, best_n = n;
  return best;
}

}  // namespace histk
