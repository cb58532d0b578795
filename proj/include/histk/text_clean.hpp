#pragma once

// Repair of transliterated historical-Turkish text damaged by PDF/OCR
// extraction. Stages run in a fixed order:
//
//   normalize -> map -> [diacritic/script rules] -> dehyphenate -> rejoin
//     -> [segmentation rules] -> substitute -> [substitution rules] -> flag
//
// Every edit is recorded as a Change whose offset is a code-point offset into
// the text as it stood before that step, so a report can be replayed onto the
// input to reproduce the output. Mixed-script debris is only flagged.

#include <unicode/normalizer2.h>
#include <unicode/regex.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histk/utf8.hpp"

namespace histk::clean {

enum class ErrorClass {
  kDiacriticEncoding,
  kScriptConversion,
  kWordSegmentation,
  kCharacterSubstitution,
  kMixedScript,
};

inline std::string_view to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::kDiacriticEncoding: return "diacritic_encoding";
    case ErrorClass::kScriptConversion: return "script_conversion";
    case ErrorClass::kWordSegmentation: return "word_segmentation";
    case ErrorClass::kCharacterSubstitution: return "character_substitution";
    case ErrorClass::kMixedScript: return "mixed_script";
  }
  return "unknown";
}

inline std::optional<ErrorClass> error_class_from_string(std::string_view s) {
  for (auto c : {ErrorClass::kDiacriticEncoding, ErrorClass::kScriptConversion, ErrorClass::kWordSegmentation,
                 ErrorClass::kCharacterSubstitution, ErrorClass::kMixedScript})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

enum class RuleScope { kLine, kToken };

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Change {
  std::size_t step = 0;    // index into RepairReport::steps
  std::string rule_id;
  ErrorClass error_class = ErrorClass::kDiacriticEncoding;
  std::size_t offset = 0;  // code points, in the text before this step
  std::string before;
  std::string after;
  double confidence = 1.0;
  std::vector<std::string> alternatives;  // other readings, most likely first
};

struct FlaggedSpan {
  std::size_t offset = 0;  // code points, in the final text
  std::size_t length = 0;
  std::string text;
  std::string reason;  // "arabic_block", "fragment_run" or a detector rule id
  ErrorClass error_class = ErrorClass::kMixedScript;
};

struct RepairReport {
  std::vector<std::string> steps;
  std::vector<Change> changes;
  std::vector<FlaggedSpan> flags;
  std::map<std::string, std::size_t> per_rule;
  std::map<ErrorClass, std::size_t> per_class;
  std::map<std::string, std::size_t> per_character;  // map stage only, keyed by source character

  std::size_t total_changes() const { return changes.size(); }
  bool empty() const { return changes.empty() && flags.empty(); }

  // Appends another report whose steps follow ours.
  void append(const RepairReport& o) {
    const std::size_t base = steps.size();
    steps.insert(steps.end(), o.steps.begin(), o.steps.end());
    for (auto c : o.changes) {
      c.step += base;
      changes.push_back(std::move(c));
    }
    for (const auto& [k, v] : o.per_rule) per_rule[k] += v;
    for (const auto& [k, v] : o.per_class) per_class[k] += v;
    for (const auto& [k, v] : o.per_character) per_character[k] += v;
    flags.insert(flags.end(), o.flags.begin(), o.flags.end());
  }
};

struct RepairRule {
  std::string id;
  ErrorClass error_class = ErrorClass::kDiacriticEncoding;
  std::string pattern;      // ICU regular expression
  std::string replacement;  // ICU replacement template ($1 ...)
  RuleScope scope = RuleScope::kLine;
  bool enabled = true;
  std::vector<std::string> tests;  // sample inputs used for the idempotence check
};

using CharacterMap = std::map<char32_t, std::u32string>;

// ---------------------------------------------------------------------------
// Character classes

namespace detail {

inline bool is_letter(char32_t c) { return u_isalpha(static_cast<UChar32>(c)); }
inline bool is_upper(char32_t c) { return u_isupper(static_cast<UChar32>(c)); }
inline bool is_lower(char32_t c) { return u_islower(static_cast<UChar32>(c)); }
inline bool is_mark(char32_t c) {
  const auto t = u_charType(static_cast<UChar32>(c));
  return t == U_NON_SPACING_MARK || t == U_COMBINING_SPACING_MARK || t == U_ENCLOSING_MARK;
}
inline bool is_space(char32_t c) { return c == U' ' || c == U'\t' || c == 0xA0; }
inline bool is_hyphen(char32_t c) { return c == U'-'; }
inline bool is_quote(char32_t c) {
  return c == U'\'' || c == U'"' || c == U'`' || c == 0xB4 || c == 0x2018 || c == 0x2019 || c == 0x201C ||
         c == 0x201D;
}

inline bool is_turkish_upper(char32_t c) {
  static const std::u32string alphabet = U"ABCÇDEFGĞHIİJKLMNOÖPRSŞTUÜVYZÂÎÛ";
  return alphabet.find(c) != std::u32string::npos;
}

inline std::u32string from_icu(const icu::UnicodeString& s) {
  std::u32string out(static_cast<std::size_t>(s.countChar32()), U'\0');
  UErrorCode st = U_ZERO_ERROR;
  s.toUTF32(reinterpret_cast<UChar32*>(out.data()), static_cast<int32_t>(out.size()), st);
  return out;
}

inline icu::UnicodeString to_icu(std::u32string_view s) {
  return icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(s.data()), static_cast<int32_t>(s.size()));
}

inline std::string u8(std::u32string_view s) { return utf8::encode(s); }

struct Edit {
  std::size_t offset;
  std::size_t length;
  std::u32string replacement;
  double confidence = 1.0;
  std::vector<std::string> alternatives;
};

// Applies sorted, non-overlapping edits and records them in the report.
inline std::u32string commit(const std::u32string& text, const std::vector<Edit>& edits, const std::string& step,
                             const std::string& rule_id, ErrorClass cls, RepairReport& rep) {
  const std::size_t step_index = rep.steps.size();
  rep.steps.push_back(step);
  std::u32string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  for (const auto& e : edits) {
    out.append(text, pos, e.offset - pos);
    out.append(e.replacement);
    pos = e.offset + e.length;
    Change c;
    c.step = step_index;
    c.rule_id = rule_id;
    c.error_class = cls;
    c.offset = e.offset;
    c.before = u8(std::u32string_view(text).substr(e.offset, e.length));
    c.after = u8(e.replacement);
    c.confidence = e.confidence;
    c.alternatives = e.alternatives;
    rep.changes.push_back(std::move(c));
    ++rep.per_rule[rule_id];
    ++rep.per_class[cls];
  }
  out.append(text, pos, std::u32string::npos);
  return out;
}

inline const icu::Normalizer2& nfc() {
  UErrorCode st = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(st);
  if (U_FAILURE(st) || n == nullptr) throw std::runtime_error("ICU NFC normalizer unavailable");
  return *n;
}

}  // namespace detail

// Replays the changes of a report onto the text it was produced from.
inline std::string replay(std::string_view input, const RepairReport& rep) {
  std::u32string text = utf8::decode(input);
  for (std::size_t step = 0; step < rep.steps.size(); ++step) {
    std::u32string out;
    std::size_t pos = 0;
    for (const auto& c : rep.changes) {
      if (c.step != step) continue;
      const auto before = utf8::decode(c.before);
      if (c.offset < pos || c.offset + before.size() > text.size() ||
          text.compare(c.offset, before.size(), before) != 0)
        throw std::logic_error("report does not replay onto its input at step " + rep.steps[step]);
      out.append(text, pos, c.offset - pos);
      out.append(utf8::decode(c.after));
      pos = c.offset + before.size();
    }
    out.append(text, pos, std::u32string::npos);
    text = std::move(out);
  }
  return utf8::encode(text);
}

// ---------------------------------------------------------------------------
// Stages on code-point strings

// Canonical composition. Segments are cut where NFC guarantees a boundary so
// each changed segment becomes one Change.
inline std::u32string normalize_u32(const std::u32string& text, RepairReport& rep) {
  const auto& n = detail::nfc();
  std::vector<detail::Edit> edits;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i + 1;
    while (j < text.size() && !n.hasBoundaryBefore(static_cast<UChar32>(text[j]))) ++j;
    UErrorCode st = U_ZERO_ERROR;
    auto seg = detail::to_icu(std::u32string_view(text).substr(i, j - i));
    if (!n.isNormalized(seg, st)) {
      st = U_ZERO_ERROR;
      auto normalized = n.normalize(seg, st);
      if (U_FAILURE(st)) throw std::runtime_error("ICU normalization failed");
      edits.push_back(detail::Edit{i, j - i, detail::from_icu(normalized)});
    }
    i = j;
  }
  return detail::commit(text, edits, "normalize", "normalize", ErrorClass::kDiacriticEncoding, rep);
}

inline std::u32string map_u32(const std::u32string& text, const CharacterMap& map, RepairReport& rep) {
  std::vector<detail::Edit> edits;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto it = map.find(text[i]);
    if (it == map.end()) continue;
    edits.push_back(detail::Edit{i, 1, it->second});
    ++rep.per_character[detail::u8(std::u32string(1, text[i]))];
  }
  return detail::commit(text, edits, "map", "map", ErrorClass::kDiacriticEncoding, rep);
}

namespace detail {

// Letter followed by its combining marks.
inline std::size_t grapheme_end(const std::u32string& t, std::size_t i) {
  std::size_t j = i + 1;
  while (j < t.size() && is_mark(t[j])) ++j;
  return j;
}

struct Piece {
  std::size_t begin;
  std::size_t end;
};

// Whitespace-separated chunks of one line region [from, to).
inline std::vector<Piece> chunks(const std::u32string& t, std::size_t from, std::size_t to) {
  std::vector<Piece> out;
  std::size_t i = from;
  while (i < to) {
    while (i < to && is_space(t[i])) ++i;
    std::size_t j = i;
    while (j < to && !is_space(t[j])) ++j;
    if (j > i) out.push_back(Piece{i, j});
    i = j;
  }
  return out;
}

template <typename F>
void for_each_line(const std::u32string& t, F&& f) {
  std::size_t i = 0;
  while (i <= t.size()) {
    std::size_t j = t.find(U'\n', i);
    if (j == std::u32string::npos) j = t.size();
    f(i, j);
    i = j + 1;
  }
}

// Letters-only span [b, e) counted in graphemes; npos when not letters-only.
inline std::size_t letter_count(const std::u32string& t, std::size_t b, std::size_t e) {
  std::size_t n = 0;
  std::size_t i = b;
  while (i < e) {
    if (!is_letter(t[i])) return std::u32string::npos;
    i = grapheme_end(t, i);
    if (i > e) return std::u32string::npos;
    ++n;
  }
  return n;
}

inline bool all_upper(const std::u32string& t, std::size_t b, std::size_t e) {
  for (std::size_t i = b; i < e; ++i)
    if (is_letter(t[i]) && !is_upper(t[i])) return false;
  return true;
}

}  // namespace detail

// Compiled ICU pattern shared between pipeline copies. Creating matchers from
// a const pattern is thread-safe.
class CompiledPattern {
 public:
  CompiledPattern() = default;
  explicit CompiledPattern(const std::string& pattern) : source_(pattern) {
    UParseError perr;
    UErrorCode st = U_ZERO_ERROR;
    pattern_.reset(icu::RegexPattern::compile(icu::UnicodeString::fromUTF8(pattern), 0, perr, st));
    if (U_FAILURE(st) || !pattern_)
      throw RuleError("pattern '" + pattern + "' does not compile: " + u_errorName(st) + " at offset " +
                      std::to_string(perr.offset));
  }

  bool valid() const { return pattern_ != nullptr; }
  const std::string& source() const { return source_; }

  bool find_in(std::u32string_view s) const {
    UErrorCode st = U_ZERO_ERROR;
    auto text = detail::to_icu(s);
    std::unique_ptr<icu::RegexMatcher> m(pattern_->matcher(text, st));
    return U_SUCCESS(st) && m->find();
  }

  // Matches as (offset, length) in code points of s.
  std::vector<std::pair<std::size_t, std::size_t>> matches(std::u32string_view s) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    UErrorCode st = U_ZERO_ERROR;
    auto text = detail::to_icu(s);
    std::unique_ptr<icu::RegexMatcher> m(pattern_->matcher(text, st));
    while (U_SUCCESS(st) && m->find(st)) {
      const int32_t b = m->start(st), e = m->end(st);
      if (e == b) {
        if (e >= text.length()) break;
        continue;
      }
      out.emplace_back(static_cast<std::size_t>(text.countChar32(0, b)),
                       static_cast<std::size_t>(text.countChar32(b, e - b)));
    }
    return out;
  }

  // Each non-empty match with its substituted replacement.
  std::vector<detail::Edit> edits(std::u32string_view s, const std::string& replacement, std::size_t base) const {
    std::vector<detail::Edit> out;
    UErrorCode st = U_ZERO_ERROR;
    auto text = detail::to_icu(s);
    std::unique_ptr<icu::RegexMatcher> m(pattern_->matcher(text, st));
    const auto repl = icu::UnicodeString::fromUTF8(replacement);
    int32_t prev_end = 0;  // appendReplacement copies the gap since the previous match first
    while (U_SUCCESS(st) && m->find(st)) {
      const int32_t b = m->start(st), e = m->end(st);
      icu::UnicodeString dest;
      m->appendReplacement(dest, repl, st);
      const int32_t gap = b - prev_end;
      prev_end = e;
      if (e == b) continue;
      out.push_back(detail::Edit{base + static_cast<std::size_t>(text.countChar32(0, b)),
                                 static_cast<std::size_t>(text.countChar32(b, e - b)),
                                 detail::from_icu(dest.tempSubString(gap))});
    }
    if (U_FAILURE(st)) throw RuleError("replacement failed for pattern '" + source_ + "': " + u_errorName(st));
    return out;
  }

 private:
  std::string source_;
  std::shared_ptr<icu::RegexPattern> pattern_;
};

struct Builtins {
  bool normalize = true;
  bool map = true;
  bool dehyphenate = true;
  bool rejoin = true;
  bool substitute = true;
  bool flag = true;
};

struct RulePipeline {
  CharacterMap character_map;
  std::vector<RepairRule> rules;
  std::vector<std::string> protected_hyphen_patterns;
  Builtins builtins;

  // Filled by compile(); parallel to rules / protected_hyphen_patterns.
  std::vector<CompiledPattern> compiled_rules;
  std::vector<CompiledPattern> compiled_protected;

  bool compiled() const {
    return compiled_rules.size() == rules.size() && compiled_protected.size() == protected_hyphen_patterns.size();
  }
};

// ---------------------------------------------------------------------------
// Segmentation repairs

// True when "left-right" must keep its hyphen.
inline bool hyphen_protected(const RulePipeline& p, std::u32string_view left, std::u32string_view right) {
  std::u32string joined(left);
  joined += U'-';
  joined += right;
  for (const auto& pat : p.compiled_protected)
    if (pat.find_in(joined)) return true;
  return false;
}

inline std::u32string dehyphenate_u32(const std::u32string& text, const RulePipeline& p, RepairReport& rep) {
  using namespace detail;
  // Line-break hyphens: "ya-\nzıldığı" -> "yazıldığı".
  std::vector<Edit> breaks;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    if (!is_hyphen(text[i]) || !(is_letter(text[i - 1]) || is_mark(text[i - 1]))) continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j >= text.size() || text[j] != U'\n') continue;
    ++j;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j >= text.size() || !is_lower(text[j])) continue;
    std::size_t lb = i;
    while (lb > 0 && (is_letter(text[lb - 1]) || is_mark(text[lb - 1]))) --lb;
    std::size_t re = j;
    while (re < text.size() && (is_letter(text[re]) || is_mark(text[re]))) ++re;
    if (hyphen_protected(p, std::u32string_view(text).substr(lb, i - lb), std::u32string_view(text).substr(j, re - j)))
      continue;
    breaks.push_back(Edit{i, j - i, U""});
    i = j - 1;
  }
  std::u32string t1 = commit(text, breaks, "dehyphenate.linebreak", "dehyphenate.linebreak",
                             ErrorClass::kWordSegmentation, rep);

  // Hyphens inside a token that split a lowercase fragment off a word.
  std::vector<Edit> inline_edits;
  for_each_line(t1, [&](std::size_t from, std::size_t to) {
    for (const auto& pc : chunks(t1, from, to)) {
      for (std::size_t h = pc.begin + 1; h + 1 < pc.end; ++h) {
        if (!is_hyphen(t1[h])) continue;
        std::size_t lb = h;
        while (lb > pc.begin && (is_letter(t1[lb - 1]) || is_mark(t1[lb - 1]))) --lb;
        std::size_t re = h + 1;
        while (re < pc.end && (is_letter(t1[re]) || is_mark(t1[re]))) ++re;
        if (lb == h || re == h + 1) continue;
        if (!is_lower(t1[h + 1])) continue;
        if (letter_count(t1, h + 1, re) < 2) continue;
        auto left = std::u32string_view(t1).substr(lb, h - lb);
        auto right = std::u32string_view(t1).substr(h + 1, re - h - 1);
        if (left == right) continue;
        if (hyphen_protected(p, left, right)) continue;
        inline_edits.push_back(Edit{h, 1, U""});
      }
    }
  });
  return commit(t1, inline_edits, "dehyphenate.inline", "dehyphenate.inline", ErrorClass::kWordSegmentation, rep);
}

// Joins runs of spaced-out letters ("G Ü R İZ G Â H" -> "GÜRİZGÂH"). A run is a
// maximal sequence of same-case pieces: uppercase pieces of one or two letters,
// or lowercase single letters. It is joined when it holds at least three
// single letters. Leading punctuation may open a run and trailing punctuation
// closes it.
inline std::u32string rejoin_u32(const std::u32string& text, RepairReport& rep) {
  using namespace detail;
  std::vector<Edit> edits;
  for_each_line(text, [&](std::size_t from, std::size_t to) {
    struct Cand {
      Piece whole;
      std::size_t core_b, core_e;
      int kind;  // 1 upper, 2 lower single
      bool single;
      bool lead, trail;
    };
    auto classify = [&](const Piece& pc) -> std::optional<Cand> {
      std::size_t b = pc.begin, e = pc.end;
      while (b < e && !is_letter(text[b]) && !is_mark(text[b])) ++b;
      while (e > b && !is_letter(text[e - 1]) && !is_mark(text[e - 1])) --e;
      if (b == e) return std::nullopt;
      for (std::size_t k = pc.begin; k < b; ++k)
        if (is_letter(text[k]) || u_isdigit(static_cast<UChar32>(text[k]))) return std::nullopt;
      for (std::size_t k = e; k < pc.end; ++k)
        if (u_isdigit(static_cast<UChar32>(text[k]))) return std::nullopt;
      const std::size_t n = letter_count(text, b, e);
      if (n == std::u32string::npos || n > 2) return std::nullopt;
      int kind;
      if (all_upper(text, b, e))
        kind = 1;
      else if (n == 1 && is_lower(text[b]))
        kind = 2;
      else
        return std::nullopt;
      return Cand{pc, b, e, kind, n == 1, b > pc.begin, e < pc.end};
    };

    auto pieces = chunks(text, from, to);
    std::size_t i = 0;
    while (i < pieces.size()) {
      auto first = classify(pieces[i]);
      if (!first) {
        ++i;
        continue;
      }
      std::vector<Cand> run{*first};
      std::size_t j = i + 1;
      while (!run.back().trail && j < pieces.size()) {
        auto next = classify(pieces[j]);
        if (!next || next->kind != run.front().kind || next->lead) break;
        run.push_back(*next);
        ++j;
      }
      const auto singles = std::count_if(run.begin(), run.end(), [](const Cand& c) { return c.single; });
      if (run.size() >= 2 && singles >= 3) {
        std::u32string joined(text, run.front().whole.begin, run.front().core_e - run.front().whole.begin);
        for (std::size_t k = 1; k < run.size(); ++k)
          joined.append(text, run[k].core_b, run[k].core_e - run[k].core_b);
        joined.append(text, run.back().core_e, run.back().whole.end - run.back().core_e);
        const std::size_t off = run.front().whole.begin;
        edits.push_back(Edit{off, run.back().whole.end - off, joined});
      }
      i = j;
    }
  });
  return commit(text, edits, "rejoin", "rejoin", ErrorClass::kWordSegmentation, rep);
}

// Lowercase 't' inside an otherwise uppercase word is a misread dotted capital
// 'İ' ("HtSÂB-t" -> "HİSÂB-İ"). Needs two or more genuine capitals, all from
// the Turkish alphabet. A 't' standing alone after a hyphen is the izafet
// vowel, whose case cannot be decided: 'İ' is emitted with 'ı' as alternative.
inline std::u32string substitute_u32(const std::u32string& text, RepairReport& rep) {
  using namespace detail;
  std::vector<Edit> edits;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_letter(text[i])) {
      ++i;
      continue;
    }
    std::size_t e = i;
    while (e < text.size() && (is_letter(text[e]) || is_mark(text[e]) ||
                               (is_hyphen(text[e]) && e + 1 < text.size() && is_letter(text[e + 1]) && e > i)))
      ++e;
    std::size_t uppers = 0, ts = 0;
    bool ok = true;
    for (std::size_t k = i; k < e && ok; ++k) {
      const char32_t c = text[k];
      if (c == U't')
        ++ts;
      else if (is_letter(c) && is_upper(c))
        ok = is_turkish_upper(c), ++uppers;
      else if (is_letter(c))
        ok = false;
    }
    if (ok && ts > 0 && uppers >= 2) {
      for (std::size_t k = i; k < e; ++k) {
        if (text[k] != U't') continue;
        const bool alone = k > i && is_hyphen(text[k - 1]) && (k + 1 == e || is_hyphen(text[k + 1]));
        if (alone)
          edits.push_back(Edit{k, 1, U"İ", 0.5, {"İ", "ı"}});
        else
          edits.push_back(Edit{k, 1, U"İ", 0.9, {"İ"}});
      }
    }
    i = e;
  }
  return commit(text, edits, "substitute", "substitute.dotted_capital_i", ErrorClass::kCharacterSubstitution, rep);
}

// ---------------------------------------------------------------------------
// Mixed-script detection

namespace detail {

inline bool is_letter_name(std::u32string_view w) {
  static const std::set<std::u32string> names = {
      U"Elif", U"Be", U"Pe", U"Te", U"Se", U"Cim", U"Çim", U"Ha", U"Hı", U"Dal", U"Zel", U"Re",
      U"Ze",   U"Je", U"Sin", U"Şın", U"Sad", U"Dad", U"Tı", U"Zı", U"Ayın", U"Gayın", U"Fe", U"Kaf",
      U"Kef",  U"Gef", U"Nef", U"Lam", U"Mim", U"Nun", U"Vav", U"He", U"Ye", U"Lamelif", U"Hemze"};
  return names.count(std::u32string(w)) > 0;
}

enum class Junk { kNone, kWeakUpper, kWeakLower, kStrong };

inline Junk junk_kind(const std::u32string& t, const Piece& pc) {
  const auto w = std::u32string_view(t).substr(pc.begin, pc.end - pc.begin);
  bool all_quotes = true;
  for (char32_t c : w) all_quotes = all_quotes && is_quote(c);
  if (all_quotes) return Junk::kStrong;
  for (char32_t c : w)
    if (utf8::is_arabic_block(c)) return Junk::kStrong;
  if (is_letter_name(w)) return Junk::kStrong;
  for (std::size_t k = 1; k < w.size(); ++k)
    if (is_lower(w[k - 1]) && is_upper(w[k])) return Junk::kStrong;
  if (w.size() == 2 && is_letter(w[0]) && w[1] == U'.') return Junk::kStrong;
  const std::size_t n = letter_count(t, pc.begin, pc.end);
  if (n == 1) return is_upper(w[0]) ? Junk::kWeakUpper : Junk::kWeakLower;
  if (n == 2 && all_upper(t, pc.begin, pc.end)) return Junk::kWeakUpper;
  return Junk::kNone;
}

}  // namespace detail

inline std::vector<FlaggedSpan> flag_u32(const std::u32string& text, const RulePipeline* p = nullptr) {
  using namespace detail;
  std::vector<FlaggedSpan> flags;
  auto add = [&](std::size_t b, std::size_t e, std::string reason) {
    flags.push_back(FlaggedSpan{b, e - b, u8(std::u32string_view(text).substr(b, e - b)), std::move(reason)});
  };

  // Residual Perso-Arabic characters.
  for (std::size_t i = 0; i < text.size();) {
    if (!utf8::is_arabic_block(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (utf8::is_arabic_block(text[j]) || is_mark(text[j]))) ++j;
    add(i, j, "arabic_block");
    i = j;
  }

  // Runs of three or more fragment tokens with mixed case or unmistakable debris.
  for_each_line(text, [&](std::size_t from, std::size_t to) {
    auto pieces = chunks(text, from, to);
    std::size_t i = 0;
    while (i < pieces.size()) {
      std::size_t j = i;
      bool strong = false, upper = false, lower = false;
      while (j < pieces.size()) {
        auto k = junk_kind(text, pieces[j]);
        if (k == Junk::kNone) break;
        strong |= k == Junk::kStrong;
        upper |= k == Junk::kWeakUpper;
        lower |= k == Junk::kWeakLower;
        ++j;
      }
      if (j - i >= 3 && (strong || (upper && lower))) {
        bool only_arabic = true;
        for (std::size_t k = pieces[i].begin; k < pieces[j - 1].end; ++k)
          only_arabic = only_arabic && (utf8::is_arabic_block(text[k]) || is_mark(text[k]) || is_space(text[k]));
        if (!only_arabic) add(pieces[i].begin, pieces[j - 1].end, "fragment_run");
      }
      i = j == i ? i + 1 : j;
    }
  });

  if (p != nullptr)
    for (std::size_t r = 0; r < p->rules.size(); ++r) {
      const auto& rule = p->rules[r];
      if (!rule.enabled || rule.error_class != ErrorClass::kMixedScript) continue;
      for (auto [off, len] : p->compiled_rules[r].matches(text)) add(off, off + len, rule.id);
    }

  std::sort(flags.begin(), flags.end(),
            [](const FlaggedSpan& a, const FlaggedSpan& b) { return std::tie(a.offset, a.length) < std::tie(b.offset, b.length); });
  return flags;
}

// ---------------------------------------------------------------------------
// Custom regex rules

inline std::u32string apply_rule_u32(const std::u32string& text, const RepairRule& rule, const CompiledPattern& pat,
                                     RepairReport& rep) {
  std::vector<detail::Edit> edits;
  if (rule.scope == RuleScope::kLine) {
    detail::for_each_line(text, [&](std::size_t from, std::size_t to) {
      auto e = pat.edits(std::u32string_view(text).substr(from, to - from), rule.replacement, from);
      edits.insert(edits.end(), e.begin(), e.end());
    });
  } else {
    detail::for_each_line(text, [&](std::size_t from, std::size_t to) {
      for (const auto& pc : detail::chunks(text, from, to)) {
        auto e = pat.edits(std::u32string_view(text).substr(pc.begin, pc.end - pc.begin), rule.replacement, pc.begin);
        edits.insert(edits.end(), e.begin(), e.end());
      }
    });
  }
  return detail::commit(text, edits, "rule:" + rule.id, rule.id, rule.error_class, rep);
}

// ---------------------------------------------------------------------------
// Pipeline assembly

inline CharacterMap default_character_map() {
  return CharacterMap{
      {U'ñ', U"n"},  // sağır nun
      {U'À', U"a"},
      {U'à', U"ğ"},
      {U'ò', U"h"},
      {U'è', U""},   // ayn marker
      {U'ú', U"k"},
  };
}

inline std::vector<std::string> default_protected_hyphen_patterns() {
  return {
      // izafet: Sırat-ı, Servet-i, Hâme-yi
      "^\\p{L}+-y?[ıiuüIİUÜ]$",
      // numbers and ranges
      "\\d",
  };
}

inline std::vector<RepairRule> default_rules() {
  auto circumflex = [](std::string id, std::string base, std::string composed) {
    return RepairRule{std::move(id), ErrorClass::kDiacriticEncoding, base + "\\x{02C6}", composed,
                      RuleScope::kToken, true, {base + "ˆ" + "lem", "â"}};
  };
  return {
      circumflex("spacing-circumflex-a", "a", "â"),
      circumflex("spacing-circumflex-i", "i", "î"),
      circumflex("spacing-circumflex-u", "u", "û"),
      circumflex("spacing-circumflex-A", "A", "Â"),
      circumflex("spacing-circumflex-I", "I", "Î"),
      circumflex("spacing-circumflex-U", "U", "Û"),
  };
}

namespace detail {

inline std::vector<std::string> probe_strings() {
  return {
      "Dil-beruñ her òandesi biñ cÀn baàışlar èÀşıúa",
      "Bu mutabakatle beraber, keşf edilen eski ya WU J. ıS i J e Ha Tı Ye Kef Lam Mim Nun te de yazıldığı",
      "G Ü R ÎZ : , yâhut G Ü R İZ G Â H :",
      "HtSÂB-t C Ü M EL: Ebced hi-sâbının diğer adıdır",
      "İran şâirlerinden: J i j Z j S ' C j",
      "Sırat-ı Müstakim 1908-1923 yıllarında çıktı.",
      "",
  };
}

}  // namespace detail

// Compiles patterns and checks the pipeline invariants. Throws RuleError.
inline void compile(RulePipeline& p) {
  std::set<std::string> ids;
  p.compiled_rules.clear();
  p.compiled_protected.clear();
  for (const auto& r : p.rules) {
    if (r.id.empty()) throw RuleError("rule without id");
    if (!ids.insert(r.id).second) throw RuleError("duplicate rule id '" + r.id + "'");
    p.compiled_rules.emplace_back(r.pattern);
  }
  for (const auto& pat : p.protected_hyphen_patterns) p.compiled_protected.emplace_back(pat);
  for (const auto& [from, to] : p.character_map)
    for (char32_t c : to)
      if (p.character_map.count(c))
        throw RuleError("character map is not idempotent: '" + detail::u8(std::u32string(1, from)) + "' maps onto mapped character '" +
                        detail::u8(std::u32string(1, c)) + "'");

  for (std::size_t r = 0; r < p.rules.size(); ++r) {
    const auto& rule = p.rules[r];
    if (rule.error_class == ErrorClass::kMixedScript) continue;  // detectors never rewrite
    auto probes = detail::probe_strings();
    probes.insert(probes.end(), rule.tests.begin(), rule.tests.end());
    for (const auto& s : probes) {
      RepairReport scratch;
      auto once = apply_rule_u32(utf8::decode(s), rule, p.compiled_rules[r], scratch);
      auto twice = apply_rule_u32(once, rule, p.compiled_rules[r], scratch);
      if (once != twice)
        throw RuleError("rule '" + rule.id + "' is not idempotent on '" + s + "'");
    }
  }
}

inline RulePipeline default_pipeline() {
  RulePipeline p;
  p.character_map = default_character_map();
  p.rules = default_rules();
  p.protected_hyphen_patterns = default_protected_hyphen_patterns();
  compile(p);
  return p;
}

inline RulePipeline empty_pipeline() {
  RulePipeline p;
  compile(p);
  return p;
}

namespace detail {

inline std::u32string run_rules(const std::u32string& text, const RulePipeline& p,
                                std::initializer_list<ErrorClass> classes, RepairReport& rep) {
  std::u32string t = text;
  for (std::size_t r = 0; r < p.rules.size(); ++r) {
    const auto& rule = p.rules[r];
    if (!rule.enabled) continue;
    if (std::find(classes.begin(), classes.end(), rule.error_class) == classes.end()) continue;
    t = apply_rule_u32(t, rule, p.compiled_rules[r], rep);
  }
  return t;
}

inline void require_compiled(const RulePipeline& p) {
  if (!p.compiled()) throw RuleError("pipeline used before compile()");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public UTF-8 entry points. Invalid UTF-8 throws utf8::DecodeError with the
// byte offset.

struct Repaired {
  std::string text;
  RepairReport report;
};

inline std::string normalize_unicode(std::string_view text) {
  RepairReport rep;
  return utf8::encode(normalize_u32(utf8::decode(text), rep));
}

inline Repaired normalize_unicode_report(std::string_view text) {
  Repaired r;
  r.text = utf8::encode(normalize_u32(utf8::decode(text), r.report));
  return r;
}

inline Repaired apply_map(std::string_view text, const CharacterMap& map) {
  Repaired r;
  r.text = utf8::encode(map_u32(utf8::decode(text), map, r.report));
  return r;
}

inline Repaired rejoin_spaced_letters(std::string_view text) {
  Repaired r;
  r.text = utf8::encode(rejoin_u32(utf8::decode(text), r.report));
  return r;
}

inline Repaired dehyphenate_linebreaks(std::string_view text, const RulePipeline& p) {
  detail::require_compiled(p);
  Repaired r;
  r.text = utf8::encode(dehyphenate_u32(utf8::decode(text), p, r.report));
  return r;
}

inline Repaired dehyphenate_linebreaks(std::string_view text) {
  static const RulePipeline defaults = default_pipeline();
  return dehyphenate_linebreaks(text, defaults);
}

inline Repaired repair_substitutions(std::string_view text) {
  Repaired r;
  r.text = utf8::encode(substitute_u32(utf8::decode(text), r.report));
  return r;
}

inline std::vector<FlaggedSpan> flag_mixed_script(std::string_view text) { return flag_u32(utf8::decode(text)); }

inline Repaired run_pipeline(std::string_view text, const RulePipeline& p) {
  detail::require_compiled(p);
  Repaired r;
  auto& rep = r.report;
  std::u32string t = utf8::decode(text);
  if (p.builtins.normalize) t = normalize_u32(t, rep);
  if (p.builtins.map) t = map_u32(t, p.character_map, rep);
  t = detail::run_rules(t, p, {ErrorClass::kDiacriticEncoding, ErrorClass::kScriptConversion}, rep);
  if (p.builtins.dehyphenate) t = dehyphenate_u32(t, p, rep);
  if (p.builtins.rejoin) t = rejoin_u32(t, rep);
  t = detail::run_rules(t, p, {ErrorClass::kWordSegmentation}, rep);
  if (p.builtins.substitute) t = substitute_u32(t, rep);
  t = detail::run_rules(t, p, {ErrorClass::kCharacterSubstitution}, rep);
  if (p.builtins.flag) rep.flags = flag_u32(t, &p);
  r.text = utf8::encode(t);
  return r;
}

}  // namespace histk::clean
