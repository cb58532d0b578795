#pragma once

// JSON form of a RulePipeline:
// {
//   "version": 1,
//   "character_map": {"ñ": "n", "è": ""},
//   "protected_hyphen_patterns": ["^\\p{L}+-y?[ıiuüIİUÜ]$"],
//   "builtins": {"normalize": true, "map": true, "dehyphenate": true,
//                "rejoin": true, "substitute": true, "flag": true},
//   "rules": [{"id": "...", "class": "diacritic_encoding", "pattern": "...",
//              "replacement": "...", "scope": "token", "enabled": true,
//              "tests": ["..."]}]
// }
// Missing sections fall back to the defaults; unknown keys are rejected.

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "histk/text_clean.hpp"

namespace histk::clean {

inline constexpr int kRuleConfigVersion = 1;

inline nlohmann::ordered_json pipeline_to_json(const RulePipeline& p) {
  nlohmann::ordered_json j;
  j["version"] = kRuleConfigVersion;
  nlohmann::ordered_json map = nlohmann::ordered_json::object();
  for (const auto& [from, to] : p.character_map) map[utf8::encode(std::u32string(1, from))] = utf8::encode(to);
  j["character_map"] = map;
  j["protected_hyphen_patterns"] = p.protected_hyphen_patterns;
  j["builtins"] = {{"normalize", p.builtins.normalize}, {"map", p.builtins.map},
                   {"dehyphenate", p.builtins.dehyphenate}, {"rejoin", p.builtins.rejoin},
                   {"substitute", p.builtins.substitute}, {"flag", p.builtins.flag}};
  j["rules"] = nlohmann::ordered_json::array();
  for (const auto& r : p.rules)
    j["rules"].push_back({{"id", r.id},
                          {"class", std::string(to_string(r.error_class))},
                          {"pattern", r.pattern},
                          {"replacement", r.replacement},
                          {"scope", r.scope == RuleScope::kLine ? "line" : "token"},
                          {"enabled", r.enabled},
                          {"tests", r.tests}});
  return j;
}

namespace detail {

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw RuleError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw RuleError("unknown key '" + k + "' in " + where);
  }
}

}  // namespace detail

// Builds and compiles a pipeline; every problem surfaces as RuleError.
inline RulePipeline pipeline_from_json(const nlohmann::json& j) {
  RulePipeline p;
  try {
    detail::only_keys(j, {"version", "character_map", "protected_hyphen_patterns", "builtins", "rules"},
                      "rule config");
    const int version = j.at("version").get<int>();
    if (version != kRuleConfigVersion)
      throw RuleError("rule config version " + std::to_string(version) + " is not supported");
    p.character_map = j.contains("character_map") ? CharacterMap{} : default_character_map();
    if (j.contains("character_map")) {
      for (const auto& [k, v] : j.at("character_map").items()) {
        const auto from = utf8::decode(k);
        if (from.size() != 1) throw RuleError("character map key '" + k + "' is not a single code point");
        p.character_map[from[0]] = utf8::decode(v.get<std::string>());
      }
    }
    p.protected_hyphen_patterns = j.contains("protected_hyphen_patterns")
                                      ? j.at("protected_hyphen_patterns").get<std::vector<std::string>>()
                                      : default_protected_hyphen_patterns();
    if (j.contains("builtins")) {
      const auto& b = j.at("builtins");
      detail::only_keys(b, {"normalize", "map", "dehyphenate", "rejoin", "substitute", "flag"}, "builtins");
      p.builtins.normalize = b.value("normalize", true);
      p.builtins.map = b.value("map", true);
      p.builtins.dehyphenate = b.value("dehyphenate", true);
      p.builtins.rejoin = b.value("rejoin", true);
      p.builtins.substitute = b.value("substitute", true);
      p.builtins.flag = b.value("flag", true);
    }
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) {
        detail::only_keys(r, {"id", "class", "pattern", "replacement", "scope", "enabled", "tests"}, "rule");
        RepairRule rule;
        rule.id = r.at("id").get<std::string>();
        const auto cls = r.at("class").get<std::string>();
        const auto ec = error_class_from_string(cls);
        if (!ec) throw RuleError("rule '" + rule.id + "': unknown class '" + cls + "'");
        rule.error_class = *ec;
        rule.pattern = r.at("pattern").get<std::string>();
        rule.replacement = r.value("replacement", std::string{});
        const auto scope = r.value("scope", std::string("line"));
        if (scope == "line")
          rule.scope = RuleScope::kLine;
        else if (scope == "token")
          rule.scope = RuleScope::kToken;
        else
          throw RuleError("rule '" + rule.id + "': scope must be 'line' or 'token'");
        rule.enabled = r.value("enabled", true);
        rule.tests = r.value("tests", std::vector<std::string>{});
        p.rules.push_back(std::move(rule));
      }
    } else {
      p.rules = default_rules();
    }
  } catch (const nlohmann::json::exception& e) {
    throw RuleError(std::string("rule config: ") + e.what());
  } catch (const utf8::DecodeError& e) {
    throw RuleError(std::string("rule config: ") + e.what());
  }
  compile(p);
  return p;
}

inline RulePipeline load_pipeline(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuleError("cannot open rule config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw RuleError("rule config " + path + " is not valid JSON: " + e.what());
  }
  return pipeline_from_json(j);
}

}  // namespace histk::clean
