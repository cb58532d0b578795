// histk: command-line front end.
//
// Exit codes: 0 success, 1 task-level failure (violations, mismatches,
// divergence), 2 usage or environment error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "histk/clean_config.hpp"
#include "histk/conllu.hpp"
#include "histk/eval_metrics.hpp"
#include "histk/ner.hpp"
#include "histk/parse/model_io.hpp"
#include "histk/parse/train.hpp"
#include "histk/report.hpp"
#include "histk/text_clean.hpp"
#include "histk/treebank_stats.hpp"

namespace fs = std::filesystem;
using histk::report::Json;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

// Usage or environment problem; maps to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Task-level failure with a structured report already filled in; maps to exit 1.
struct TaskFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string format = "text";
  std::string report_path;
  int jobs = 1;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> expand(const std::string& path, const std::vector<std::string>& exts) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && std::find(exts.begin(), exts.end(), e.path().extension().string()) != exts.end())
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw UsageError("no input files in directory " + path);
    return files;
  }
  if (!fs::is_regular_file(path, ec)) throw UsageError("no such file: " + path);
  return {path};
}

std::string stem_of(const std::string& path) {
  fs::path p(path);
  if (p.has_filename() && p.filename() != ".") return p.has_extension() ? p.stem().string() : p.filename().string();
  return p.parent_path().filename().string();
}

histk::Treebank load_treebank(const std::string& path, histk::ParseOptions opts = {}) {
  histk::Treebank tb;
  tb.source_name = stem_of(path);
  for (const auto& f : expand(path, {".conllu"})) {
    std::istringstream in(read_file(f));
    auto part = histk::parse_conllu(in, f, opts);
    for (auto& s : part.sentences) tb.sentences.push_back(std::move(s));
  }
  return tb;
}

histk::NerCorpus load_ner(const std::string& path) {
  std::istringstream in(read_file(path));
  return histk::parse_conll2003(in, {}, stem_of(path));
}

// Runs fn(i) for i in [0, n) on up to jobs threads; results land by index so
// output order never depends on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void emit(const Common& c, Json report, const std::string& text) {
  report["schema_version"] = histk::report::kSchemaVersion;
  if (!c.report_path.empty()) {
    std::ofstream out(c.report_path);
    if (!out) throw UsageError("cannot write report " + c.report_path);
    out << report.dump(2) << "\n";
  }
  if (c.format == "json")
    std::cout << report.dump(2) << "\n";
  else
    std::cout << text;
}

Json header(const std::string& command) { return Json{{"command", command}}; }

std::string sent_id(const histk::Sentence& s) {
  for (const auto& c : s.comments) {
    auto pos = c.find("sent_id");
    if (pos != std::string::npos) {
      auto eq = c.find('=', pos);
      if (eq != std::string::npos) {
        auto v = c.substr(eq + 1);
        v.erase(0, v.find_first_not_of(' '));
        return v;
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

int cmd_validate(const Common& c, const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const auto& p : paths)
    for (auto& f : expand(p, {".conllu"})) files.push_back(std::move(f));
  std::vector<Json> results(files.size());
  std::vector<std::size_t> counts(files.size(), 0);
  parallel_for(files.size(), c.jobs, [&](std::size_t i) {
    const std::string content = read_file(files[i]);
    Json r = {{"file", files[i]}};
    Json sents = Json::array();
    std::size_t n = 0;
    try {
      std::istringstream in(content);
      const auto tb = histk::parse_conllu(in, files[i]);
      r["sentences"] = tb.sentences.size();
      for (std::size_t s = 0; s < tb.sentences.size(); ++s) {
        const auto rep = histk::validate_tree(tb.sentences[s]);
        if (rep.ok()) continue;
        n += rep.violations.size();
        sents.push_back({{"sentence", s + 1}, {"sent_id", sent_id(tb.sentences[s])},
                         {"violations", histk::report::to_json(rep)}});
      }
    } catch (const histk::FormatError& e) {
      ++n;
      r["format_error"] = {{"line", e.line()}, {"sentence", e.sentence()}, {"message", e.detail()}};
    } catch (const histk::utf8::DecodeError& e) {
      ++n;
      r["format_error"] = {{"line", 0}, {"sentence", 0}, {"message", e.what()}};
    }
    r["invalid_sentences"] = sents;
    r["violations"] = n;
    r["ok"] = n == 0;
    results[i] = std::move(r);
    counts[i] = n;
  });

  std::size_t total = 0;
  std::ostringstream text;
  Json report = header("validate");
  report["files"] = Json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    total += counts[i];
    const auto& r = results[i];
    text << files[i] << ": " << (counts[i] == 0 ? "ok" : std::to_string(counts[i]) + " violation(s)") << "\n";
    if (r.contains("format_error"))
      text << "  line " << r["format_error"]["line"].get<std::size_t>() << ": "
           << r["format_error"]["message"].get<std::string>() << "\n";
    for (const auto& s : r["invalid_sentences"])
      for (const auto& v : s["violations"])
        text << "  sentence " << s["sentence"].get<std::size_t>()
             << (s["sent_id"].get<std::string>().empty() ? "" : " (" + s["sent_id"].get<std::string>() + ")")
             << ": " << v["kind"].get<std::string>() << ": " << v["message"].get<std::string>() << "\n";
    report["files"].push_back(r);
  }
  report["total_violations"] = total;
  report["ok"] = total == 0;
  emit(c, report, text.str());
  return total == 0 ? kOk : kFail;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::vector<std::string> paths;
  std::string input_format = "conllu";
  bool compare = false;
  std::vector<std::string> metrics = {"conj", "compound:lvc", "acl"};
  std::string reference;
  std::vector<std::string> partitions;
  bool strict_reference = false;
};

int stats_ner(const Common& c, const StatsArgs& a) {
  if (!a.partitions.empty() && a.partitions.size() != a.paths.size())
    throw UsageError("--partitions needs one name per input file");
  std::vector<histk::NerCorpus> corpora(a.paths.size());
  std::vector<std::size_t> repaired(a.paths.size(), 0);
  parallel_for(a.paths.size(), c.jobs, [&](std::size_t i) {
    auto raw = load_ner(a.paths[i]);
    auto [fixed, violations] = histk::validate_bio(raw, histk::BioMode::kRepair);
    corpora[i] = std::move(fixed);
    repaired[i] = violations.size();
  });
  Json report = header("stats");
  report["input_format"] = "conll2003";
  Json parts = Json::array();
  std::map<std::string, histk::NerStats> by_name;
  histk::NerStats total;
  std::ostringstream text;
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    const std::string name = a.partitions.empty() ? stem_of(a.paths[i]) : a.partitions[i];
    const auto st = histk::corpus_stats(corpora[i]);
    by_name[name] = st;
    total += st;
    Json j = histk::report::to_json(st);
    j["partition"] = name;
    j["file"] = a.paths[i];
    j["bio_repairs"] = repaired[i];
    parts.push_back(j);
    text << name << ": " << st.sentences << " sentences, " << st.tokens << " tokens, PERSON " << st.count("PERSON")
         << ", LOCATION " << st.count("LOCATION") << (repaired[i] ? ", " + std::to_string(repaired[i]) + " BIO repairs" : "")
         << "\n";
  }
  report["partitions"] = parts;
  report["total"] = histk::report::to_json(total);
  text << "total: " << total.sentences << " sentences, PERSON " << total.count("PERSON") << ", LOCATION "
       << total.count("LOCATION") << "\n";
  bool ok = true;
  if (!a.reference.empty()) {
    const auto ref = nlohmann::json::parse(read_file(a.reference));
    const auto checks = histk::report::check_ner_reference(by_name, ref);
    report["reference"] = {{"file", a.reference}, {"ok", histk::report::all_ok(checks)},
                           {"checks", histk::report::to_json(checks)}};
    text << histk::report::text_checks(checks);
    ok = histk::report::all_ok(checks);
  }
  emit(c, report, text.str());
  return ok || !a.strict_reference ? kOk : kFail;
}

int cmd_stats(const Common& c, const StatsArgs& a) {
  if (a.input_format == "conll2003") return stats_ner(c, a);
  if (a.compare && a.paths.size() < 2) throw UsageError("--compare needs at least two treebanks");
  std::vector<histk::Treebank> tbs(a.paths.size());
  parallel_for(a.paths.size(), c.jobs, [&](std::size_t i) { tbs[i] = load_treebank(a.paths[i]); });
  for (std::size_t i = 0; i < tbs.size(); ++i)
    if (tbs[i].sentences.empty()) throw UsageError("treebank " + a.paths[i] + " has no sentences");

  std::optional<nlohmann::json> ref;
  if (!a.reference.empty()) ref = nlohmann::json::parse(read_file(a.reference));

  Json report = header("stats");
  report["input_format"] = "conllu";
  report["treebanks"] = Json::array();
  std::ostringstream text;
  bool ok = true;
  for (std::size_t i = 0; i < tbs.size(); ++i) {
    const auto basic = histk::basic_stats(tbs[i]);
    const auto dist = histk::relation_distribution(tbs[i]);
    Json j = {{"name", tbs[i].source_name},
              {"path", a.paths[i]},
              {"basic", histk::report::to_json(basic)},
              {"relations", histk::report::to_json(dist)}};
    text << histk::report::text_basic(tbs[i].source_name, basic) << histk::report::text_relations(dist);
    // The reference describes the first treebank.
    if (ref && i == 0) {
      auto checks = histk::report::check_treebank_reference(basic, dist, *ref);
      j["reference"] = {{"file", a.reference}, {"ok", histk::report::all_ok(checks)},
                        {"checks", histk::report::to_json(checks)}};
      text << histk::report::text_checks(checks);
      ok = ok && histk::report::all_ok(checks);
    }
    report["treebanks"].push_back(j);
  }
  if (a.compare) {
    std::vector<const histk::Treebank*> ptrs;
    for (const auto& tb : tbs) ptrs.push_back(&tb);
    const auto rows = histk::compare_treebanks(ptrs, a.metrics);
    report["comparison"] = histk::report::to_json(rows);
    text << "\n" << histk::report::text_comparison(rows);
    if (ref) {
      const auto checks = histk::report::check_comparison_reference(rows[0], *ref);
      report["comparison_reference"] = {{"file", a.reference}, {"ok", histk::report::all_ok(checks)},
                                        {"checks", histk::report::to_json(checks)}};
      text << histk::report::text_checks(checks);
      ok = ok && histk::report::all_ok(checks);
    }
  }
  emit(c, report, text.str());
  return ok || !a.strict_reference ? kOk : kFail;
}

// ---------------------------------------------------------------------------

struct CleanArgs {
  std::string input;
  std::string output;
  std::string rules;
  std::string sidecar;
  bool diff = false;
};

// Blocks are runs of non-blank lines; blank lines pass through unchanged so a
// line-break hyphen can still see the next line.
struct Block {
  std::size_t first_line = 0;  // 1-based
  std::string text;            // lines joined with '\n'
  bool blank = false;
};

std::vector<Block> split_blocks(std::istream& in) {
  std::vector<Block> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (out.empty() || out.back().blank != blank || blank) {
      out.push_back(Block{no, line, blank});
    } else {
      out.back().text += '\n';
      out.back().text += line;
    }
  }
  return out;
}

int cmd_clean(const Common& c, const CleanArgs& a) {
  histk::clean::RulePipeline pipeline;
  try {
    pipeline = a.rules.empty() ? histk::clean::default_pipeline() : histk::clean::load_pipeline(a.rules);
  } catch (const histk::clean::RuleError& e) {
    throw UsageError(std::string("bad rule file: ") + e.what());
  }
  std::istringstream in(read_file(a.input));
  const auto blocks = split_blocks(in);
  std::vector<histk::clean::Repaired> done(blocks.size());
  parallel_for(blocks.size(), c.jobs, [&](std::size_t i) {
    if (blocks[i].blank)
      done[i].text = blocks[i].text;
    else
      done[i] = histk::clean::run_pipeline(blocks[i].text, pipeline);
  });

  std::ofstream file_out;
  std::ostream* out = &std::cout;
  if (!a.output.empty() && a.output != "-") {
    file_out.open(a.output, std::ios::binary);
    if (!file_out) throw UsageError("cannot write " + a.output);
    out = &file_out;
  }
  Json report = header("clean");
  report["input"] = a.input;
  report["rules"] = a.rules.empty() ? "default" : a.rules;
  Json blocks_json = Json::array();
  std::size_t changes = 0, flags = 0;
  std::ostringstream diff;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    *out << done[i].text << "\n";
    const auto& rep = done[i].report;
    if (blocks[i].blank || (rep.changes.empty() && rep.flags.empty())) continue;
    changes += rep.total_changes();
    flags += rep.flags.size();
    Json b = histk::report::to_json(rep);
    b["first_line"] = blocks[i].first_line;
    blocks_json.push_back(b);
    if (a.diff && blocks[i].text != done[i].text) {
      const auto n_old = std::count(blocks[i].text.begin(), blocks[i].text.end(), '\n') + 1;
      const auto n_new = std::count(done[i].text.begin(), done[i].text.end(), '\n') + 1;
      diff << "@@ -" << blocks[i].first_line << "," << n_old << " +" << blocks[i].first_line << "," << n_new
           << " @@\n";
      std::istringstream o(blocks[i].text), n(done[i].text);
      for (std::string l; std::getline(o, l);) diff << "-" << l << "\n";
      for (std::string l; std::getline(n, l);) diff << "+" << l << "\n";
    }
  }
  report["total_changes"] = changes;
  report["total_flags"] = flags;
  report["blocks"] = blocks_json;

  std::string sidecar = a.sidecar;
  if (sidecar.empty() && !a.output.empty() && a.output != "-") sidecar = a.output + ".report.json";
  if (!sidecar.empty()) {
    Json r = report;
    r["schema_version"] = histk::report::kSchemaVersion;
    std::ofstream s(sidecar);
    if (!s) throw UsageError("cannot write " + sidecar);
    s << r.dump(2) << "\n";
  }
  std::ostringstream text;
  if (a.diff) text << diff.str();
  // Cleaned text goes to stdout when no output file is given; keep the summary on stderr then.
  const bool text_on_stdout = out == &std::cout;
  std::ostream& summary = text_on_stdout ? std::cerr : std::cout;
  if (c.format == "json" && !text_on_stdout) {
    emit(c, report, "");
  } else {
    if (!c.report_path.empty()) emit(Common{"", c.report_path, c.jobs}, report, "");
    summary << text.str() << changes << " change(s), " << flags << " flagged span(s)\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string task;
  std::string gold;
  std::string pred;
  bool no_punct = false;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  Json report = header("eval");
  report["task"] = a.task;
  report["gold"] = a.gold;
  report["predicted"] = a.pred;
  std::ostringstream text;
  auto load_tb = [&](const std::string& p) {
    try {
      return load_treebank(p);
    } catch (const histk::FormatError& e) {
      throw UsageError(p + " is not CoNLL-U as the '" + a.task + "' task expects: " + e.what());
    }
  };
  auto load_bio = [&](const std::string& p) {
    try {
      return load_ner(p);
    } catch (const histk::FormatError& e) {
      throw UsageError(p + " is not CoNLL-2003 as the 'ner' task expects: " + e.what());
    }
  };
  try {
    if (a.task == "parse" || a.task == "pos" || a.task == "iaa") {
      const auto gold = load_tb(a.gold);
      const auto pred = load_tb(a.pred);
      if (a.task == "parse") {
        const auto s = histk::attachment_scores(gold, pred, {!a.no_punct});
        report["attachment"] = histk::report::to_json(s);
        text << "UAS " << histk::report::fixed2(s.uas) << "  LAS " << histk::report::fixed2(s.las) << "  ("
             << s.correct_heads << "/" << s.correct_labeled << " of " << s.total << ")\n";
      } else if (a.task == "pos") {
        const auto s = histk::upos_score(gold, pred);
        report["tagging"] = histk::report::to_json(s);
        text << "UPOS accuracy " << histk::report::fixed2(s.accuracy) << "  macro F1 "
             << histk::report::fixed2(s.macro_f1) << "  (" << s.correct << " of " << s.total << ")\n";
      } else {
        const auto r = histk::iaa_report(gold, pred, {!a.no_punct});
        report["attachment"] = histk::report::to_json(r.attachment);
        report["kappa"] = histk::report::to_json(r.deprel_kappa);
        text << "IAA UAS " << histk::report::fixed2(r.attachment.uas) << "  LAS "
             << histk::report::fixed2(r.attachment.las) << "  kappa(deprel) " << r.deprel_kappa.kappa << "\n";
      }
    } else if (a.task == "ner") {
      const auto s = histk::ner_prf(load_bio(a.gold), load_bio(a.pred));
      report["spans"] = histk::report::to_json(s);
      text << histk::report::text_prf("micro", s.micro);
      for (const auto& [t, p] : s.per_type) text << histk::report::text_prf(t, p);
    } else {
      throw UsageError("unknown task '" + a.task + "'");
    }
  } catch (const histk::SegmentationMismatch& e) {
    report["error"] = {{"kind", "segmentation_mismatch"},
                       {"sentence", e.sentence() + 1},
                       {"token", e.token() + 1},
                       {"message", e.what()}};
    emit(c, report, std::string("segmentation mismatch: ") + e.what() + "\n");
    return kFail;
  }
  emit(c, report, text.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string task = "parse";
  std::string train;
  std::string dev;
  std::string model;
  std::string log;
  std::string encoder = "lookup";
  std::string train_vectors;
  std::string dev_vectors;
  std::optional<double> lr;
  int warmup = 400;
  int batch_size = 32;
  int max_epochs = 300;
  int patience = 15;
  std::uint64_t seed = histk::parse::kDefaultSeed;
  int dim = 64;
  int max_positions = 128;
  int arc_hidden = 768;
  int label_hidden = 256;
  std::string decoder = "mst";
  bool quiet = false;
};

histk::parse::Decoder decoder_of(const std::string& s) {
  if (s == "mst") return histk::parse::Decoder::kMst;
  if (s == "greedy") return histk::parse::Decoder::kGreedy;
  throw UsageError("decoder must be mst or greedy");
}

int cmd_train(const Common& c, const TrainArgs& a) {
  namespace hp = histk::parse;
  hp::TrainConfig cfg;
  cfg.learning_rate = a.lr.value_or(a.task == "ner" ? hp::TrainConfig::kNerLearningRate
                                                    : hp::TrainConfig::kParserLearningRate);
  cfg.warmup_steps = a.warmup;
  cfg.batch_size = a.batch_size;
  cfg.max_epochs = a.max_epochs;
  cfg.patience = a.patience;
  cfg.seed = a.seed;
  cfg.decoder = decoder_of(a.decoder);
  hp::EncoderConfig enc;
  enc.mode = a.encoder == "external" ? hp::EncoderMode::kExternalVectors : hp::EncoderMode::kTrainableLookup;
  enc.embedding_dim = a.dim;
  enc.max_positions = a.max_positions;
  try {
    cfg.validate();
    enc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.arc_hidden <= 0 || a.label_hidden <= 0) throw UsageError("hidden sizes must be positive");
  if (enc.mode == hp::EncoderMode::kExternalVectors && (a.train_vectors.empty() || a.dev_vectors.empty()))
    throw UsageError("--encoder external needs --train-vectors and --dev-vectors");

  std::optional<hp::ExternalVectors> tv, dv;
  if (enc.mode == hp::EncoderMode::kExternalVectors) {
    tv = hp::read_external_vectors(a.train_vectors);
    dv = hp::read_external_vectors(a.dev_vectors);
  }
  std::ofstream log_out;
  if (!a.log.empty()) {
    log_out.open(a.log);
    if (!log_out) throw UsageError("cannot write " + a.log);
  }
  auto on_epoch = [&](const hp::EpochLog& e) {
    if (!a.quiet)
      std::cerr << "epoch " << e.epoch << "  loss " << e.loss << "  dev " << histk::report::fixed2(e.dev.primary)
                << (e.improved ? "  *" : "") << "\n";
    if (log_out)
      log_out << Json{{"epoch", e.epoch}, {"loss", e.loss}, {"dev_primary", e.dev.primary},
                      {"dev_secondary", e.dev.secondary}, {"learning_rate", e.learning_rate}, {"step", e.step},
                      {"improved", e.improved}}.dump()
              << "\n";
  };

  Json report = header("train");
  report["task"] = a.task;
  report["model"] = a.model;
  report["config"] = {{"learning_rate", cfg.learning_rate}, {"warmup_steps", cfg.warmup_steps},
                      {"batch_size", cfg.batch_size},       {"max_epochs", cfg.max_epochs},
                      {"patience", cfg.patience},           {"seed", cfg.seed},
                      {"beta1", cfg.beta1},                 {"beta2", cfg.beta2},
                      {"epsilon", cfg.epsilon},             {"encoder", a.encoder},
                      {"embedding_dim", a.dim}};
  hp::TrainLog log;
  try {
    if (a.task == "parse") {
      const auto train = load_treebank(a.train);
      const auto dev = load_treebank(a.dev);
      hp::ParserConfig pc;
      pc.encoder = enc;
      pc.arc_hidden = a.arc_hidden;
      pc.label_hidden = a.label_hidden;
      auto r = hp::train_parser(train, dev, pc, cfg, tv ? &*tv : nullptr, dv ? &*dv : nullptr, on_epoch);
      hp::save_model(r.model, a.model);
      log = std::move(r.log);
    } else if (a.task == "pos" || a.task == "ner") {
      hp::TagData train, dev;
      if (a.task == "pos") {
        train = hp::upos_data(load_treebank(a.train));
        dev = hp::upos_data(load_treebank(a.dev));
      } else {
        train = hp::ner_data(load_ner(a.train));
        dev = hp::ner_data(load_ner(a.dev));
      }
      hp::TaggerConfig tc;
      tc.encoder = enc;
      auto r = hp::train_tagger(train, dev, tc, cfg,
                                a.task == "ner" ? hp::TagScoring::kSpanF1 : hp::TagScoring::kAccuracy,
                                tv ? &*tv : nullptr, dv ? &*dv : nullptr, on_epoch);
      r.model.task = a.task;
      hp::save_model(r.model, a.model);
      log = std::move(r.log);
    } else {
      throw UsageError("unknown task '" + a.task + "'");
    }
  } catch (const hp::TrainingDiverged& e) {
    report["error"] = {{"kind", "diverged"}, {"step", e.step()}, {"epoch", e.epoch()}, {"message", e.what()}};
    emit(c, report, std::string(e.what()) + "\n");
    return kFail;
  } catch (const hp::InventoryMismatch& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  report["log"] = histk::report::to_json(log);
  std::ostringstream text;
  text << "best dev score " << histk::report::fixed2(log.best_score) << " at epoch " << log.best_epoch << " of "
       << log.epochs.size() << (log.stopped_early ? " (early stop)" : "") << "; model written to " << a.model
       << "\n";
  emit(c, report, text.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string input;
  std::string output;
  std::string input_format = "conllu";
  std::string vectors;
  std::string decoder = "mst";
};

// One sentence per line, tokens split on whitespace.
histk::Treebank plain_to_treebank(const std::string& text, const std::string& name) {
  histk::Treebank tb;
  tb.source_name = name;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    histk::Sentence s;
    std::istringstream ls(line);
    for (std::string w; ls >> w;) {
      histk::Token t;
      t.id = static_cast<int>(s.tokens.size()) + 1;
      t.form = w;
      s.tokens.push_back(std::move(t));
    }
    if (!s.tokens.empty()) tb.sentences.push_back(std::move(s));
  }
  if (tb.sentences.empty()) throw UsageError("no sentences in " + name);
  return tb;
}

std::ostream& open_out(const std::string& path, std::ofstream& f) {
  if (path.empty() || path == "-") return std::cout;
  f.open(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  return f;
}

int cmd_parse(const Common& c, const PredictArgs& a) {
  namespace hp = histk::parse;
  hp::ParserModel model;
  try {
    model = hp::load_parser(a.model);
  } catch (const hp::ModelError& e) {
    throw UsageError(e.what());
  }
  histk::Treebank tb = a.input_format == "plain"
                           ? plain_to_treebank(read_file(a.input), stem_of(a.input))
                           : load_treebank(a.input, histk::ParseOptions{true});
  std::optional<hp::ExternalVectors> ext;
  if (!a.vectors.empty()) ext = hp::read_external_vectors(a.vectors);
  histk::Treebank parsed;
  try {
    parsed = hp::parse_treebank(model, tb, ext ? &*ext : nullptr, decoder_of(a.decoder));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::ofstream f;
  std::ostream& out = open_out(a.output, f);
  histk::serialize_conllu(out, parsed);
  if (!c.report_path.empty()) {
    Json report = header("parse");
    report["input"] = a.input;
    report["model"] = a.model;
    report["sentences"] = parsed.sentences.size();
    std::size_t words = 0;
    for (const auto& s : parsed.sentences) words += s.tokens.size();
    report["tokens"] = words;
    emit(Common{"", c.report_path, c.jobs}, report, "");
  }
  return kOk;
}

int cmd_tag(const Common& c, const PredictArgs& a) {
  namespace hp = histk::parse;
  hp::TaggerModel model;
  try {
    model = hp::load_tagger(a.model);
  } catch (const hp::ModelError& e) {
    throw UsageError(e.what());
  }
  std::optional<hp::ExternalVectors> ext;
  if (!a.vectors.empty()) ext = hp::read_external_vectors(a.vectors);
  const hp::ExternalVectors* ev = ext ? &*ext : nullptr;
  std::ofstream f;
  std::ostream& out = open_out(a.output, f);
  std::size_t sentences = 0;
  try {
    if (a.input_format == "conll2003") {
      auto corpus = load_ner(a.input);
      const auto tags = hp::tag_sentences(model, hp::ner_data(corpus).forms, ev);
      for (std::size_t s = 0; s < corpus.sentences.size(); ++s)
        for (std::size_t i = 0; i < corpus.sentences[s].size(); ++i) corpus.sentences[s][i].tag = tags[s][i];
      histk::serialize_conll2003(out, corpus);
      sentences = corpus.sentences.size();
    } else {
      auto tb = a.input_format == "plain" ? plain_to_treebank(read_file(a.input), stem_of(a.input))
                                          : load_treebank(a.input, histk::ParseOptions{true});
      const auto tags = hp::tag_sentences(model, hp::upos_data(tb).forms, ev);
      sentences = tb.sentences.size();
      if (model.task == "ner") {
        for (std::size_t s = 0; s < tb.sentences.size(); ++s) {
          for (std::size_t i = 0; i < tags[s].size(); ++i) out << tb.sentences[s].tokens[i].form << " " << tags[s][i] << "\n";
          out << "\n";
        }
      } else {
        for (std::size_t s = 0; s < tb.sentences.size(); ++s)
          for (std::size_t i = 0; i < tags[s].size(); ++i) tb.sentences[s].tokens[i].upos = tags[s][i];
        histk::serialize_conllu(out, tb);
      }
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!c.report_path.empty()) {
    Json report = header("tag");
    report["input"] = a.input;
    report["model"] = a.model;
    report["task"] = model.task;
    report["sentences"] = sentences;
    emit(Common{"", c.report_path, c.jobs}, report, "");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus tools for historical Turkish: validation, statistics, cleaning, evaluation, parsing"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--format", common.format, "stdout report format")->check(CLI::IsMember({"text", "json"}));
    sub->add_option("--report", common.report_path, "write the structured report to this file");
    sub->add_option("-j,--jobs", common.jobs, "worker threads for file/block parallelism")
        ->check(CLI::PositiveNumber);
  };

  std::vector<std::string> validate_paths;
  auto* validate = app.add_subcommand("validate", "parse and validate CoNLL-U files");
  validate->add_option("paths", validate_paths, "files or directories")->required();
  add_common(validate);

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "treebank or NER corpus statistics");
  st->add_option("paths", stats.paths, "treebanks (file or directory) or CoNLL-2003 files")->required();
  st->add_option("--input-format", stats.input_format)->check(CLI::IsMember({"conllu", "conll2003"}));
  st->add_flag("--compare", stats.compare, "comparison table across treebanks");
  st->add_option("--metrics", stats.metrics, "relations for --compare")->delimiter(',');
  st->add_option("--reference", stats.reference, "published values to check against")->check(CLI::ExistingFile);
  st->add_option("--partitions", stats.partitions, "names for CoNLL-2003 inputs, in order")->delimiter(',');
  st->add_flag("--strict-reference", stats.strict_reference, "exit 1 when the reference check fails");
  add_common(st);

  CleanArgs clean;
  auto* cl = app.add_subcommand("clean", "repair extraction errors in plain text");
  cl->add_option("input", clean.input)->required()->check(CLI::ExistingFile);
  cl->add_option("-o,--output", clean.output, "cleaned text (default stdout)");
  cl->add_option("--rules", clean.rules, "JSON rule config");
  cl->add_option("--sidecar", clean.sidecar, "repair report file (default OUTPUT.report.json)");
  cl->add_flag("--diff", clean.diff, "print a unified-style diff of changed blocks");
  add_common(cl);

  std::string rules_in;
  auto* ru = app.add_subcommand("rules", "print the effective rule config as JSON");
  ru->add_option("--rules", rules_in, "start from this config instead of the defaults");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score predictions against gold");
  e->add_option("--task", ev.task)->required()->check(CLI::IsMember({"parse", "pos", "ner", "iaa"}));
  e->add_option("gold", ev.gold)->required()->check(CLI::ExistingFile);
  e->add_option("pred", ev.pred)->required()->check(CLI::ExistingFile);
  e->add_flag("--no-punct", ev.no_punct, "skip words whose gold UPOS is PUNCT");
  add_common(e);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a parser or tagger");
  t->add_option("--task", tr.task)->check(CLI::IsMember({"parse", "pos", "ner"}));
  t->add_option("--train", tr.train)->required()->check(CLI::ExistingPath);
  t->add_option("--dev", tr.dev)->required()->check(CLI::ExistingPath);
  t->add_option("-o,--model", tr.model)->required();
  t->add_option("--log", tr.log, "per-epoch JSON lines");
  t->add_option("--encoder", tr.encoder)->check(CLI::IsMember({"lookup", "external"}));
  t->add_option("--train-vectors", tr.train_vectors)->check(CLI::ExistingFile);
  t->add_option("--dev-vectors", tr.dev_vectors)->check(CLI::ExistingFile);
  t->add_option("--lr", tr.lr, "default 4e-5 (parse, pos) or 5e-5 (ner)");
  t->add_option("--warmup", tr.warmup);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--max-epochs", tr.max_epochs);
  t->add_option("--patience", tr.patience);
  t->add_option("--seed", tr.seed);
  t->add_option("--dim", tr.dim, "lookup embedding size");
  t->add_option("--max-positions", tr.max_positions);
  t->add_option("--arc-hidden", tr.arc_hidden);
  t->add_option("--label-hidden", tr.label_hidden);
  t->add_option("--decoder", tr.decoder)->check(CLI::IsMember({"mst", "greedy"}));
  t->add_flag("-q,--quiet", tr.quiet);
  add_common(t);

  PredictArgs pa;
  auto* p = app.add_subcommand("parse", "fill HEAD and DEPREL with a trained parser");
  p->add_option("--model", pa.model)->required()->check(CLI::ExistingFile);
  p->add_option("input", pa.input)->required()->check(CLI::ExistingPath);
  p->add_option("-o,--output", pa.output);
  p->add_option("--input-format", pa.input_format)->check(CLI::IsMember({"conllu", "plain"}));
  p->add_option("--vectors", pa.vectors)->check(CLI::ExistingFile);
  p->add_option("--decoder", pa.decoder)->check(CLI::IsMember({"mst", "greedy"}));
  add_common(p);

  PredictArgs ta;
  auto* tg = app.add_subcommand("tag", "fill UPOS or emit BIO tags with a trained tagger");
  tg->add_option("--model", ta.model)->required()->check(CLI::ExistingFile);
  tg->add_option("input", ta.input)->required()->check(CLI::ExistingPath);
  tg->add_option("-o,--output", ta.output);
  tg->add_option("--input-format", ta.input_format)->check(CLI::IsMember({"conllu", "conll2003", "plain"}));
  tg->add_option("--vectors", ta.vectors)->check(CLI::ExistingFile);
  add_common(tg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsage;
  }

  try {
    if (*validate) return cmd_validate(common, validate_paths);
    if (*st) return cmd_stats(common, stats);
    if (*cl) return cmd_clean(common, clean);
    if (*ru) {
      const auto pipe = rules_in.empty() ? histk::clean::default_pipeline() : histk::clean::load_pipeline(rules_in);
      std::cout << histk::clean::pipeline_to_json(pipe).dump(2) << "\n";
      return kOk;
    }
    if (*e) return cmd_eval(common, ev);
    if (*t) return cmd_train(common, tr);
    if (*p) return cmd_parse(common, pa);
    if (*tg) return cmd_tag(common, ta);
  } catch (const UsageError& err) {
    std::cerr << "histk: " << err.what() << "\n";
    return kUsage;
  } catch (const histk::FormatError& err) {
    std::cerr << "histk: " << err.what() << "\n";
    return kFail;
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "histk: " << err.what() << "\n";
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "histk: " << err.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
