#pragma once

// Model container:
//   "HISTKMDL"  u32 version  u64 meta_len  meta (JSON, UTF-8)
//   u32 tensor_count, then per tensor: u32 name_len, name, u64 rows, u64 cols,
//   rows*cols IEEE-754 doubles in column-major order.
// All integers and doubles are little-endian, so files are portable and a
// save/load cycle reproduces every parameter bit for bit.

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "histk/parse/model.hpp"

namespace histk::parse {

inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::array<char, 8> kModelMagic = {'H', 'I', 'S', 'T', 'K', 'M', 'D', 'L'};

// Truncated, malformed or wrongly shaped model file.
class ModelShapeError : public ModelError {
 public:
  using ModelError::ModelError;
};

class ModelVersionError : public ModelError {
 public:
  using ModelError::ModelError;
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U u = std::bit_cast<U>(v);
  char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
  out.write(b, sizeof(U));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U)))
    throw ModelShapeError(std::string("model file truncated while reading ") + what);
  U u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(b[i]) << (8 * i);
  return std::bit_cast<T>(u);
}

inline std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  std::string s;
  constexpr std::uint64_t kChunk = 1 << 20;
  while (s.size() < n) {
    const auto want = std::min<std::uint64_t>(kChunk, n - s.size());
    const auto old = s.size();
    s.resize(old + want);
    if (!in.read(s.data() + old, static_cast<std::streamsize>(want)))
      throw ModelShapeError(std::string("model file truncated while reading ") + what);
  }
  return s;
}

inline nlohmann::json encoder_json(const EncoderConfig& c, int dim) {
  return {{"mode", c.mode == EncoderMode::kTrainableLookup ? "trainable-lookup" : "external-vectors"},
          {"embedding_dim", dim},
          {"max_positions", c.max_positions},
          {"dropout_hidden", c.dropout_hidden},
          {"dropout_attention", c.dropout_attention},
          {"dropout_output", c.dropout_output},
          {"token_mask_prob", c.token_mask_prob}};
}

inline EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "trainable-lookup")
    c.mode = EncoderMode::kTrainableLookup;
  else if (mode == "external-vectors")
    c.mode = EncoderMode::kExternalVectors;
  else
    throw ModelShapeError("unknown encoder mode '" + mode + "'");
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.dropout_hidden = j.at("dropout_hidden").get<double>();
  c.dropout_attention = j.at("dropout_attention").get<double>();
  c.dropout_output = j.at("dropout_output").get<double>();
  c.token_mask_prob = j.at("token_mask_prob").get<double>();
  c.validate();
  return c;
}

template <typename Model>
void write_container(std::ostream& out, const nlohmann::json& meta, const Model& m) {
  out.write(kModelMagic.data(), kModelMagic.size());
  put_le<std::uint32_t>(out, kModelVersion);
  const std::string text = meta.dump();
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::uint32_t count = 0;
  m.visit([&](auto&&, const auto&) { ++count; });
  put_le<std::uint32_t>(out, count);
  m.visit([&](auto&& name, const auto& mat) {
    const std::string n = name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n.size()));
    out.write(n.data(), static_cast<std::streamsize>(n.size()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(mat.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(mat.cols()));
    for (Eigen::Index i = 0; i < mat.size(); ++i) put_le<double>(out, mat.data()[i]);
  });
  if (!out) throw ModelError("failed writing model file");
}

inline nlohmann::json read_header(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size())) throw ModelShapeError("model file truncated in header");
  if (magic != kModelMagic) throw ModelShapeError("not a model file (bad magic)");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kModelVersion)
    throw ModelVersionError("model file version " + std::to_string(version) + ", this build reads version " +
                            std::to_string(kModelVersion));
  const auto len = get_le<std::uint64_t>(in, "metadata length");
  try {
    return nlohmann::json::parse(get_bytes(in, len, "metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw ModelShapeError(std::string("model metadata is not valid JSON: ") + e.what());
  }
}

// Fills every tensor of a shape-initialized skeleton; shapes must agree exactly.
template <typename Model>
void read_tensors(std::istream& in, Model& m) {
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  std::uint32_t expected = 0;
  m.visit([&](auto&&, auto&) { ++expected; });
  if (count != expected)
    throw ModelShapeError("model file has " + std::to_string(count) + " tensors, expected " +
                          std::to_string(expected));
  m.visit([&](auto&& name, auto& mat) {
    const std::string want = name;
    const auto len = get_le<std::uint32_t>(in, "tensor name length");
    const auto got = get_bytes(in, len, "tensor name");
    if (got != want) throw ModelShapeError("expected tensor '" + want + "', found '" + got + "'");
    const auto rows = get_le<std::uint64_t>(in, "tensor rows");
    const auto cols = get_le<std::uint64_t>(in, "tensor cols");
    if (rows != static_cast<std::uint64_t>(mat.rows()) || cols != static_cast<std::uint64_t>(mat.cols()))
      throw ModelShapeError("tensor '" + want + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", metadata implies " + std::to_string(mat.rows()) + "x" + std::to_string(mat.cols()));
    const std::string what = "tensor " + want;
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = get_le<double>(in, what.c_str());
  });
  if (in.peek() != std::char_traits<char>::eof()) throw ModelShapeError("trailing bytes after the last tensor");
}

inline Vocabulary vocab_from_json(const nlohmann::json& j) {
  Vocabulary v;
  const auto words = j.get<std::vector<std::string>>();
  if (words.size() < 3 || words[0] != "<unk>" || words[1] != "<bos>" || words[2] != "<eos>")
    throw ModelShapeError("vocabulary does not start with the reserved tokens");
  for (std::size_t i = 3; i < words.size(); ++i)
    if (v.add(words[i]) != static_cast<int>(i)) throw ModelShapeError("duplicate vocabulary entry '" + words[i] + "'");
  return v;
}

inline std::vector<std::string> inventory_from_json(const nlohmann::json& j, const char* what) {
  auto inv = j.get<std::vector<std::string>>();
  if (inv.empty() || !std::is_sorted(inv.begin(), inv.end()) ||
      std::adjacent_find(inv.begin(), inv.end()) != inv.end())
    throw ModelShapeError(std::string(what) + " inventory must be non-empty, sorted and unique");
  return inv;
}

inline EncoderParams encoder_skeleton(const EncoderConfig& c, int vocab, int dim) {
  EncoderParams p;
  if (c.mode == EncoderMode::kTrainableLookup) {
    p.word.resize(dim, vocab);
    p.left.resize(dim, vocab);
    p.right.resize(dim, vocab);
    p.position.resize(dim, c.max_positions);
  }
  p.root.resize(dim, 1);
  return p;
}

inline Mlp mlp_skeleton(int in, int out) {
  Mlp m;
  m.W.resize(out, in);
  m.b.resize(out);
  return m;
}

}  // namespace detail

inline void save_model(const ParserModel& m, std::ostream& out) {
  const int dim = encoder_dim(m.encoder);
  nlohmann::json meta = {{"kind", "parser"},
                         {"encoder", detail::encoder_json(m.encoder_config, dim)},
                         {"vocabulary", m.vocab.words()},
                         {"labels", m.labels},
                         {"arc_hidden", m.arc.hidden()},
                         {"arc_dropout", m.arc.dropout},
                         {"label_hidden", m.label.hidden()},
                         {"label_dropout", m.label.dropout}};
  detail::write_container(out, meta, m);
}

inline void save_model(const TaggerModel& m, std::ostream& out) {
  const int dim = encoder_dim(m.encoder);
  nlohmann::json meta = {{"kind", "tagger"},
                         {"task", m.task},
                         {"encoder", detail::encoder_json(m.encoder_config, dim)},
                         {"vocabulary", m.vocab.words()},
                         {"tags", m.tags},
                         {"input_dropout", m.tagger.input_dropout}};
  detail::write_container(out, meta, m);
}

template <typename Model>
void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path);
  save_model(m, out);
}

// "parser" or "tagger".
inline std::string model_kind(std::istream& in) {
  const auto meta = detail::read_header(in);
  return meta.value("kind", "");
}

inline ParserModel load_parser(std::istream& in) {
  const auto meta = detail::read_header(in);
  try {
    if (meta.at("kind") != "parser") throw ModelError("model file holds a " + meta.at("kind").dump() + ", not a parser");
    ParserModel m;
    m.encoder_config = detail::encoder_from_json(meta.at("encoder"));
    m.vocab = detail::vocab_from_json(meta.at("vocabulary"));
    m.labels = detail::inventory_from_json(meta.at("labels"), "label");
    const int d = m.encoder_config.embedding_dim;
    const int ka = meta.at("arc_hidden").get<int>();
    const int kl = meta.at("label_hidden").get<int>();
    const auto L = static_cast<Eigen::Index>(m.labels.size());
    m.encoder = detail::encoder_skeleton(m.encoder_config, m.vocab.size(), d);
    m.arc.head = detail::mlp_skeleton(d, ka);
    m.arc.dep = detail::mlp_skeleton(d, ka);
    m.arc.U.resize(ka, ka);
    m.arc.b.resize(ka);
    m.arc.dropout = meta.at("arc_dropout").get<double>();
    m.label.head = detail::mlp_skeleton(d, kl);
    m.label.dep = detail::mlp_skeleton(d, kl);
    m.label.U.resize(L * kl, kl);
    m.label.W_head.resize(L, kl);
    m.label.W_dep.resize(L, kl);
    m.label.b.resize(L);
    m.label.dropout = meta.at("label_dropout").get<double>();
    detail::read_tensors(in, m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelShapeError(std::string("model metadata incomplete: ") + e.what());
  }
}

inline TaggerModel load_tagger(std::istream& in) {
  const auto meta = detail::read_header(in);
  try {
    if (meta.at("kind") != "tagger") throw ModelError("model file holds a " + meta.at("kind").dump() + ", not a tagger");
    TaggerModel m;
    m.task = meta.at("task").get<std::string>();
    m.encoder_config = detail::encoder_from_json(meta.at("encoder"));
    m.vocab = detail::vocab_from_json(meta.at("vocabulary"));
    m.tags = detail::inventory_from_json(meta.at("tags"), "tag");
    const int d = m.encoder_config.embedding_dim;
    m.encoder = detail::encoder_skeleton(m.encoder_config, m.vocab.size(), d);
    m.tagger.W.resize(static_cast<Eigen::Index>(m.tags.size()), d);
    m.tagger.b.resize(static_cast<Eigen::Index>(m.tags.size()));
    m.tagger.input_dropout = meta.at("input_dropout").get<double>();
    detail::read_tensors(in, m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelShapeError(std::string("model metadata incomplete: ") + e.what());
  }
}

inline ParserModel load_parser(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path);
  return load_parser(in);
}

inline TaggerModel load_tagger(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path);
  return load_tagger(in);
}

// Relations in tb that the parser cannot produce.
inline void require_label_inventory(const ParserModel& m, const Treebank& tb) {
  for (std::size_t s = 0; s < tb.sentences.size(); ++s)
    for (const auto& t : tb.sentences[s].tokens)
      if (t.deprel != "_" && m.label_index(t.deprel) < 0)
        throw InventoryMismatch("relation '" + t.deprel + "' in sentence " + std::to_string(s + 1) +
                                " is not in the model's label inventory");
}

inline void require_tag_inventory(const TaggerModel& m, const TagData& d) {
  for (std::size_t s = 0; s < d.tags.size(); ++s)
    for (const auto& t : d.tags[s])
      if (t != "_" && m.tag_index(t) < 0)
        throw InventoryMismatch("tag '" + t + "' in sentence " + std::to_string(s + 1) +
                                " is not in the model's tag inventory");
}

}  // namespace histk::parse
