#pragma once

// External per-token vectors: one block per sentence, one whitespace-separated
// row of reals per token, blocks separated by blank lines.

#include <Eigen/Dense>

#include <charconv>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "histk/error.hpp"

namespace histk::parse {

struct ExternalVectors {
  std::vector<Eigen::MatrixXd> sentences;  // D x n each
  int dim = 0;
};

inline ExternalVectors read_external_vectors(std::istream& in) {
  ExternalVectors ev;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (rows.empty()) return;
    Eigen::MatrixXd m(ev.dim, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
      for (int i = 0; i < ev.dim; ++i) m(i, static_cast<Eigen::Index>(j)) = rows[j][i];
    ev.sentences.push_back(std::move(m));
    rows.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      double v = 0.0;
      auto [q, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (q < end && *q != ' ' && *q != '\t'))
        throw FormatError("external vectors: not a real number", line_no, ev.sentences.size() + 1);
      row.push_back(v);
      p = q;
    }
    if (ev.dim == 0) ev.dim = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != ev.dim)
      throw FormatError("external vectors: row has " + std::to_string(row.size()) + " values, expected " +
                            std::to_string(ev.dim),
                        line_no, ev.sentences.size() + 1);
    rows.push_back(std::move(row));
  }
  flush();
  if (ev.sentences.empty()) throw FormatError("external vectors: file is empty", line_no, 0);
  return ev;
}

inline ExternalVectors read_external_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_external_vectors(in);
}

}  // namespace histk::parse
