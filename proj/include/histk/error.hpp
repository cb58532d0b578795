#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace histk {

// Malformed input file. Carries the 1-based line number and the 1-based
// ordinal of the sentence being read (0 when not inside a sentence).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line, std::size_t sentence = 0)
      : std::runtime_error(compose(what, line, sentence)),
        line_(line),
        sentence_(sentence),
        detail_(what) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t sentence() const noexcept { return sentence_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  static std::string compose(const std::string& what, std::size_t line, std::size_t sentence) {
    std::string msg = "line " + std::to_string(line);
    if (sentence > 0) msg += " (sentence " + std::to_string(sentence) + ")";
    return msg + ": " + what;
  }

  std::size_t line_;
  std::size_t sentence_;
  std::string detail_;
};

// Gold and predicted data do not share tokenization.
class SegmentationMismatch : public std::runtime_error {
 public:
  SegmentationMismatch(const std::string& what, std::size_t sentence, std::size_t token)
      : std::runtime_error(what), sentence_(sentence), token_(token) {}

  // 0-based sentence index and 0-based token index of the first divergence.
  std::size_t sentence() const noexcept { return sentence_; }
  std::size_t token() const noexcept { return token_; }

 private:
  std::size_t sentence_;
  std::size_t token_;
};

}  // namespace histk
