#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "cbo/errors.hpp"

namespace cbo::smiles {

/// Raised by the tokenizer; `position` is the character offset of the first
/// character that no token matches.
class LexError : public FormatError {
 public:
  LexError(std::size_t position, const std::string& what)
      : FormatError(what + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Ordered token list; column j of a one-hot row stands for tokens()[j].
class Alphabet {
 public:
  Alphabet(std::vector<std::string> tokens, std::string stop, int version = 1);

  /// {"version": int, "stop": str, "tokens": [str, ...]}; the stop symbol
  /// must appear in tokens exactly once.
  static Alphabet from_json(std::string_view text);
  static Alphabet load(const std::string& path);
  /// Compiled-in copy of data/smiles_alphabet.json.
  static const Alphabet& standard();

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& stop() const noexcept { return tokens_[stop_index_]; }
  std::size_t stop_index() const noexcept { return stop_index_; }
  int version() const noexcept { return version_; }
  std::optional<std::size_t> index_of(std::string_view token) const;

  /// Length of the longest token matching s at `pos`, 0 if none. Never matches the stop symbol.
  std::size_t match(std::string_view s, std::size_t pos) const;

 private:
  std::vector<std::string> tokens_;
  std::size_t stop_index_ = 0;
  int version_ = 1;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t max_token_length_ = 0;
};

/// Longest-match lexing ("Cl" is one token). Throws LexError.
std::vector<std::string> tokenize(std::string_view s, const Alphabet& alphabet = Alphabet::standard());

/// T x |A| 0/1 matrix, one token per row, stop rows after the sequence end.
using OneHotMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Throws LengthError when s has more than max_len tokens; LexError propagates.
OneHotMatrix encode_one_hot(std::string_view s, const Alphabet& alphabet, std::size_t max_len);

/// Tokens up to the first stop row. Throws FormatError on a row that does not sum to 1.
std::string decode_one_hot(const OneHotMatrix& m, const Alphabet& alphabet);

enum class FailureKind { lex_error, unbalanced_paren, unpaired_ring_bond, dangling_bond, valence_violation, empty };

std::string_view to_string(FailureKind kind);

struct ValidityReport {
  bool valid = false;
  std::optional<FailureKind> failure_kind;
  std::optional<std::size_t> failure_position;  // character offset, when one applies
};

/// Lexical, structural and valence check over the organic subset. Trailing
/// whitespace is stripped first. Never throws on malformed input.
ValidityReport check_validity(std::string_view s, const Alphabet& alphabet = Alphabet::standard());

/// Valid and at least 5 characters long (after stripping trailing whitespace).
bool is_drug_like(std::string_view s);

/// 1 iff strictly more than `threshold` of the outcomes are drug-like.
/// Throws ConfigError on an empty list.
int label_latent_point(const std::vector<std::string>& outcomes, double threshold = 0.20);

/// One JSON object per report, e.g. {"valid":false,"failure_kind":"empty","failure_position":null}.
std::string to_json(const ValidityReport& report);

}  // namespace cbo::smiles
