#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "lee/expr/expr.hpp"
#include "lee/expr/token.hpp"

namespace lee::expr {

/// 9-token constant: [sign, d1, '.', d2, d3, 'e', sign', e1, e2],
/// normalized mantissa in [1, 10) at three significant figures.
using ConstantTokens = std::array<Token, kConstantTokens>;

/// Throws std::invalid_argument on non-finite input. Magnitudes below 1e-99
/// encode as zero; magnitudes at or above 9.995e99 saturate to +/-9.99e99.
ConstantTokens encode_constant(double value);

/// Rounds to the value a constant takes after an encode/decode round trip.
double round_sig3(double value);

enum class ParseErrorKind {
  ArityUnderflow,
  TrailingTokens,
  BadConstant,
  UnexpectedToken,
  Empty,
};

std::string_view parse_error_name(ParseErrorKind kind);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::size_t position, const std::string& detail);
  ParseErrorKind kind() const { return kind_; }
  /// Index into the sequence that was handed to the parser.
  std::size_t position() const { return position_; }

 private:
  ParseErrorKind kind_;
  std::size_t position_;
};

/// Throws ParseError with the offending position on a malformed layout.
double decode_constant(std::span<const Token> tokens);

/// Prefix serialization framed by BOS ... EOS.
TokenSeq tokenize(const Expr& e);

/// Accepts sequences with or without BOS/EOS framing; the whole sequence must
/// be consumed. Throws ParseError.
Expr parse(std::span<const Token> tokens);

struct ParseOutcome {
  std::optional<Expr> expr;
  std::optional<ParseError> error;
  explicit operator bool() const { return expr.has_value(); }
};

/// Non-throwing variant for the search loop.
ParseOutcome try_parse(std::span<const Token> tokens);

/// Canonical unframed text of an expression, e.g. `add x0 C+ 1 . 0 0 e + 0 0`.
std::string canonical_text(const Expr& e);
Expr parse_text(std::string_view text);

}  // namespace lee::expr
