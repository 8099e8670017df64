#include "lee/expr/codec.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace lee::expr {
namespace {

constexpr double kMinMagnitude = 1e-99;
constexpr double kMaxEncodable = 9.99e99;

// "d.dde+XX" with a two-digit exponent.
std::string format_sig3(double magnitude) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", magnitude);
  return buf;
}

}  // namespace

ConstantTokens encode_constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("encode_constant: value is not finite");
  ConstantTokens out{Token::Plus, Token::D0, Token::Dot, Token::D0, Token::D0,
                     Token::E,    Token::Plus, Token::D0, Token::D0};
  double mag = std::fabs(value);
  if (mag < kMinMagnitude) return out;
  if (value < 0) out[0] = Token::Minus;
  std::string s = format_sig3(mag);
  // Rounding can carry past the exponent range (9.996e99 -> 1.00e+100).
  if (mag >= kMaxEncodable || s.size() != 8) s = format_sig3(kMaxEncodable);
  out[1] = digit_token(s[0] - '0');
  out[3] = digit_token(s[2] - '0');
  out[4] = digit_token(s[3] - '0');
  out[6] = s[5] == '-' ? Token::Minus : Token::Plus;
  out[7] = digit_token(s[6] - '0');
  out[8] = digit_token(s[7] - '0');
  return out;
}

double round_sig3(double value) {
  const auto t = encode_constant(value);
  return decode_constant(t);
}

std::string_view parse_error_name(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::ArityUnderflow: return "arity-underflow";
    case ParseErrorKind::TrailingTokens: return "trailing-tokens";
    case ParseErrorKind::BadConstant: return "bad-constant";
    case ParseErrorKind::UnexpectedToken: return "unexpected-token";
    case ParseErrorKind::Empty: return "empty";
  }
  return "unknown";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t position, const std::string& detail)
    : std::runtime_error(std::string(parse_error_name(kind)) + " at " + std::to_string(position) +
                         ": " + detail),
      kind_(kind),
      position_(position) {}

double decode_constant(std::span<const Token> t) {
  auto bad = [](std::size_t pos, const char* what) {
    return ParseError(ParseErrorKind::BadConstant, pos, what);
  };
  if (t.size() < static_cast<std::size_t>(kConstantTokens)) throw bad(t.size(), "constant truncated");
  if (!is_sign(t[0])) throw bad(0, "expected mantissa sign");
  for (std::size_t i : {1u, 3u, 4u, 7u, 8u}) {
    if (!is_digit(t[i])) throw bad(i, "expected digit");
  }
  if (t[2] != Token::Dot) throw bad(2, "expected '.'");
  if (t[5] != Token::E) throw bad(5, "expected 'e'");
  if (!is_sign(t[6])) throw bad(6, "expected exponent sign");

  const int d1 = digit_value(t[1]), d2 = digit_value(t[3]), d3 = digit_value(t[4]);
  const int e1 = digit_value(t[7]), e2 = digit_value(t[8]);
  if (d1 == 0) {
    // Zero has exactly one spelling.
    if (d2 || d3) throw bad(1, "leading mantissa digit is zero");
    if (t[0] != Token::Plus || t[6] != Token::Plus || e1 || e2) throw bad(0, "non-canonical zero");
    return 0.0;
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%d.%d%de%c%d%d", t[0] == Token::Minus ? '-' : '+', d1, d2, d3,
                t[6] == Token::Minus ? '-' : '+', e1, e2);
  return std::strtod(buf, nullptr);
}

namespace {

void serialize(const Expr& e, TokenSeq& out) {
  switch (e.kind()) {
    case Expr::Kind::Variable: out.push_back(variable_token(e.variable_index())); return;
    case Expr::Kind::Constant: {
      const auto c = encode_constant(e.constant_value());
      out.insert(out.end(), c.begin(), c.end());
      return;
    }
    case Expr::Kind::Unary:
      out.push_back(op_token(e.op()));
      serialize(e.child(0), out);
      return;
    case Expr::Kind::Binary:
      out.push_back(op_token(e.op()));
      serialize(e.child(0), out);
      serialize(e.child(1), out);
      return;
  }
}

// Iterative prefix parser; positions are reported relative to `base`.
Expr parse_body(std::span<const Token> t, std::size_t base) {
  if (t.empty()) throw ParseError(ParseErrorKind::Empty, base, "no tokens");

  struct Frame {
    Op op;
    int needed;
    std::vector<Expr> args;
  };
  std::vector<Frame> stack;
  std::optional<Expr> done;
  std::size_t i = 0;

  auto reduce = [&](Expr leaf) {
    std::optional<Expr> cur = std::move(leaf);
    while (cur) {
      if (stack.empty()) {
        done = std::move(cur);
        return;
      }
      Frame& f = stack.back();
      f.args.push_back(std::move(*cur));
      cur.reset();
      if (static_cast<int>(f.args.size()) == f.needed) {
        Expr node = f.needed == 1 ? Expr::unary(f.op, std::move(f.args[0]))
                                  : Expr::binary(f.op, std::move(f.args[0]), std::move(f.args[1]));
        stack.pop_back();
        cur = std::move(node);
      }
    }
  };

  while (i < t.size() && !done) {
    const Token tok = t[i];
    if (auto op = token_op(tok)) {
      stack.push_back(Frame{*op, arity(*op), {}});
      ++i;
    } else if (is_variable(tok)) {
      reduce(Expr::variable(variable_index(tok)));
      ++i;
    } else if (is_sign(tok)) {
      double v;
      try {
        v = decode_constant(t.subspan(i));
      } catch (const ParseError& pe) {
        throw ParseError(ParseErrorKind::BadConstant, base + i + pe.position(), pe.what());
      }
      reduce(Expr::constant(v));
      i += kConstantTokens;
    } else {
      throw ParseError(ParseErrorKind::UnexpectedToken, base + i,
                       "token '" + std::string(token_name(tok)) + "' cannot start an operand");
    }
  }
  if (!done) throw ParseError(ParseErrorKind::ArityUnderflow, base + t.size(), "missing operand");
  if (i != t.size()) throw ParseError(ParseErrorKind::TrailingTokens, base + i, "tokens after a complete expression");
  return *done;
}

}  // namespace

TokenSeq tokenize(const Expr& e) {
  TokenSeq out;
  out.reserve(e.node_count() + 2);
  out.push_back(Token::Bos);
  serialize(e, out);
  out.push_back(Token::Eos);
  return out;
}

Expr parse(std::span<const Token> tokens) {
  std::size_t base = 0;
  if (!tokens.empty() && tokens.front() == Token::Bos) {
    tokens = tokens.subspan(1);
    base = 1;
  }
  if (!tokens.empty() && tokens.back() == Token::Eos) tokens = tokens.first(tokens.size() - 1);
  return parse_body(tokens, base);
}

ParseOutcome try_parse(std::span<const Token> tokens) {
  ParseOutcome out;
  try {
    out.expr = parse(tokens);
  } catch (const ParseError& e) {
    out.error = e;
  }
  return out;
}

std::string canonical_text(const Expr& e) {
  const TokenSeq t = tokenize(e);
  return to_text(strip_framing(t));
}

Expr parse_text(std::string_view text) {
  const TokenSeq t = from_text(text);
  return parse(t);
}

}  // namespace lee::expr
