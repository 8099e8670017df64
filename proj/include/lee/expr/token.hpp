#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lee::expr {

// Token ids are stable: checkpoints and corpora depend on this order.
enum class Token : std::uint8_t {
  Pad, Bos, Eos, Unk,
  Sep, ConstMark,
  X0, X1, X2, X3, X4, X5, X6, X7, X8, X9,
  Add, Sub, Mul, Div,
  Sin, Cos, Tan, Tanh, Exp, Log, Sqrt, Sq, Cube, Abs, Neg,
  D0, D1, D2, D3, D4, D5, D6, D7, D8, D9,
  Plus, Minus, Dot, E,
};

inline constexpr int kVocabSize = static_cast<int>(Token::E) + 1;
inline constexpr int kMaxVariables = 10;
inline constexpr int kConstantTokens = 9;

using TokenSeq = std::vector<Token>;

inline constexpr int token_id(Token t) { return static_cast<int>(t); }
Token token_from_id(int id);

std::string_view token_name(Token t);
std::optional<Token> token_from_name(std::string_view name);

Token variable_token(int index);
bool is_variable(Token t);
int variable_index(Token t);
bool is_digit(Token t);
int digit_value(Token t);
Token digit_token(int d);
bool is_sign(Token t);
bool is_special(Token t);

/// Space-separated token names. A sign token that does not follow `e`
/// opens a constant and prints as `C+` / `C-`.
std::string to_text(std::span<const Token> tokens);
/// Inverse of to_text; accepts both `C+` and `+`. Throws std::invalid_argument
/// on an unknown name.
TokenSeq from_text(std::string_view text);

/// Drops one leading BOS and one trailing EOS if present.
std::span<const Token> strip_framing(std::span<const Token> tokens);

}  // namespace lee::expr
