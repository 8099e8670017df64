#include "lee/expr/token.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

namespace lee::expr {
namespace {

constexpr std::array<std::string_view, kVocabSize> kNames = {
    "PAD", "BOS", "EOS", "UNK", "SEP", "CONST",
    "x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9",
    "add", "sub", "mul", "div",
    "sin", "cos", "tan", "tanh", "exp", "log", "sqrt", "sq", "cube", "abs", "neg",
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    "+", "-", ".", "e",
};

}  // namespace

Token token_from_id(int id) {
  if (id < 0 || id >= kVocabSize) throw std::out_of_range("token id out of range: " + std::to_string(id));
  return static_cast<Token>(id);
}

std::string_view token_name(Token t) { return kNames[static_cast<std::size_t>(t)]; }

std::optional<Token> token_from_name(std::string_view name) {
  if (name == "C+") return Token::Plus;
  if (name == "C-") return Token::Minus;
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Token>(i);
  }
  return std::nullopt;
}

Token variable_token(int index) {
  if (index < 0 || index >= kMaxVariables) {
    throw std::out_of_range("variable index out of range: " + std::to_string(index));
  }
  return static_cast<Token>(token_id(Token::X0) + index);
}

bool is_variable(Token t) { return t >= Token::X0 && t <= Token::X9; }
int variable_index(Token t) { return token_id(t) - token_id(Token::X0); }
bool is_digit(Token t) { return t >= Token::D0 && t <= Token::D9; }
int digit_value(Token t) { return token_id(t) - token_id(Token::D0); }
Token digit_token(int d) { return static_cast<Token>(token_id(Token::D0) + d); }
bool is_sign(Token t) { return t == Token::Plus || t == Token::Minus; }
bool is_special(Token t) { return t <= Token::ConstMark; }

std::string to_text(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    const bool exponent_sign = i > 0 && tokens[i - 1] == Token::E;
    if (is_sign(tokens[i]) && !exponent_sign) out += 'C';
    out += token_name(tokens[i]);
  }
  return out;
}

TokenSeq from_text(std::string_view text) {
  TokenSeq out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    auto t = token_from_name(word);
    if (!t) throw std::invalid_argument("unknown token name '" + word + "'");
    out.push_back(*t);
  }
  return out;
}

std::span<const Token> strip_framing(std::span<const Token> tokens) {
  if (!tokens.empty() && tokens.front() == Token::Bos) tokens = tokens.subspan(1);
  if (!tokens.empty() && tokens.back() == Token::Eos) tokens = tokens.first(tokens.size() - 1);
  return tokens;
}

}  // namespace lee::expr
