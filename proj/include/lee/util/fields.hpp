#pragma once

// Flat `key = value` binding for config structs. A struct exposes
//   template <class F> void fields(F&& f)        { f("name", member); ... }
//   template <class F> void fields(F&& f) const  { ... }
// and gets parsing and echo for free.

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <fmt/format.h>

namespace lee::util {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
void parse_value(std::string_view key, std::string_view text, T& out) {
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "1" || text == "true" || text == "yes" || text == "on") {
      out = true;
    } else if (text == "0" || text == "false" || text == "no" || text == "off") {
      out = false;
    } else {
      throw ConfigError(fmt::format("config key '{}': '{}' is not a boolean", key, text));
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    out = std::string(text);
  } else if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      const std::string s(text);
      out = static_cast<T>(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("config key '{}': '{}' is not a number", key, text));
    }
  } else {
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw ConfigError(fmt::format("config key '{}': '{}' is not an integer", key, text));
    }
    out = v;
  }
}

template <typename T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return fmt::format("{}", v);  // shortest round-trip form
  } else {
    return fmt::format("{}", v);
  }
}

/// Sets `key` on `cfg`; returns false when the struct has no such field.
template <typename Cfg>
bool set_field(Cfg& cfg, std::string_view key, std::string_view value) {
  bool found = false;
  cfg.fields([&](std::string_view name, auto& member) {
    if (!found && name == key) {
      parse_value(key, value, member);
      found = true;
    }
  });
  return found;
}

/// Appends `prefix.key = value` lines.
template <typename Cfg>
void echo_fields(const Cfg& cfg, std::string_view prefix, std::string& out) {
  cfg.fields([&](std::string_view name, const auto& member) {
    out += fmt::format("{}.{} = {}\n", prefix, name, format_value(member));
  });
}

}  // namespace lee::util
