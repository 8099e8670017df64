#include "lee/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "lee/util/fields.hpp"

namespace lee::cli {

using util::ConfigError;

namespace {

// Derived from the root seed; not settable on their own.
bool derived_key(std::string_view key) { return key == "train.seed" || key == "protocol.s_base"; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Cfg>
std::string echo_without(const Cfg& cfg, std::string_view prefix, std::string_view skip) {
  std::string out;
  cfg.fields([&](std::string_view name, const auto& member) {
    if (name != skip) out += fmt::format("{}.{} = {}\n", prefix, name, util::format_value(member));
  });
  return out;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "seed") {
    util::parse_value(key, value, seed);
    return;
  }
  if (derived_key(key)) throw ConfigError(fmt::format("config key '{}' is derived from 'seed'", key));
  const auto dot = key.find('.');
  if (dot == std::string_view::npos) throw ConfigError(fmt::format("unknown config key '{}'", key));
  const std::string_view section = key.substr(0, dot), field = key.substr(dot + 1);
  bool found = false;
  if (section == "grammar") found = util::set_field(grammar, field, value);
  else if (section == "data") found = util::set_field(data, field, value);
  else if (section == "model") found = util::set_field(model, field, value);
  else if (section == "train") found = util::set_field(train, field, value);
  else if (section == "search") found = util::set_field(search, field, value);
  else if (section == "protocol") found = util::set_field(protocol, field, value);
  if (!found) throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, line_no));
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

void RunConfig::resolve() {
  data.seed = seed;
  train.seed = seed;
  protocol.s_base = seed;
}

void RunConfig::validate() const {
  try {
    grammar.validate();
    model.validate();
    train.validate();
    search.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data.n_total < 1) throw ConfigError("data.n_total must be >= 1");
  if (data.k_min < 1 || (data.k_max != 0 && data.k_max < data.k_min)) {
    throw ConfigError("data.k_min/k_max must satisfy 1 <= k_min <= k_max");
  }
  if (protocol.eps < 0) throw ConfigError("protocol.eps must be >= 0");
  if (protocol.n_trials < 1) throw ConfigError("protocol.n_trials must be >= 1");
  if (!(protocol.test_fraction > 0 && protocol.test_fraction < 1) ||
      !(protocol.val_fraction >= 0 && protocol.val_fraction < 1)) {
    throw ConfigError("protocol fractions must lie in (0, 1)");
  }
}

std::string RunConfig::echo() const {
  std::string out = fmt::format("seed = {}\n", seed);
  util::echo_fields(grammar, "grammar", out);
  util::echo_fields(data, "data", out);
  util::echo_fields(model, "model", out);
  out += echo_without(train, "train", "seed");
  util::echo_fields(search, "search", out);
  out += echo_without(protocol, "protocol", "s_base");
  return out;
}

int effective_workers(int requested) {
  if (const char* env = std::getenv("LEE_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
  }
  return requested < 1 ? 1 : requested;
}

}  // namespace lee::cli
