#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lee/bench/protocol.hpp"
#include "lee/datagen/corpus.hpp"
#include "lee/model/config.hpp"
#include "lee/search/config.hpp"
#include "lee/train/trainer.hpp"

namespace lee::cli {

/// Every tunable of a run, addressed as `<section>.<field>`. Sections:
/// grammar, data, model, train, search, protocol.
struct RunConfig {
  datagen::GrammarConfig grammar;
  datagen::CorpusOptions data;
  model::ModelConfig model;
  train::TrainConfig train;
  search::SearchConfig search;
  bench::ProtocolConfig protocol;
  std::uint64_t seed = 0;

  /// Throws util::ConfigError on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  /// `key = value` lines; `#` starts a comment. Throws util::ConfigError
  /// with the line number.
  void merge_text(std::string_view text, std::string_view origin = "config");
  void merge_file(const std::filesystem::path& path);
  /// Propagates the run seed into module configs.
  void resolve();
  void validate() const;
  /// Fully resolved `key = value` text; parses back to the same config.
  std::string echo() const;
};

/// Value of LEE_WORKERS when set and valid, else `requested`.
int effective_workers(int requested);

}  // namespace lee::cli
