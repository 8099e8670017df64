#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lee/datagen/grammar.hpp"

namespace lee::datagen {

enum class Split { Train, Val, Test };

std::string_view split_name(Split s);

struct CorpusRecord {
  std::string text;  // canonical token text, unframed
  int k = 1;         // declared variables
  Split split = Split::Train;
  ScatterSet scatter;
};

struct Corpus {
  int k_max = 0;
  int n_scatter = 0;
  std::vector<CorpusRecord> records;
  std::size_t duplicates = 0;
  std::size_t coverage_relaxed = 0;
  std::string config_echo;  // resolved configuration, `key = value` lines

  std::vector<const CorpusRecord*> split(Split s) const;
};

struct CorpusOptions {
  std::size_t n_total = 1000;
  std::uint64_t seed = 0;
  int k_min = 1;
  int k_max = 0;  // 0 = grammar k_max

  template <class F>
  void fields(F&& f) {
    f("n_total", n_total);
    f("k_min", k_min);
    f("k_max", k_max);
  }
  template <class F>
  void fields(F&& f) const {
    f("n_total", n_total);
    f("k_min", k_min);
    f("k_max", k_max);
  }
};

/// Draws n_total expressions (per-index seeded, OpenMP-parallel), dedups by
/// token text, orders by text hash and cuts 80/10/10.
Corpus build_corpus(const GrammarConfig& cfg, const CorpusOptions& opts);

/// 64-bit FNV-1a of the record text.
std::uint64_t record_hash(std::string_view text);

/// Writes `train.lee`, `val.lee`, `test.lee` under `dir`. Each file starts
/// with `LEE-CORPUS v1 k_max=<k> n_scatter=<n>`, then `# key = value`
/// config lines, then `<token text> | <k> <n> <hex block>` records where the
/// hex block is X row-major then y, 16 hex digits per IEEE-754 double.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Reads whichever split files exist under `dir`. Throws std::runtime_error
/// with file and line on malformed input.
Corpus read_corpus(const std::filesystem::path& dir);

std::string encode_record(const CorpusRecord& r);
CorpusRecord decode_record(std::string_view line, Split split);

}  // namespace lee::datagen
