#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lee/datagen/corpus.hpp"
#include "lee/model/model.hpp"
#include "lee/search/config.hpp"
#include "lee/train/trainer.hpp"

namespace lee::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

std::vector<Criterion> contract_criteria();
std::vector<Criterion> learning_criteria();

/// Where trained checkpoints are kept between runs.
std::filesystem::path& cache_dir();

/// Held-out target for the end-to-end checks.
struct Target {
  std::string name;
  expr::Expr expr;
  int k;
};
std::vector<Target> toy_targets();

/// Desk model trained on the toy corpus. Cached on disk keyed by its full
/// configuration; trained on first use (tens of minutes on one core).
const model::Model& toy_model();
const datagen::Corpus& toy_corpus();
search::SearchConfig toy_search();

}  // namespace lee::acceptance
