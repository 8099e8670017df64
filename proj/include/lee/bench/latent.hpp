#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lee/datagen/corpus.hpp"
#include "lee/model/model.hpp"

namespace lee::bench {

/// Deterministic latents (mu) for corpus records, one row per record.
tensor::Matrix encode_records(const model::Model& m, std::span<const datagen::CorpusRecord* const> records,
                              std::size_t batch = 32);

struct Labeler {
  std::string name;
  std::function<int(const expr::Expr&, int k)> label;
  bool multiclass = false;
};

/// has-trig, has-log/exp, has-sq/cube, has-division, is-polynomial,
/// high-dim (k >= high_dim_k), num-variables.
std::vector<Labeler> standard_labelers(int high_dim_k = 2);

struct ProbeConfig {
  int iterations = 2000;
  double lr = 0.1;
  double c = 1.0;  // inverse L2 strength
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  std::string name;
  bool skipped = false;
  std::string reason;
  std::size_t n_train = 0, n_test = 0, classes = 0;
  std::optional<double> auc;  // binary only
  double accuracy = 0.0;
  double majority = 0.0;  // test accuracy of the majority class
};

enum class ProbeTask { Binary, Multiclass };

/// Logistic (binary) or softmax (multiclass) regression on standardized
/// features, full-batch gradient descent, stratified split. Binary needs 0/1
/// labels. Single-class labels are skipped.
ProbeResult linear_probe(const tensor::Matrix& features, std::span<const int> labels, ProbeTask task,
                         const ProbeConfig& cfg = {});

/// Mann-Whitney AUC; ties count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct InterpConfig {
  std::vector<double> ts{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  int samples = 32;  // one greedy, the rest sampled
  double temperature = 0.7;
  int max_len = 0;
  std::uint64_t seed = 0;
};

struct InterpStep {
  double t = 0.0;
  std::vector<double> z;
  std::optional<expr::Expr> best;  // lowest MAE to the blended targets
  double mae = 0.0;
  std::size_t parsed = 0;
};

/// z_t = (1 - t) z_a + t z_b between the deterministic latents of a and b;
/// each z_t is decoded and scored against (1 - t) f_a + t f_b on `queries`.
std::vector<InterpStep> interpolate(const model::Model& m, const expr::Expr& a, const datagen::ScatterSet& sa,
                                    const expr::Expr& b, const datagen::ScatterSet& sb, expr::MatrixView queries,
                                    const InterpConfig& cfg = {});

}  // namespace lee::bench
