#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lee/datagen/scatter.hpp"
#include "lee/util/rng.hpp"

namespace lee::bench {

/// Raised on any read of the test fold before final reporting.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Dataset {
  std::string name;
  datagen::ScatterSet data;  // all rows finite
  std::optional<std::string> truth;
  std::string source;
  std::size_t dropped_rows = 0;
};

struct ProtocolConfig {
  double eps = 0.0;
  double test_fraction = 0.25;
  double val_fraction = 0.2;  // of the non-test rows
  int n_trials = 10;
  std::uint64_t s_base = 0;

  template <class F>
  void fields(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void fields(F&& f) const {
    visit(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f("eps", s.eps);
    f("test_fraction", s.test_fraction);
    f("val_fraction", s.val_fraction);
    f("n_trials", s.n_trials);
    f("s_base", s.s_base);
  }
};

/// Train and validation folds are open; the test fold stays sealed until
/// release_test() is called by final reporting.
class Splits {
 public:
  Splits(datagen::ScatterSet train, datagen::ScatterSet val, datagen::ScatterSet test);

  datagen::ScatterSet train, val;
  const datagen::ScatterSet& test() const;
  void release_test() { released_ = true; }
  bool released() const { return released_; }
  std::size_t test_rows() const { return test_.rows(); }
  std::size_t test_reads() const { return test_reads_; }

 private:
  datagen::ScatterSet test_;
  bool released_ = false;
  mutable std::size_t test_reads_ = 0;
};

/// Seeded row partition: test = round(N * test_fraction), val =
/// round(rest * val_fraction), train = the remainder. Needs N >= 10.
Splits split(const datagen::ScatterSet& data, std::uint64_t seed, const ProtocolConfig& cfg = {});

/// Gaussian noise with sigma = eps * (max - min) of the training targets,
/// added to train and validation targets. Test stays clean.
void add_noise(Splits& s, double eps, Rng& rng);

/// Coefficient of determination. Constant y gives 1 for an exact match and
/// kDegenerateR2 otherwise; a non-finite prediction gives kDegenerateR2.
double r2(std::span<const double> y, std::span<const double> y_hat);
inline constexpr double kDegenerateR2 = -10.0;

/// s_t = s_base + 1000 t.
inline std::uint64_t trial_seed(std::uint64_t s_base, int trial) {
  return s_base + 1000u * static_cast<std::uint64_t>(trial);
}

}  // namespace lee::bench
