#include "lee/bench/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace lee::bench {

Splits::Splits(datagen::ScatterSet tr, datagen::ScatterSet va, datagen::ScatterSet te)
    : train(std::move(tr)), val(std::move(va)), test_(std::move(te)) {}

const datagen::ScatterSet& Splits::test() const {
  if (!released_) throw ProtocolViolation("test fold read before final reporting");
  ++test_reads_;
  return test_;
}

Splits split(const datagen::ScatterSet& data, std::uint64_t seed, const ProtocolConfig& cfg) {
  const std::size_t n = data.rows();
  if (n < 10) throw std::invalid_argument("split: need at least 10 rows, got " + std::to_string(n));
  Rng rng(mix_seed(seed, seed_stream::kSplit));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.test_fraction));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n - n_test) * cfg.val_fraction));
  const std::span<const std::size_t> all(order);
  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> rows(all.begin() + static_cast<std::ptrdiff_t>(begin),
                                  all.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(rows.begin(), rows.end());
    return data.select_rows(rows);
  };
  const std::size_t n_train = n - n_test - n_val;
  return Splits(take(0, n_train), take(n_train, n_val), take(n_train + n_val, n_test));
}

void add_noise(Splits& s, double eps, Rng& rng) {
  if (eps < 0) throw std::invalid_argument("add_noise: eps must be >= 0");
  if (eps == 0.0 || s.train.rows() == 0) return;
  const auto [lo, hi] = std::minmax_element(s.train.y.begin(), s.train.y.end());
  const double sigma = eps * (*hi - *lo);
  for (double& v : s.train.y) v += sigma * rng.normal();
  for (double& v : s.val.y) v += sigma * rng.normal();
  s.train.refresh_flags();
  s.val.refresh_flags();
}

double r2(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw std::invalid_argument("r2: length mismatch");
  if (y.size() < 2) throw std::invalid_argument("r2: need at least two rows");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y_hat[i])) return kDegenerateR2;
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : kDegenerateR2;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace lee::bench
