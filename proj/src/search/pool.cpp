#include "lee/search/pool.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace lee::search {

std::string_view origin_name(Origin o) {
  switch (o) {
    case Origin::Init: return "init";
    case Origin::Iter: return "iter";
    case Origin::Refresh: return "refresh";
    case Origin::Grad: return "grad";
    case Origin::Cma: return "cma";
  }
  return "?";
}

double score_value(double r2_train, std::size_t complexity, double alpha) {
  const double clipped = std::isfinite(r2_train) ? std::clamp(r2_train, -1.0, 1.0) : -1.0;
  return clipped - alpha * static_cast<double>(complexity);
}

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.complexity != b.complexity) return a.complexity < b.complexity;
  return a.text < b.text;
}

int bucket_of(std::size_t c) {
  if (c < 5) return 0;
  if (c < 10) return 1;
  if (c < 20) return 2;
  return 3;
}

Pool::Pool(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("pool capacity must be >= 1");
}

void Pool::merge(std::vector<Candidate> incoming) {
  if (incoming.empty()) return;
  std::vector<Candidate> all = std::move(items_);
  for (auto& c : incoming) all.push_back(std::move(c));
  std::sort(all.begin(), all.end(), ranks_before);

  items_.clear();
  std::unordered_map<std::string, bool> seen;
  std::array<std::size_t, 4> per_bucket{};
  for (auto& c : all) {
    if (items_.size() == capacity_) break;
    if (!seen.emplace(c.text, true).second) continue;
    const int b = bucket_of(c.complexity);
    // The first survivor is the overall best and is kept regardless.
    if (!items_.empty() && per_bucket[b] >= bucket_cap()) continue;
    ++per_bucket[b];
    items_.push_back(std::move(c));
  }
}

const Candidate* Pool::best_validation() const {
  const Candidate* best = nullptr;
  for (const auto& c : items_) {
    if (!best || c.r2_val > best->r2_val || (std::isnan(best->r2_val) && !std::isnan(c.r2_val))) best = &c;
  }
  return best;
}

std::vector<const Candidate*> select_parents(const Pool& pool, int k, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("select_parents: empty pool");
  std::vector<double> w(pool.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / static_cast<double>(i + 2);
  std::vector<const Candidate*> out;
  for (int i = 0; i < k; ++i) out.push_back(&pool.ranked()[rng.categorical(w)]);
  return out;
}

}  // namespace lee::search
