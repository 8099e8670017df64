#include "lee/datagen/scatter.hpp"

#include <cmath>
#include <stdexcept>

namespace lee::datagen {

std::size_t ScatterSet::finite_count() const {
  std::size_t n = 0;
  for (bool f : finite) n += f;
  return n;
}

ScatterSet ScatterSet::select_rows(std::span<const std::size_t> idx) const {
  ScatterSet out;
  out.k = k;
  out.provenance = provenance;
  out.x.reserve(idx.size() * k);
  out.y.reserve(idx.size());
  out.finite.reserve(idx.size());
  for (std::size_t r : idx) {
    if (r >= rows()) throw std::out_of_range("ScatterSet::select_rows: row index out of range");
    out.x.insert(out.x.end(), x.begin() + static_cast<std::ptrdiff_t>(r * k),
                 x.begin() + static_cast<std::ptrdiff_t>((r + 1) * k));
    out.y.push_back(y[r]);
    out.finite.push_back(finite[r]);
  }
  return out;
}

void ScatterSet::refresh_flags() {
  finite.assign(y.size(), false);
  for (std::size_t i = 0; i < y.size(); ++i) finite[i] = std::isfinite(y[i]);
}

ScatterSet make_scatter(std::size_t k, std::vector<double> x, std::vector<double> y, std::string provenance) {
  if (k == 0) throw std::invalid_argument("make_scatter: k must be >= 1");
  if (x.size() != y.size() * k) {
    throw std::invalid_argument("make_scatter: X has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(y.size() * k));
  }
  ScatterSet s;
  s.k = k;
  s.x = std::move(x);
  s.y = std::move(y);
  s.provenance = std::move(provenance);
  s.refresh_flags();
  return s;
}

}  // namespace lee::datagen
