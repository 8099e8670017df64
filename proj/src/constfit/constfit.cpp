#include "lee/constfit/constfit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "lee/expr/evaluate.hpp"

namespace lee::constfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Finite-y rows packed for repeated evaluation.
struct Objective {
  expr::Program program;
  std::vector<double> x, y, pred;
  std::size_t k = 0;
  int evaluations = 0;

  Objective(const expr::Expr& e, const datagen::ScatterSet& data) : program(e), k(data.k) {
    for (std::size_t r = 0; r < data.rows(); ++r) {
      if (!std::isfinite(data.y[r])) continue;
      x.insert(x.end(), data.x.begin() + static_cast<std::ptrdiff_t>(r * k),
               data.x.begin() + static_cast<std::ptrdiff_t>((r + 1) * k));
      y.push_back(data.y[r]);
    }
    pred.resize(y.size());
  }

  double operator()(const std::vector<double>& c) {
    ++evaluations;
    if (y.empty()) return kInf;
    program.run_serial({x, y.size(), k}, c, pred);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = pred[i] - y[i];
      s += d * d;
    }
    s /= static_cast<double>(y.size());
    return std::isfinite(s) ? s : kInf;
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

ConstSlots ConstSlots::of(const expr::Expr& e, double bound) {
  ConstSlots s;
  s.lower = -bound;
  s.upper = bound;
  s.initial = e.constants();
  for (double& v : s.initial) v = std::clamp(v, s.lower, s.upper);
  return s;
}

datagen::ScatterSet subsample_rows(const datagen::ScatterSet& data, std::size_t cap, Rng& rng) {
  if (data.rows() <= cap) return data;
  return data.select_rows(rng.sample_without_replacement(data.rows(), cap));
}

int budget_for_round(int round, int rounds, int lo, int hi) {
  if (round < 1 || round > std::max(rounds, 1)) throw std::out_of_range("budget_for_round: round outside 1..R");
  if (rounds <= 1) return hi;
  const double f = static_cast<double>(round - 1) / static_cast<double>(rounds - 1);
  return static_cast<int>(std::lround(lo + f * (hi - lo)));
}

double mse(const expr::Expr& e, const datagen::ScatterSet& data) {
  Objective f(e, data);
  return f(e.constants());
}

FitResult fit_constants(const expr::Expr& e, const datagen::ScatterSet& data, int budget, Rng& rng,
                        const FitConfig& cfg) {
  if (budget < 1) throw std::invalid_argument("fit_constants: budget must be >= 1");
  FitResult out{e};
  const datagen::ScatterSet rows = subsample_rows(data, cfg.row_cap, rng);
  Objective f(e, rows);
  const std::vector<double> original = e.constants();
  out.mse_before = f(original);
  out.mse_after = out.mse_before;
  if (original.empty()) return out;

  const ConstSlots slots = ConstSlots::of(e, cfg.bound);
  const std::size_t n = slots.size();
  auto project = [&](std::vector<double>& v) {
    for (double& c : v) c = std::clamp(c, slots.lower, slots.upper);
  };
  auto gradient = [&](const std::vector<double>& c, std::vector<double>& g) {
    std::vector<double> probe = c;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = cfg.fd_step * std::max(std::fabs(c[i]), 1.0);
      const double hi = std::min(c[i] + h, slots.upper), lo = std::max(c[i] - h, slots.lower);
      probe[i] = hi;
      const double fp = f(probe);
      probe[i] = lo;
      const double fm = f(probe);
      probe[i] = c[i];
      g[i] = (fp - fm) / (hi - lo);
    }
  };

  std::vector<double> x = slots.initial;
  double fx = f(x);
  if (!std::isfinite(fx)) {
    out.failed = !std::isfinite(out.mse_before);
    return out;
  }
  std::vector<double> g(n), g_new(n), d(n), x_new(n);
  gradient(x, g);
  std::deque<std::pair<std::vector<double>, std::vector<double>>> history;  // (s, y)

  for (int it = 0; it < budget; ++it) {
    out.iterations = it + 1;
    if (!std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); })) break;
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) pg = std::max(pg, std::fabs(x[i] - std::clamp(x[i] - g[i], slots.lower, slots.upper)));
    if (pg < cfg.pg_tol) break;

    // Two-loop recursion.
    d = g;
    std::vector<double> alpha(history.size());
    for (std::size_t j = history.size(); j-- > 0;) {
      const auto& [s, yv] = history[j];
      alpha[j] = dot(s, d) / dot(yv, s);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[j] * yv[i];
    }
    if (!history.empty()) {
      const auto& [s, yv] = history.back();
      const double gamma = dot(s, yv) / dot(yv, yv);
      for (double& v : d) v *= gamma;
    } else {
      const double gn = std::sqrt(dot(g, g));
      for (double& v : d) v /= std::max(gn, 1.0);
    }
    for (std::size_t j = 0; j < history.size(); ++j) {
      const auto& [s, yv] = history[j];
      const double beta = dot(yv, d) / dot(yv, s);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[j] - beta) * s[i];
    }
    for (double& v : d) v = -v;
    if (dot(d, g) >= 0.0) {
      history.clear();
      const double gn = std::sqrt(dot(g, g));
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] / std::max(gn, 1.0);
    }

    // Backtracking along the projected path.
    double t = 1.0, f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + t * d[i];
      project(x_new);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - x[i]);
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (history.empty()) break;
      history.clear();
      continue;
    }
    gradient(x_new, g_new);
    std::vector<double> s(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      yv[i] = g_new[i] - g[i];
    }
    if (dot(s, yv) > 1e-12 * std::max(dot(yv, yv), 1e-300)) {
      history.emplace_back(std::move(s), std::move(yv));
      if (static_cast<int>(history.size()) > cfg.memory) history.pop_front();
    }
    const bool stalled = fx - f_new <= 1e-15 * std::max(std::fabs(fx), 1e-300);
    x = x_new;
    fx = f_new;
    g = g_new;
    if (stalled && history.empty()) break;
  }

  out.evaluations = f.evaluations;
  if (fx < out.mse_before || !std::isfinite(out.mse_before)) {
    out.expr = e.with_constants(x);
    out.mse_after = fx;
    out.improved = true;
  }
  return out;
}

}  // namespace lee::constfit
