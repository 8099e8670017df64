#include "lee/bench/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "lee/expr/codec.hpp"

namespace lee::bench {

namespace {

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || ch == '\t' || ch == ' ' || ch == ';') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("{}: cannot open", path.string()));
  Dataset ds;
  ds.name = path.stem().string();
  ds.source = path.string();
  std::string line;
  std::size_t line_no = 0, k = 0;
  bool have_header = false;
  std::vector<double> x, y;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      if (body.rfind("truth", 0) == 0) {
        const auto eq = body.find_first_of("=:");
        if (eq != std::string::npos) ds.truth = trim(body.substr(eq + 1));
      }
      continue;
    }
    const auto cols = fields_of(t);
    if (!have_header) {
      if (cols.size() < 2 || cols.back() != "y") {
        throw std::runtime_error(fmt::format("{}:{}: header must be x0,...,x(k-1),y", path.string(), line_no));
      }
      for (std::size_t c = 0; c + 1 < cols.size(); ++c) {
        if (cols[c] != "x" + std::to_string(c)) {
          throw std::runtime_error(
              fmt::format("{}:{}: expected column x{} but found '{}'", path.string(), line_no, c, cols[c]));
        }
      }
      k = cols.size() - 1;
      have_header = true;
      continue;
    }
    std::vector<double> vals;
    bool ok = cols.size() == k + 1;
    for (std::size_t c = 0; ok && c < cols.size(); ++c) {
      double v = 0.0;
      const auto* b = cols[c].data();
      const auto [p, ec] = std::from_chars(b, b + cols[c].size(), v);
      ok = ec == std::errc() && p == b + cols[c].size() && std::isfinite(v);
      vals.push_back(v);
    }
    if (!ok) {
      ++ds.dropped_rows;
      continue;
    }
    x.insert(x.end(), vals.begin(), vals.end() - 1);
    y.push_back(vals.back());
  }
  if (!have_header) throw std::runtime_error(fmt::format("{}: no header line", path.string()));
  ds.data = datagen::make_scatter(k, std::move(x), std::move(y), "file:" + path.string());
  return ds;
}

ReportRecord make_record(const Dataset& ds, const std::string& group, double eps, const search::TrialResult& t) {
  ReportRecord r;
  r.dataset = ds.name;
  r.group = group;
  r.eps = eps;
  r.trial = t.trial;
  r.seed = t.seed;
  r.mode = std::string(search::mode_name(t.mode));
  r.n_failures = t.failed_rounds;
  if (t.winner && t.r2_test) {
    r.r2_test = *t.r2_test;
    r.complexity = t.complexity;
    r.expr_text = t.winner->text;
    r.expr_infix = t.winner->expr.to_infix();
  }
  return r;
}

std::string to_json_line(const ReportRecord& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["group"] = r.group;
  j["eps"] = r.eps;
  j["trial"] = r.trial;
  j["seed"] = r.seed;
  j["mode"] = r.mode;
  j["r2_test"] = r.r2_test ? nlohmann::ordered_json(*r.r2_test) : nlohmann::ordered_json(nullptr);
  j["complexity"] = r.complexity ? nlohmann::ordered_json(*r.complexity) : nlohmann::ordered_json(nullptr);
  j["expr_text"] = r.expr_text;
  j["expr_infix"] = r.expr_infix;
  j["n_failures"] = r.n_failures;
  return j.dump();
}

std::vector<Summary> aggregate(const std::vector<ReportRecord>& records) {
  struct Cell {
    std::map<std::string, std::vector<std::pair<double, double>>> per_dataset;  // (r2, complexity)
    std::map<int, std::vector<std::pair<double, double>>> per_trial;
    std::size_t failures = 0;
  };
  std::map<std::pair<std::string, double>, Cell> cells;
  for (const auto& r : records) {
    Cell& c = cells[{r.group, r.eps}];
    if (!r.r2_test || !r.complexity) {
      ++c.failures;
      continue;
    }
    const std::pair<double, double> v{*r.r2_test, static_cast<double>(*r.complexity)};
    c.per_dataset[r.dataset].push_back(v);
    c.per_trial[r.trial].push_back(v);
  }
  std::vector<Summary> out;
  for (const auto& [key, c] : cells) {
    Summary s;
    s.group = key.first;
    s.eps = key.second;
    s.failures = c.failures;
    s.datasets = c.per_dataset.size();
    s.trials = c.per_trial.size();
    if (!c.per_dataset.empty()) {
      std::vector<double> r2_means, c_means;
      for (const auto& [name, vals] : c.per_dataset) {
        double a = 0, b = 0;
        for (const auto& [r2, cx] : vals) {
          a += r2;
          b += cx;
        }
        r2_means.push_back(a / vals.size());
        c_means.push_back(b / vals.size());
      }
      s.r2_mean = mean_of(r2_means);
      s.complexity_mean = mean_of(c_means);
      std::vector<double> r2_trials, c_trials;
      for (const auto& [t, vals] : c.per_trial) {
        double a = 0, b = 0;
        for (const auto& [r2, cx] : vals) {
          a += r2;
          b += cx;
        }
        r2_trials.push_back(a / vals.size());
        c_trials.push_back(b / vals.size());
      }
      s.r2_std = sample_std(r2_trials);
      s.complexity_std = sample_std(c_trials);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<FrontPoint> pareto_front(std::vector<FrontPoint> points) {
  std::sort(points.begin(), points.end(), [](const FrontPoint& a, const FrontPoint& b) {
    if (a.complexity != b.complexity) return a.complexity < b.complexity;
    return a.r2 > b.r2;
  });
  std::vector<FrontPoint> front;
  for (const auto& p : points) {
    // Sorted by complexity asc then r2 desc: p survives iff it beats every
    // kept point's R^2 strictly.
    if (front.empty() || p.r2 > front.back().r2) front.push_back(p);
  }
  return front;
}

void write_front_csv(const std::vector<FrontPoint>& front, std::ostream& out) {
  out << "complexity,r2\n";
  for (const auto& p : front) out << fmt::format("{},{}\n", p.complexity, p.r2);
}

void write_convergence_csv(const std::string& dataset, const search::TrialResult& t, std::ostream& out,
                           bool header) {
  if (header) out << "dataset,trial,round,iteration,best_score,best_r2_train,best_complexity\n";
  for (std::size_t r = 0; r < t.rounds.size(); ++r) {
    for (const auto& rec : t.rounds[r].log) {
      out << fmt::format("{},{},{},{},{},{},{}\n", dataset, t.trial, r + 1, rec.iteration, rec.best_score,
                         rec.best_r2_train, rec.best_complexity);
    }
  }
}

}  // namespace lee::bench
