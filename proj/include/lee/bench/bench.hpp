#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lee/bench/protocol.hpp"
#include "lee/search/search.hpp"

namespace lee::bench {

/// Reads delimited text with a header `x0,...,x{k-1},y` (comma, tab or
/// whitespace separated). `#` lines are comments; `# truth = <tokens>` sets
/// the ground truth. Rows with a non-finite or unparsable value are dropped
/// and counted. Throws std::runtime_error with file and line on a bad header.
Dataset read_dataset(const std::filesystem::path& path);

/// One line per (dataset, eps, trial).
struct ReportRecord {
  std::string dataset;
  std::string group;
  double eps = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string mode;
  std::optional<double> r2_test;
  std::optional<std::size_t> complexity;
  std::string expr_text;
  std::string expr_infix;
  std::size_t n_failures = 0;  // failed rounds
};

ReportRecord make_record(const Dataset& ds, const std::string& group, double eps, const search::TrialResult& t);
std::string to_json_line(const ReportRecord& r);

struct Summary {
  std::string group;
  double eps = 0.0;
  double r2_mean = 0.0, r2_std = 0.0;
  double complexity_mean = 0.0, complexity_std = 0.0;
  std::size_t datasets = 0;
  std::size_t trials = 0;    // distinct trial indices with at least one result
  std::size_t failures = 0;  // null trials
};

/// Per (group, eps): mean over datasets of per-dataset trial means; std is
/// the sample std over trials of the per-trial dataset mean. Null trials are
/// excluded and counted.
std::vector<Summary> aggregate(const std::vector<ReportRecord>& records);

struct FrontPoint {
  double r2 = 0.0;
  double complexity = 0.0;
  bool operator==(const FrontPoint&) const = default;
};

/// Non-dominated points (higher R^2, lower complexity), duplicates collapsed,
/// sorted by complexity.
std::vector<FrontPoint> pareto_front(std::vector<FrontPoint> points);

/// Plot data as delimited text.
void write_front_csv(const std::vector<FrontPoint>& front, std::ostream& out);
void write_convergence_csv(const std::string& dataset, const search::TrialResult& t, std::ostream& out,
                           bool header);

}  // namespace lee::bench
