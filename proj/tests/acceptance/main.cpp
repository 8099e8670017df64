// Runs the acceptance criteria and prints one PASS/FAIL line for each.
//   lee_acceptance [--cache DIR] [id ...]

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>

#include <fmt/format.h>

#include "acceptance.hpp"

int main(int argc, char** argv) {
  using namespace lee::acceptance;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cache" && i + 1 < argc) {
      cache_dir() = argv[++i];
    } else {
      only.insert(std::stoi(a));
    }
  }
  auto all = contract_criteria();
  for (auto& c : learning_criteria()) all.push_back(std::move(c));
  std::sort(all.begin(), all.end(), [](const Criterion& a, const Criterion& b) { return a.id < b.id; });

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << fmt::format("criterion {:2d}: {} {} | {} [{:.1f}s]", c.id, o.pass ? "PASS" : "FAIL", c.title,
                             o.detail, secs)
              << std::endl;
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
