// Acceptance criteria: one PASS/FAIL line per criterion. Exit status is
// non-zero when any criterion fails.

#include "sgrl/selftest.hpp"

#include <algorithm>
#include <iostream>

int main() {
  using namespace sgrl::selftest;
  auto results = run_all(Options{});
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  int failed = 0;
  for (const auto& r : results) {
    print(std::cout, r);
    failed += r.passed ? 0 : 1;
  }
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
