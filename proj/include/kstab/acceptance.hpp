#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kstab {

/// Outcome of one pinned acceptance check.
struct CriterionResult {
  int number = 0;
  std::string name;
  bool passed = false;
  std::string detail;  // worst observed value against the pinned tolerance
};

/// Runs the ten pinned closed-form-oracle and property checks. Designed to
/// finish well under two minutes on one core.
std::vector<CriterionResult> run_acceptance();

/// One PASS/FAIL line per criterion; returns the number of failures.
int report_acceptance(const std::vector<CriterionResult>& results,
                      std::ostream& os);

}  // namespace kstab
