#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace emachine::acceptance {

struct CriterionResult {
  int id = 0;
  std::string suite;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Suite names in criterion order.
const std::vector<std::string>& suite_names();
/// Criterion id for a suite name, nullopt if unknown.
std::optional<int> suite_id(const std::string& name);

CriterionResult run_criterion(int id, std::uint64_t seed, unsigned workers = 0);
/// "all" runs every criterion.
std::vector<CriterionResult> run_suite(const std::string& name, std::uint64_t seed, unsigned workers = 0);

/// Timings are left out by default so reports are reproducible byte for byte.
nlohmann::json to_json(const std::vector<CriterionResult>& results, bool include_timing = false);

}  // namespace emachine::acceptance
