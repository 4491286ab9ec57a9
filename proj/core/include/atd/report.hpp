#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "atd/harness.hpp"

namespace atd {

/// Markdown table: one row per method, one column per budget, cells "mean ± sd"
/// (marked with '*' when some runs failed).
std::string format_suite_table(const SuiteResult& results);

/// Rebuilds a suite from a directory of run logs, recomputing each run's
/// success rate from its records. Methods and budgets follow `method_order`
/// and ascending budget; methods not listed come last in name order.
SuiteResult suite_from_logs(const std::filesystem::path& dir, const std::vector<std::string>& method_order = {});

}  // namespace atd
