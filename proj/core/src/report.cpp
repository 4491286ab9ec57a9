#include "atd/report.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "atd/io.hpp"

namespace atd {

std::string format_suite_table(const SuiteResult& results) {
  std::vector<std::string> methods;
  std::set<int> budgets;
  for (const auto& c : results.cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    budgets.insert(c.budget);
  }
  std::ostringstream os;
  os << "| method |";
  for (int b : budgets) os << " B=" << b << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < budgets.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& m : methods) {
    os << "| " << m << " |";
    for (int b : budgets) {
      const auto it = std::find_if(results.cells.begin(), results.cells.end(),
                                   [&](const SuiteCell& c) { return c.method == m && c.budget == b; });
      if (it == results.cells.end() || it->success.empty()) {
        os << " - |";
        continue;
      }
      os << ' ' << format_mean_sd(it->mean(), it->sd()) << (it->complete ? "" : "*") << " |";
    }
    os << '\n';
  }
  return os.str();
}

SuiteResult suite_from_logs(const std::filesystem::path& dir, const std::vector<std::string>& method_order) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::map<std::pair<std::string, int>, SuiteCell> cells;
  for (const auto& f : files) {
    const RunLog log = read_run_log(f);
    SuiteCell& cell = cells[{log.header.method, log.header.budget}];
    cell.method = log.header.method;
    cell.budget = log.header.budget;
    const bool aborted = !log.records.empty() && log.records.back().status != "ok";
    if (aborted) {
      cell.complete = false;
      cell.errors.push_back(f.filename().string() + ": " + log.records.back().error);
      continue;
    }
    cell.seeds.push_back(log.header.seed);
    cell.success.push_back(replay_success_rate(log));
    std::vector<double> curve;
    for (const auto& r : log.records) curve.push_back(r.cumulative);
    cell.curves.push_back(std::move(curve));
  }
  auto rank = [&](const std::string& m) {
    const auto it = std::find(method_order.begin(), method_order.end(), m);
    return static_cast<std::size_t>(it - method_order.begin());
  };
  std::vector<SuiteCell> ordered;
  for (auto& [key, cell] : cells) ordered.push_back(std::move(cell));
  std::stable_sort(ordered.begin(), ordered.end(), [&](const SuiteCell& a, const SuiteCell& b) {
    if (rank(a.method) != rank(b.method)) return rank(a.method) < rank(b.method);
    if (a.method != b.method) return a.method < b.method;
    return a.budget < b.budget;
  });
  return SuiteResult{std::move(ordered)};
}

}  // namespace atd
