#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "atd/domain.hpp"
#include "atd/harness.hpp"
#include "atd/policy.hpp"

namespace atd {

inline constexpr const char* kTaskSchema = "atd.task/1";
inline constexpr const char* kRunLogSchema = "atd.runlog/1";
inline constexpr const char* kConfigSchema = "atd.config/1";
inline constexpr const char* kScoreDumpSchema = "atd.scores/1";

/// JSON task document: schema, grid, patch, budget, row-major content and mask.
std::string task_to_string(const SearchTask& task);
SearchTask task_from_string(const std::string& text);
void save_task(const std::filesystem::path& path, const SearchTask& task);
SearchTask load_task(const std::filesystem::path& path);

std::string config_to_string(const ExperimentConfig& cfg);
ExperimentConfig config_from_string(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

/// Every leaf of the config as (dotted key, JSON value text).
std::vector<std::pair<std::string, std::string>> config_fields(const ExperimentConfig& cfg);
/// Sets one dotted key. `value` is parsed as JSON when possible, otherwise taken
/// as a string; list fields also accept comma-separated values.
void set_config_field(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct RunLogHeader {
  std::string method;
  int budget = 0;
  std::uint64_t seed = 0;
  int candidates = 0;
  int discoverable = 0;  // query locations with positive outcome
};

/// One JSON object per line: a header, one "step" record per query and a
/// closing "summary" with the success rate.
std::string record_to_json(const RunRecord& rec, bool include_timing = true);
RunRecord record_from_json(const std::string& line);

class RunLogWriter {
 public:
  RunLogWriter(const std::filesystem::path& path, const RunLogHeader& header);
  void write(const RunRecord& rec);
  void finish(double success_rate);

 private:
  std::ofstream out_;
};

struct RunLog {
  RunLogHeader header;
  std::vector<RunRecord> records;
  double reported_success_rate = -1.0;
};

RunLog read_run_log(const std::filesystem::path& path);

/// Success rate recomputed from the logged outcomes.
double replay_success_rate(const RunLog& log);

/// Appends one line per candidate: {t, index, expl, likeli, reward_sum, exploit, combined}.
void append_score_dump(std::ostream& out, int t, const ScoreBreakdown& scores);

}  // namespace atd
