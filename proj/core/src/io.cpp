#include "atd/io.hpp"

#include <sstream>

#include "json.hpp"

namespace atd {

using nlohmann::json;

namespace {

template <class V>
void read_field(const json& j, const char* key, V& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<V>();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::vector<double> to_vector(const Field& f) { return {f.data(), f.data() + f.size()}; }

Field to_field(const std::vector<double>& v) { return Eigen::Map<const Field>(v.data(), static_cast<Index>(v.size())); }

}  // namespace

std::string task_to_string(const SearchTask& task) {
  json j{{"schema", kTaskSchema},
         {"height", task.grid.height},
         {"width", task.grid.width},
         {"patch_h", task.grid.patch_h},
         {"patch_w", task.grid.patch_w},
         {"budget", task.budget},
         {"content", to_vector(task.content)},
         {"target_mask", to_vector(task.target_mask)}};
  return j.dump() + "\n";
}

SearchTask task_from_string(const std::string& text) {
  const json j = json::parse(text);
  require(j.value("schema", "") == kTaskSchema, "not a task document (schema tag missing or unknown)");
  GridShape grid{j.at("height").get<int>(), j.at("width").get<int>(), j.at("patch_h").get<int>(),
                 j.at("patch_w").get<int>()};
  return make_task(to_field(j.at("content").get<std::vector<double>>()),
                   to_field(j.at("target_mask").get<std::vector<double>>()), grid, j.at("budget").get<int>());
}

void save_task(const std::filesystem::path& path, const SearchTask& task) { spit(path, task_to_string(task)); }

SearchTask load_task(const std::filesystem::path& path) { return task_from_string(slurp(path)); }

// ---- config ----

namespace {

json to_json_config(const ExperimentConfig& c) {
  return json{
      {"schema", kConfigSchema},
      {"methods", c.methods},
      {"budgets", c.budgets},
      {"seeds", c.seeds},
      {"task",
       {{"kind", c.task.kind},
        {"path", c.task.path},
        {"height", c.task.height},
        {"width", c.task.width},
        {"patch", c.task.patch},
        {"ball_count", c.task.ball_count},
        {"ball_radius", c.task.ball_radius},
        {"species_threshold", c.task.species_threshold},
        {"region",
         {{"lat_min", c.task.region.lat_min},
          {"lat_max", c.task.region.lat_max},
          {"lon_min", c.task.region.lon_min},
          {"lon_max", c.task.region.lon_max}}}}},
      {"policy",
       {{"sigma_x", c.policy.sigma_x},
        {"P", c.policy.P},
        {"alpha_mode", to_string(c.policy.alpha_mode)},
        {"amplification", c.policy.amplification},
        {"normalization", to_string(c.policy.normalization)}}},
      {"buffer_samples", c.buffer_samples},
      {"scheduler",
       {{"mode", c.scheduler.mode},
        {"updates", c.scheduler.updates},
        {"gamma", c.scheduler.gamma},
        {"every", c.scheduler.every}}},
      {"h_model", {{"width1", c.h_model.width1}, {"width2", c.h_model.width2}, {"time_dim", c.h_model.time_dim}}},
      {"h_train",
       {{"epochs", c.h_train.epochs},
        {"lr", c.h_train.lr},
        {"batch_size", c.h_train.batch_size},
        {"snr_cap", c.h_train.snr_cap}}},
      {"reward",
       {{"epochs", c.reward.epochs},
        {"lr", c.reward.lr},
        {"batch_size", c.reward.batch_size},
        {"label_threshold", c.reward.label_threshold}}},
      {"schedule",
       {{"steps", c.schedule.steps},
        {"beta_start", c.schedule.beta_start},
        {"beta_end", c.schedule.beta_end},
        {"eta", c.schedule.eta}}},
      {"prior",
       {{"backend", c.prior.backend},
        {"checkpoint", c.prior.checkpoint},
        {"mixture_components", c.prior.mixture_components},
        {"mixture_variance", c.prior.mixture_variance},
        {"mixture_seed", c.prior.mixture_seed}}},
      {"ga_posterior", c.ga_posterior},
      {"permanent_update", c.permanent_update},
      {"permanent_train",
       {{"epochs", c.permanent_train.epochs},
        {"lr", c.permanent_train.lr},
        {"batch_size", c.permanent_train.batch_size},
        {"snr_cap", c.permanent_train.snr_cap}}},
      {"tasks_per_sequence", c.tasks_per_sequence},
      {"dump_ensembles", c.dump_ensembles},
      {"dump_scores", c.dump_scores},
  };
}

ExperimentConfig from_json_config(const json& j) {
  if (j.contains("schema")) require(j.at("schema") == kConfigSchema, "unknown config schema");
  ExperimentConfig c;
  read_field(j, "methods", c.methods);
  read_field(j, "budgets", c.budgets);
  read_field(j, "seeds", c.seeds);
  if (j.contains("task")) {
    const json& t = j.at("task");
    read_field(t, "kind", c.task.kind);
    read_field(t, "path", c.task.path);
    read_field(t, "height", c.task.height);
    read_field(t, "width", c.task.width);
    read_field(t, "patch", c.task.patch);
    read_field(t, "ball_count", c.task.ball_count);
    read_field(t, "ball_radius", c.task.ball_radius);
    read_field(t, "species_threshold", c.task.species_threshold);
    if (t.contains("region")) {
      const json& r = t.at("region");
      read_field(r, "lat_min", c.task.region.lat_min);
      read_field(r, "lat_max", c.task.region.lat_max);
      read_field(r, "lon_min", c.task.region.lon_min);
      read_field(r, "lon_max", c.task.region.lon_max);
    }
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    read_field(p, "sigma_x", c.policy.sigma_x);
    read_field(p, "P", c.policy.P);
    if (p.contains("alpha_mode")) c.policy.alpha_mode = parse_alpha_mode(p.at("alpha_mode").get<std::string>());
    read_field(p, "amplification", c.policy.amplification);
    if (p.contains("normalization"))
      c.policy.normalization = parse_normalization(p.at("normalization").get<std::string>());
  }
  read_field(j, "buffer_samples", c.buffer_samples);
  if (j.contains("scheduler")) {
    const json& s = j.at("scheduler");
    read_field(s, "mode", c.scheduler.mode);
    read_field(s, "updates", c.scheduler.updates);
    read_field(s, "gamma", c.scheduler.gamma);
    read_field(s, "every", c.scheduler.every);
  }
  if (j.contains("h_model")) {
    const json& h = j.at("h_model");
    read_field(h, "width1", c.h_model.width1);
    read_field(h, "width2", c.h_model.width2);
    read_field(h, "time_dim", c.h_model.time_dim);
  }
  if (j.contains("h_train")) {
    const json& h = j.at("h_train");
    read_field(h, "epochs", c.h_train.epochs);
    read_field(h, "lr", c.h_train.lr);
    read_field(h, "batch_size", c.h_train.batch_size);
    read_field(h, "snr_cap", c.h_train.snr_cap);
  }
  if (j.contains("reward")) {
    const json& r = j.at("reward");
    read_field(r, "epochs", c.reward.epochs);
    read_field(r, "lr", c.reward.lr);
    read_field(r, "batch_size", c.reward.batch_size);
    read_field(r, "label_threshold", c.reward.label_threshold);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    read_field(s, "steps", c.schedule.steps);
    read_field(s, "beta_start", c.schedule.beta_start);
    read_field(s, "beta_end", c.schedule.beta_end);
    read_field(s, "eta", c.schedule.eta);
  }
  if (j.contains("prior")) {
    const json& p = j.at("prior");
    read_field(p, "backend", c.prior.backend);
    read_field(p, "checkpoint", c.prior.checkpoint);
    read_field(p, "mixture_components", c.prior.mixture_components);
    read_field(p, "mixture_variance", c.prior.mixture_variance);
    read_field(p, "mixture_seed", c.prior.mixture_seed);
  }
  read_field(j, "ga_posterior", c.ga_posterior);
  read_field(j, "permanent_update", c.permanent_update);
  if (j.contains("permanent_train")) {
    const json& p = j.at("permanent_train");
    read_field(p, "epochs", c.permanent_train.epochs);
    read_field(p, "lr", c.permanent_train.lr);
    read_field(p, "batch_size", c.permanent_train.batch_size);
    read_field(p, "snr_cap", c.permanent_train.snr_cap);
  }
  read_field(j, "tasks_per_sequence", c.tasks_per_sequence);
  read_field(j, "dump_ensembles", c.dump_ensembles);
  read_field(j, "dump_scores", c.dump_scores);
  return c;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) flatten(*it, key, out);
    else if (key != "schema") out.emplace_back(key, it->dump());
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

}  // namespace

std::string config_to_string(const ExperimentConfig& cfg) { return to_json_config(cfg).dump(2) + "\n"; }

ExperimentConfig config_from_string(const std::string& text) { return from_json_config(json::parse(text)); }

ExperimentConfig load_config(const std::filesystem::path& path) { return config_from_string(slurp(path)); }

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  spit(path, config_to_string(cfg));
}

std::vector<std::pair<std::string, std::string>> config_fields(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  flatten(to_json_config(cfg), "", out);
  return out;
}

void set_config_field(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  json j = to_json_config(cfg);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(node->is_object() && node->contains(part), "unknown config field '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  require(!node->is_object(), "config field '" + key + "' is a section, not a value");
  json parsed = parse_value(value);
  if (node->is_string()) {
    if (!parsed.is_string()) parsed = json(value);
  } else if (node->is_array() && !parsed.is_array()) {
    parsed = json::array();
    std::size_t s = 0;
    while (s <= value.size()) {
      const std::size_t comma = value.find(',', s);
      const std::string item = value.substr(s, comma == std::string::npos ? std::string::npos : comma - s);
      if (!item.empty()) {
        const json v = parse_value(item);
        parsed.push_back(node->empty() || !(*node)[0].is_string() ? v : json(item));
      }
      if (comma == std::string::npos) break;
      s = comma + 1;
    }
  }
  *node = parsed;
  try {
    cfg = from_json_config(j);
  } catch (const json::exception&) {
    throw InvalidArgument("config field '" + key + "' cannot take the value '" + value + "'");
  }
}

// ---- run logs ----

std::string record_to_json(const RunRecord& rec, bool include_timing) {
  json j{{"kind", "step"},
         {"t", rec.t},
         {"query", rec.query},
         {"outcome", rec.outcome},
         {"alpha", rec.alpha},
         {"cumulative", rec.cumulative},
         {"h_update", rec.h_update},
         {"reward_update", rec.reward_update},
         {"status", rec.status}};
  if (rec.scores) {
    j["scores"] = {{"expl", rec.scores->expl},
                   {"likeli", rec.scores->likeli},
                   {"reward_sum", rec.scores->reward_sum},
                   {"exploit", rec.scores->exploit},
                   {"combined", rec.scores->combined}};
  } else {
    j["scores"] = nullptr;
  }
  if (!rec.error.empty()) j["error"] = rec.error;
  if (include_timing) j["wall_ms"] = rec.wall_ms;
  return j.dump();
}

RunRecord record_from_json(const std::string& line) {
  const json j = json::parse(line);
  require(j.value("kind", "") == "step", "not a step record");
  RunRecord r;
  r.t = j.at("t").get<int>();
  r.query = j.at("query").get<int>();
  r.outcome = j.at("outcome").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.cumulative = j.at("cumulative").get<double>();
  r.h_update = j.at("h_update").get<bool>();
  r.reward_update = j.at("reward_update").get<bool>();
  r.status = j.at("status").get<std::string>();
  read_field(j, "error", r.error);
  read_field(j, "wall_ms", r.wall_ms);
  if (const auto& s = j.at("scores"); !s.is_null())
    r.scores = ChosenScores{s.at("expl").get<double>(), s.at("likeli").get<double>(), s.at("reward_sum").get<double>(),
                            s.at("exploit").get<double>(), s.at("combined").get<double>()};
  return r;
}

RunLogWriter::RunLogWriter(const std::filesystem::path& path, const RunLogHeader& header) : out_(path) {
  if (!out_) throw Error("cannot write " + path.string());
  json j{{"schema", kRunLogSchema},     {"kind", "header"},
         {"method", header.method},     {"budget", header.budget},
         {"seed", header.seed},         {"candidates", header.candidates},
         {"discoverable", header.discoverable}};
  out_ << j.dump() << '\n';
}

void RunLogWriter::write(const RunRecord& rec) { out_ << record_to_json(rec) << '\n'; }

void RunLogWriter::finish(double success_rate) {
  out_ << json{{"kind", "summary"}, {"success_rate", success_rate}}.dump() << '\n';
  out_.flush();
}

RunLog read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  RunLog log;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string kind = j.value("kind", "");
    if (kind == "header") {
      require(j.value("schema", "") == kRunLogSchema, "unknown run log schema");
      log.header.method = j.at("method").get<std::string>();
      log.header.budget = j.at("budget").get<int>();
      log.header.seed = j.at("seed").get<std::uint64_t>();
      log.header.candidates = j.at("candidates").get<int>();
      log.header.discoverable = j.at("discoverable").get<int>();
      have_header = true;
    } else if (kind == "step") {
      log.records.push_back(record_from_json(line));
    } else if (kind == "summary") {
      log.reported_success_rate = j.at("success_rate").get<double>();
    }
  }
  require(have_header, "run log has no header: " + path.string());
  return log;
}

double replay_success_rate(const RunLog& log) {
  std::vector<double> outcomes;
  for (const auto& r : log.records)
    if (r.status == "ok") outcomes.push_back(r.outcome);
  return run_success(outcomes, log.header.budget, log.header.discoverable);
}

void append_score_dump(std::ostream& out, int t, const ScoreBreakdown& scores) {
  for (Index q = 0; q < scores.combined.size(); ++q) {
    out << json{{"schema", kScoreDumpSchema},
                {"t", t},
                {"index", q},
                {"expl", scores.raw.expl(q)},
                {"likeli", scores.raw.likeli(q)},
                {"reward_sum", scores.raw.reward_sum(q)},
                {"exploit", scores.raw.exploit(q)},
                {"combined", scores.combined(q)}}
               .dump()
        << '\n';
  }
}

}  // namespace atd
