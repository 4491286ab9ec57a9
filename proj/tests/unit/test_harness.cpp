#include "doctest.h"

#include <atd/io.hpp>
#include <atd/report.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"

using namespace atd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("atd_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string stream_of(const EpisodeResult& ep) {
  std::string s;
  for (const auto& r : ep.records) s += record_to_json(r, false) + "\n";
  return s;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("method names") {
    for (Method m : {Method::EmPtdm, Method::Random, Method::GreedyAdaptive, Method::DiffatdStatic})
      CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("oracle"), InvalidArgument);
  }

  TEST_CASE("random baseline logs no scores and its success rate matches its outcomes") {
    const ExperimentConfig cfg = fixture::tiny_config();
    const SearchTask task = fixture::tiny_task(3, 20);
    const EpisodeResult ep = run_episode(cfg, Method::Random, fixture::tiny_prior(cfg), task, 4);
    REQUIRE(ep.records.size() == 20);
    double sum = 0.0;
    ObservationSet obs(task.grid);
    for (const auto& r : ep.records) {
      CHECK_FALSE(r.scores.has_value());
      CHECK_FALSE(r.h_update);
      CHECK_FALSE(r.reward_update);
      auto [fb, next] = query(task, obs, r.query);
      obs = next;
      CHECK(fb.outcome == r.outcome);
      sum += fb.outcome;
    }
    CHECK(ep.success_rate == doctest::Approx(std::min(1.0, sum / std::min(20, task.discoverable()))));
  }

  TEST_CASE("episodes query every step exactly once and accumulate outcomes") {
    const ExperimentConfig cfg = fixture::tiny_config();
    const ScoreModel prior = fixture::tiny_prior(cfg);
    const SearchTask task = fixture::tiny_task(1);
    for (Method m : {Method::EmPtdm, Method::GreedyAdaptive, Method::DiffatdStatic, Method::Random}) {
      const EpisodeResult ep = run_episode(cfg, m, prior, task, 2);
      CHECK_FALSE(ep.aborted);
      REQUIRE(ep.records.size() == static_cast<std::size_t>(task.budget));
      std::set<int> seen;
      double total = 0.0;
      for (std::size_t t = 0; t < ep.records.size(); ++t) {
        const RunRecord& r = ep.records[t];
        CHECK(r.t == static_cast<int>(t));
        CHECK(seen.insert(r.query).second);
        total += r.outcome;
        CHECK(r.cumulative == doctest::Approx(total));
        if (t > 0) CHECK(r.cumulative >= ep.records[t - 1].cumulative);
      }
    }
  }

  TEST_CASE("em-ptdm retrains on schedule and the static variant never does") {
    const ExperimentConfig cfg = fixture::tiny_config();
    const ScoreModel prior = fixture::tiny_prior(cfg);
    const SearchTask task = fixture::tiny_task(1);
    const EpisodeResult em = run_episode(cfg, Method::EmPtdm, prior, task, 2);
    std::vector<int> when;
    for (const auto& r : em.records)
      if (r.h_update) when.push_back(r.t);
    CHECK(when == schedule_updates(task.budget, cfg.scheduler.updates, cfg.scheduler.gamma));
    CHECK(em.update_l2.size() == when.size());
    CHECK_FALSE(em.h.output_is_zero());
    const EpisodeResult st = run_episode(cfg, Method::DiffatdStatic, prior, task, 2);
    for (const auto& r : st.records) CHECK_FALSE(r.h_update);
    CHECK(st.h.output_is_zero());
  }

  TEST_CASE("switching the scheduler off reproduces the static variant") {
    ExperimentConfig cfg = fixture::tiny_config();
    cfg.scheduler.mode = "none";
    const ScoreModel prior = fixture::tiny_prior(cfg);
    const SearchTask task = fixture::tiny_task(6);
    const EpisodeResult a = run_episode(cfg, Method::EmPtdm, prior, task, 9);
    const EpisodeResult b = run_episode(cfg, Method::DiffatdStatic, prior, task, 9);
    CHECK(stream_of(a) == stream_of(b));
  }

  TEST_CASE("runs are byte-identical apart from timing") {
    const ExperimentConfig cfg = fixture::tiny_config();
    const ScoreModel prior = fixture::tiny_prior(cfg);
    const SearchTask task = fixture::tiny_task(2);
    for (Method m : {Method::EmPtdm, Method::Random, Method::GreedyAdaptive}) {
      const std::string a = stream_of(run_episode(cfg, m, prior, task, 11));
      const std::string b = stream_of(run_episode(cfg, m, prior, task, 11));
      CHECK(a == b);
      CHECK(a.find("wall_ms") == std::string::npos);
    }
    CHECK(record_to_json(RunRecord{}, true).find("wall_ms") != std::string::npos);
  }

  TEST_CASE("failures end the episode with an aborted record") {
    ExperimentConfig cfg = fixture::tiny_config();
    const SearchTask task = fixture::tiny_task(1);
    GaussianMixture bad = fixture::random_mixture(2, 64, 1);
    bad.means(0, 5) = std::numeric_limits<double>::quiet_NaN();
    bad.means(1, 5) = std::numeric_limits<double>::quiet_NaN();
    const EpisodeResult nan = run_episode(cfg, Method::EmPtdm, ScoreModel::analytic(bad, cfg.schedule.build()), task, 1);
    CHECK(nan.aborted);
    CHECK(nan.records.size() == 1);
    CHECK(nan.records.back().status == "aborted");
    CHECK_FALSE(nan.records.back().error.empty());

    cfg.h_train.epochs = -1;
    const EpisodeResult broken = run_episode(cfg, Method::EmPtdm, fixture::tiny_prior(cfg), task, 1);
    CHECK(broken.aborted);
    const int first = schedule_updates(task.budget, cfg.scheduler.updates, cfg.scheduler.gamma).front();
    CHECK(broken.records.size() == static_cast<std::size_t>(first + 1));
    CHECK(broken.records.back().status == "aborted");
  }

  TEST_CASE("suite cells match single episodes and are independent of other seeds") {
    ExperimentConfig cfg = fixture::tiny_config();
    cfg.methods = {"ga", "rs"};
    cfg.budgets = {10};
    cfg.seeds = {4};
    const ScoreModel prior = fixture::tiny_prior(cfg);
    const SuiteResult one = run_suite(cfg, prior);
    REQUIRE(one.cells.size() == 2);
    const EpisodeResult ep = run_episode(cfg, Method::GreedyAdaptive, prior, make_config_task(cfg, 4, 10), 4);
    CHECK(one.cells[0].success == std::vector<double>{ep.success_rate});
    cfg.seeds = {4, 5};
    const SuiteResult two = run_suite(cfg, prior);
    CHECK(two.cells[0].success[0] == one.cells[0].success[0]);
    CHECK(two.cells[1].success[0] == one.cells[1].success[0]);
    CHECK(two.cells[1].seeds == std::vector<std::uint64_t>{4, 5});
  }

  TEST_CASE("suite statistics and formatting") {
    SuiteCell c;
    c.success = {0.5, 0.7};
    CHECK(c.mean() == doctest::Approx(0.6));
    CHECK(c.sd() == doctest::Approx(std::sqrt(0.02)));
    CHECK(format_mean_sd(0.562, 0.0073) == "0.5620 ± 0.0073");
    SuiteResult r;
    c.method = "em-ptdm";
    c.budget = 150;
    r.cells.push_back(c);
    c.method = "rs";
    c.complete = false;
    r.cells.push_back(c);
    const std::string table = format_suite_table(r);
    CHECK(table.find("em-ptdm") != std::string::npos);
    CHECK(table.find("0.6000 ± 0.1414") != std::string::npos);
    CHECK(table.find("*") != std::string::npos);
  }

  TEST_CASE("plots") {
    const fs::path dir = scratch("plots");
    emit_plots(SuiteResult{}, dir);
    CHECK(read_file(dir / "curves.csv") == "method,budget,seed,t,cumulative\n");
    CHECK(read_file(dir / "sr_by_budget.csv") == "method,budget,runs,mean,sd,formatted,complete\n");

    ExperimentConfig cfg = fixture::tiny_config();
    cfg.methods = {"rs", "ga"};
    cfg.budgets = {6};
    cfg.seeds = {1, 2};
    std::vector<std::vector<double>> rs_curves;
    const SuiteResult res = run_suite(cfg, fixture::tiny_prior(cfg), [&](const std::string& m, int, std::uint64_t, const EpisodeResult& ep) {
      if (m != "rs") return;
      std::vector<double> c;
      for (const auto& r : ep.records) c.push_back(r.cumulative);
      rs_curves.push_back(c);
    });
    emit_plots(res, dir);
    const std::string svg = read_file(dir / "curves_B6.svg");
    CHECK(svg.find(">rs<") < svg.find(">ga<"));
    std::ifstream csv(dir / "curves.csv");
    std::string line;
    std::getline(csv, line);
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t t = 0; t < 6; ++t) {
        REQUIRE(std::getline(csv, line));
        CHECK(std::stod(line.substr(line.rfind(',') + 1)) == rs_curves[s][t]);
      }
    fs::remove_all(dir);
  }

  TEST_CASE("cross-task loop") {
    ExperimentConfig cfg = fixture::tiny_config();
    const ScoreModel analytic = fixture::tiny_prior(cfg);
    const std::vector<SearchTask> tasks{fixture::tiny_task(1, 6), fixture::tiny_task(2, 6)};
    const SequenceResult off = cross_task_loop(cfg, Method::DiffatdStatic, analytic, tasks, 3);
    CHECK(off.episodes.size() == 2);
    CHECK(off.prior_checksums[0] == off.prior_checksums[1]);
    cfg.permanent_update = true;
    CHECK_THROWS_AS(cross_task_loop(cfg, Method::EmPtdm, analytic, tasks, 3), InvalidArgument);

    const ScoreModel net = ScoreModel::denoiser(64, cfg.schedule.build(), 4, {16, 8});
    cfg.permanent_train.epochs = 2;
    const SequenceResult on = cross_task_loop(cfg, Method::EmPtdm, net, tasks, 3);
    CHECK(on.prior_checksums[0] == net.checksum());
    CHECK(on.prior_checksums[1] != net.checksum());
    const SequenceResult single = cross_task_loop(cfg, Method::EmPtdm, net, {tasks[0]}, 3);
    CHECK(stream_of(single.episodes[0]) == stream_of(on.episodes[0]));
  }

  TEST_CASE("final buffer carries the revealed pixels") {
    const ExperimentConfig cfg = fixture::tiny_config();
    const ScoreModel prior = fixture::tiny_prior(cfg);
    const EpisodeResult ep = run_episode(cfg, Method::EmPtdm, prior, fixture::tiny_task(1), 2);
    const TrainBuffer buf = final_posterior_buffer(cfg, prior, ep, 2);
    CHECK(buf.size() == static_cast<std::size_t>(cfg.buffer_size()));
    for (const Field& f : buf.samples())
      CHECK(((f - ep.observations.values()).abs() * ep.observations.mask()).maxCoeff() == 0.0);
  }

  TEST_CASE("config round trip and overrides") {
    ExperimentConfig cfg = fixture::tiny_config();
    cfg.methods = {"rs", "em-ptdm"};
    cfg.seeds = {1, 2, 3};
    cfg.policy.alpha_mode = AlphaMode::Amplified;
    const ExperimentConfig back = config_from_string(config_to_string(cfg));
    CHECK(config_to_string(back) == config_to_string(cfg));
    CHECK(config_fields(back) == config_fields(cfg));

    set_config_field(cfg, "policy.P", "8");
    set_config_field(cfg, "budgets", "150,200");
    set_config_field(cfg, "scheduler.mode", "uniform");
    set_config_field(cfg, "methods", "[\"ga\"]");
    set_config_field(cfg, "policy.alpha_mode", "linear-remaining");
    CHECK(cfg.policy.P == 8);
    CHECK(cfg.budgets == std::vector<int>{150, 200});
    CHECK(cfg.scheduler.mode == "uniform");
    CHECK(cfg.methods == std::vector<std::string>{"ga"});
    CHECK(cfg.policy.alpha_mode == AlphaMode::LinearRemaining);
    CHECK_THROWS_AS(set_config_field(cfg, "policy.nope", "1"), InvalidArgument);

    const ExperimentConfig partial = config_from_string("{\"policy\": {\"P\": 4}}");
    CHECK(partial.policy.P == 4);
    CHECK(partial.budgets == ExperimentConfig{}.budgets);
    for (const auto& [key, value] : config_fields(ExperimentConfig{})) {
      ExperimentConfig c;
      CHECK_NOTHROW(set_config_field(c, key, value));
    }
  }

  TEST_CASE("task files") {
    const SearchTask t = fixture::tiny_task(5);
    const SearchTask back = task_from_string(task_to_string(t));
    CHECK(back.grid == t.grid);
    CHECK(back.budget == t.budget);
    CHECK((back.content == t.content).all());
    CHECK((back.target_mask == t.target_mask).all());
    CHECK_THROWS(task_from_string("{\"grid\": [8, 8]}"));
    const fs::path dir = scratch("task");
    save_task(dir / "t.json", t);
    CHECK((load_task(dir / "t.json").content == t.content).all());
    ExperimentConfig cfg = fixture::tiny_config();
    cfg.task.kind = "file";
    cfg.task.path = (dir / "t.json").string();
    CHECK(make_config_task(cfg, 0, 5).budget == 5);
    fs::remove_all(dir);
  }

  TEST_CASE("run logs replay to the reported success rate") {
    const ExperimentConfig cfg = fixture::tiny_config();
    const SearchTask task = fixture::tiny_task(8);
    const fs::path dir = scratch("logs");
    for (const char* name : {"em-ptdm", "rs"}) {
      RunLogWriter w(dir / (std::string(name) + "_B12_s8.jsonl"),
                     {name, task.budget, 8, task.grid.candidates(), task.discoverable()});
      const EpisodeResult ep = run_episode(cfg, parse_method(name), fixture::tiny_prior(cfg), task, 8,
                                           EpisodeSinks{[&](const RunRecord& r) { w.write(r); }, {}, {}});
      w.finish(ep.success_rate);
      const RunLog log = read_run_log(dir / (std::string(name) + "_B12_s8.jsonl"));
      CHECK(log.header.method == name);
      CHECK(log.records.size() == ep.records.size());
      CHECK(log.reported_success_rate == doctest::Approx(ep.success_rate).epsilon(1e-12));
      CHECK(replay_success_rate(log) == doctest::Approx(ep.success_rate).epsilon(1e-12));
      for (std::size_t i = 0; i < ep.records.size(); ++i)
        CHECK(record_to_json(log.records[i], false) == record_to_json(ep.records[i], false));
    }
    const SuiteResult suite = suite_from_logs(dir, {"rs", "em-ptdm"});
    REQUIRE(suite.cells.size() == 2);
    CHECK(suite.cells[0].method == "rs");
    CHECK(suite.cells[1].curves.size() == 1);
    fs::remove_all(dir);
  }

  TEST_CASE("score dumps list every candidate") {
    CandidateScores raw;
    raw.expl = raw.likeli = raw.reward_sum = raw.exploit = Eigen::Vector3d(1, 2, 3);
    ScoreBreakdown s;
    s.raw = raw;
    s.combined = Eigen::Vector3d(0, 0.5, 1);
    std::ostringstream out;
    append_score_dump(out, 4, s);
    const std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.find("\"t\":4") != std::string::npos);
  }
}
