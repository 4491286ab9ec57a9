// atd: generate tasks, pretrain priors, run method suites, and summarise logs.

#include <atd/checkpoint.hpp>
#include <atd/datagen.hpp>
#include <atd/harness.hpp>
#include <atd/io.hpp>
#include <atd/posterior.hpp>
#include <atd/report.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_root() {
  const char* env = std::getenv("ATD_OUTPUT_ROOT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("atd_out");
}

/// --config plus one --<dotted.key> flag per config leaf.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> fields;  // key, default text
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;
  bool print = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_flag("--print-config", print, "print the effective config as JSON and exit");
    fields = atd::config_fields(atd::ExperimentConfig{});
    for (const auto& [key, value] : fields)
      options[key] = app.add_option("--" + key, overrides[key], "config field (default " + value + ")");
  }

  atd::ExperimentConfig build() const {
    atd::ExperimentConfig cfg = config_path.empty() ? atd::ExperimentConfig{} : atd::load_config(config_path);
    for (const auto& [key, value] : fields) {
      (void)value;
      if (options.at(key)->count() > 0) atd::set_config_field(cfg, key, overrides.at(key));
    }
    cfg.validate();
    return cfg;
  }
};

std::string run_stem(const std::string& method, int budget, std::uint64_t seed) {
  return method + "_B" + std::to_string(budget) + "_s" + std::to_string(seed);
}

int cmd_generate(const atd::ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  int written = 0;
  for (int budget : cfg.budgets)
    for (std::uint64_t seed : cfg.seeds) {
      const atd::SearchTask task = atd::make_config_task(cfg, seed, budget);
      const fs::path path = out / ("task_B" + std::to_string(budget) + "_s" + std::to_string(seed) + ".json");
      atd::save_task(path, task);
      std::cout << path.string() << "  targets=" << task.total_target_pixels()
                << " discoverable=" << task.discoverable() << '\n';
      ++written;
    }
  std::cerr << "wrote " << written << " task files to " << out.string() << '\n';
  return 0;
}

struct PretrainArgs {
  std::string corpus = "digits-like";
  int count = 2000;
  int epochs = 40;
  double lr = 2e-3;
  int batch = 64;
  double snr_cap = 5.0;
  int hidden = 64;
  int time_dim = 32;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_pretrain(const atd::ExperimentConfig& cfg, const PretrainArgs& a) {
  const fs::path out = a.out.empty() ? output_root() / "prior.ckpt" : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  atd::CorpusOptions co;
  co.height = cfg.task.height;
  co.width = cfg.task.width;
  const auto kind = atd::parse_corpus_kind(a.corpus);
  const atd::TrainBuffer corpus = atd::gen_prior_corpus(kind, a.count, a.seed, co);
  atd::TrainOptions opt{a.epochs, a.lr, a.batch, atd::derive_seed(a.seed, 2), a.snr_cap};
  const auto start = std::chrono::steady_clock::now();
  const atd::TrainResult r = atd::pretrain_denoiser(corpus, cfg.schedule.build(), opt, {a.hidden, a.time_dim});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  atd::save_checkpoint(out, r.model.to_checkpoint());
  std::ofstream loss(out.string() + ".loss.csv");
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) loss << e << ',' << r.epoch_loss[e] << '\n';
  std::cerr << "pretrained on " << a.count << " " << a.corpus << " images in " << secs << " s, loss "
            << (r.epoch_loss.empty() ? 0.0 : r.epoch_loss.front()) << " -> "
            << (r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back()) << '\n';
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_run(const atd::ExperimentConfig& cfg, const fs::path& run_dir) {
  const fs::path logs = run_dir / "logs";
  fs::create_directories(logs);
  atd::save_config(run_dir / "config.json", cfg);
  const atd::ScoreModel prior = atd::build_prior(cfg);

  json manifest{{"schema", "atd.manifest/1"}, {"config", "config.json"}, {"runs", json::array()}};
  atd::SuiteResult suite;
  for (const auto& name : cfg.methods) {
    const atd::Method method = atd::parse_method(name);
    for (int budget : cfg.budgets) {
      atd::SuiteCell cell;
      cell.method = name;
      cell.budget = budget;
      for (std::uint64_t seed : cfg.seeds) {
        const std::string stem = run_stem(name, budget, seed);
        json entry{{"method", name}, {"budget", budget}, {"seed", seed}, {"log", "logs/" + stem + ".jsonl"}};
        try {
          const atd::SearchTask task = atd::make_config_task(cfg, seed, budget);
          atd::RunLogWriter writer(logs / (stem + ".jsonl"),
                                   {name, budget, seed, task.grid.candidates(), task.discoverable()});
          std::ofstream scores;
          if (cfg.dump_scores) {
            fs::create_directories(run_dir / "scores");
            scores.open(run_dir / "scores" / (stem + ".jsonl"));
          }
          atd::EpisodeSinks sinks;
          sinks.on_record = [&](const atd::RunRecord& r) { writer.write(r); };
          if (cfg.dump_scores)
            sinks.on_scores = [&](int t, const atd::ScoreBreakdown& s) { atd::append_score_dump(scores, t, s); };
          if (cfg.dump_ensembles) {
            fs::create_directories(run_dir / "ensembles" / stem);
            sinks.on_ensemble = [&](int t, const atd::PosteriorEnsemble& e) {
              atd::save_ensemble(run_dir / "ensembles" / stem / ("t" + std::to_string(t) + ".bin"), e, task.grid);
            };
          }
          const auto start = std::chrono::steady_clock::now();
          const atd::EpisodeResult ep = atd::run_episode(cfg, method, prior, task, seed, sinks);
          const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          writer.finish(ep.success_rate);
          entry["success_rate"] = ep.success_rate;
          entry["status"] = ep.aborted ? "aborted" : "ok";
          std::cerr << stem << "  SR " << ep.success_rate << "  (" << secs << " s)"
                    << (ep.aborted ? "  ABORTED: " + ep.records.back().error : "") << '\n';
          if (ep.aborted) {
            cell.complete = false;
            cell.errors.push_back(ep.records.back().error);
          } else {
            cell.seeds.push_back(seed);
            cell.success.push_back(ep.success_rate);
            std::vector<double> curve;
            for (const auto& r : ep.records) curve.push_back(r.cumulative);
            cell.curves.push_back(std::move(curve));
          }
        } catch (const std::exception& e) {
          entry["status"] = "failed";
          entry["error"] = e.what();
          cell.complete = false;
          cell.errors.push_back(e.what());
          std::cerr << stem << "  FAILED: " << e.what() << '\n';
        }
        manifest["runs"].push_back(entry);
      }
      suite.cells.push_back(std::move(cell));
    }
  }
  std::ofstream(run_dir / "manifest.json") << manifest.dump(2) << '\n';
  const std::string table = atd::format_suite_table(suite);
  std::ofstream(run_dir / "report.md") << table;
  std::cout << table;
  return 0;
}

int cmd_report(const fs::path& logs, const std::vector<std::string>& order, const std::string& out) {
  const atd::SuiteResult suite = atd::suite_from_logs(logs, order);
  const std::string table = atd::format_suite_table(suite);
  std::cout << table;
  if (!out.empty()) std::ofstream(out) << table;
  return 0;
}

int cmd_plot(const fs::path& logs, const std::vector<std::string>& order, const fs::path& out) {
  atd::emit_plots(atd::suite_from_logs(logs, order), out);
  std::cerr << "wrote curves.csv, sr_by_budget.csv and SVG charts to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active target discovery experiments"};
  app.require_subcommand(1);
  std::string name = "run";

  auto* gen = app.add_subcommand("generate", "Write task files for every configured budget and seed");
  ConfigOptions gen_cfg;
  gen_cfg.attach(*gen);
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory (default $ATD_OUTPUT_ROOT/tasks)");

  auto* pre = app.add_subcommand("pretrain", "Pretrain the tiny denoiser prior on a synthetic corpus");
  ConfigOptions pre_cfg;
  pre_cfg.attach(*pre);
  PretrainArgs pa;
  pre->add_option("--corpus", pa.corpus, "gmm-draws | balls | digits-like")->capture_default_str();
  pre->add_option("--count", pa.count, "corpus size")->capture_default_str();
  pre->add_option("--epochs", pa.epochs)->capture_default_str();
  pre->add_option("--lr", pa.lr)->capture_default_str();
  pre->add_option("--batch", pa.batch)->capture_default_str();
  pre->add_option("--snr-cap", pa.snr_cap, "loss weight cap; 0 for the plain objective")->capture_default_str();
  pre->add_option("--hidden", pa.hidden)->capture_default_str();
  pre->add_option("--time-dim", pa.time_dim)->capture_default_str();
  pre->add_option("--seed", pa.seed)->capture_default_str();
  pre->add_option("--out", pa.out, "checkpoint path (default $ATD_OUTPUT_ROOT/prior.ckpt)");

  auto* run = app.add_subcommand("run", "Run methods x budgets x seeds and write JSONL logs");
  ConfigOptions run_cfg;
  run_cfg.attach(*run);
  run->add_option("--name", name, "run directory under $ATD_OUTPUT_ROOT")->capture_default_str();

  std::string logs_dir, out_path;
  std::vector<std::string> order{"em-ptdm", "diffatd-static", "ga", "rs"};
  auto* rep = app.add_subcommand("report", "Summarise run logs as a mean ± sd table");
  rep->add_option("--name", name, "run directory under $ATD_OUTPUT_ROOT")->capture_default_str();
  rep->add_option("--logs", logs_dir, "log directory (overrides --name)");
  rep->add_option("--order", order, "method order")->delimiter(',');
  rep->add_option("--out", out_path, "also write the table here");

  auto* plot = app.add_subcommand("plot", "Write discovery curves and SR-by-budget charts from run logs");
  plot->add_option("--name", name, "run directory under $ATD_OUTPUT_ROOT")->capture_default_str();
  plot->add_option("--logs", logs_dir, "log directory (overrides --name)");
  plot->add_option("--order", order, "method order")->delimiter(',');
  plot->add_option("--out", out_path, "chart directory (default <run>/plots)");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path run_dir = output_root() / name;
    const fs::path logs = logs_dir.empty() ? run_dir / "logs" : fs::path(logs_dir);
    for (const ConfigOptions* c : {&gen_cfg, &pre_cfg, &run_cfg})
      if (c->print) {
        std::cout << atd::config_to_string(c->build());
        return 0;
      }
    if (gen->parsed()) return cmd_generate(gen_cfg.build(), gen_out.empty() ? output_root() / "tasks" : fs::path(gen_out));
    if (pre->parsed()) return cmd_pretrain(pre_cfg.build(), pa);
    if (run->parsed()) return cmd_run(run_cfg.build(), run_dir);
    if (rep->parsed()) return cmd_report(logs, order, out_path);
    if (plot->parsed()) return cmd_plot(logs, order, out_path.empty() ? run_dir / "plots" : fs::path(out_path));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
