#include "atd/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "atd/io.hpp"

namespace atd {

namespace {

enum Stream : std::uint64_t {
  kTask = 1,
  kEnsemble,
  kRewardInit,
  kRewardUpdate,
  kHInit,
  kHTrain,
  kBuffer,
  kRandom,
  kSequence,
  kPermanent,
  kFinalBuffer,
};

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::EmPtdm: return "em-ptdm";
    case Method::Random: return "rs";
    case Method::GreedyAdaptive: return "ga";
    case Method::DiffatdStatic: return "diffatd-static";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "em-ptdm") return Method::EmPtdm;
  if (s == "rs") return Method::Random;
  if (s == "ga") return Method::GreedyAdaptive;
  if (s == "diffatd-static") return Method::DiffatdStatic;
  throw InvalidArgument("unknown method '" + s + "'");
}

std::vector<int> SchedulerConfig::steps(int budget) const {
  if (mode == "none") return {};
  if (mode == "uniform") return uniform_updates(budget, every);
  if (mode == "adaptive") return schedule_updates(budget, updates, gamma);
  throw InvalidArgument("unknown scheduler mode '" + mode + "'");
}

void ExperimentConfig::validate() const {
  require(!methods.empty() && !budgets.empty() && !seeds.empty(), "config needs methods, budgets and seeds");
  for (const auto& m : methods) parse_method(m);
  for (int b : budgets) require(b >= 1, "budgets must be positive");
  policy.validate();
  require(buffer_samples >= 0, "buffer_samples must be non-negative");
  require(scheduler.mode == "adaptive" || scheduler.mode == "uniform" || scheduler.mode == "none",
          "unknown scheduler mode '" + scheduler.mode + "'");
  require(ga_posterior == "prior" || ga_posterior == "em", "ga_posterior must be 'prior' or 'em'");
  require(prior.backend == "analytic-gmm" || prior.backend == "tiny-denoiser",
          "unknown prior backend '" + prior.backend + "'");
  require(prior.backend != "tiny-denoiser" || !prior.checkpoint.empty(),
          "tiny-denoiser prior needs a checkpoint path");
  require(tasks_per_sequence >= 1, "tasks_per_sequence must be at least 1");
}

ScoreModel build_prior(const ExperimentConfig& cfg) {
  const NoiseSchedule schedule = cfg.schedule.build();
  if (cfg.prior.backend == "tiny-denoiser")
    return ScoreModel::from_checkpoint(load_checkpoint(cfg.prior.checkpoint), schedule);
  require(cfg.prior.backend == "analytic-gmm", "unknown prior backend '" + cfg.prior.backend + "'");
  return ScoreModel::analytic(balls_mixture(cfg.prior.mixture_components, cfg.prior.mixture_variance,
                                            cfg.prior.mixture_seed, cfg.task.height, cfg.task.width),
                              schedule);
}

SearchTask make_config_task(const ExperimentConfig& cfg, std::uint64_t seed, int budget) {
  const TaskSourceConfig& src = cfg.task;
  if (src.kind == "balls") {
    BallsOptions opt;
    opt.height = src.height;
    opt.width = src.width;
    opt.patch = src.patch;
    opt.count = src.ball_count;
    opt.radius = src.ball_radius;
    opt.budget = budget;
    opt.seed = derive_seed(seed, kTask);
    return gen_balls_task(opt);
  }
  if (src.kind == "file") {
    const SearchTask t = load_task(src.path);
    return make_task(t.content, t.target_mask, t.grid, budget);
  }
  if (src.kind == "species")
    return species_to_task(ingest_species_csv(src.path, src.region), src.species_threshold, budget, src.patch);
  throw InvalidArgument("unknown task source '" + src.kind + "'");
}

namespace {

bool trains_h(const ExperimentConfig& cfg, Method m) {
  return m == Method::EmPtdm || (m == Method::GreedyAdaptive && cfg.ga_posterior == "em");
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

EpisodeResult run_episode(const ExperimentConfig& cfg, Method method, const ScoreModel& prior, const SearchTask& task,
                          std::uint64_t seed, const EpisodeSinks& sinks) {
  cfg.policy.validate();
  const GridShape& grid = task.grid;
  grid.validate();
  const int budget = task.budget;
  const bool learn_h = trains_h(cfg, method);
  if (method != Method::Random)
    require(prior.pixels() == grid.pixels(), "prior grid size does not match the task");

  EpisodeResult res;
  ObservationSet obs(grid);
  SupervisedStore store(grid.patch_area());
  RewardModel reward = RewardModel::create(grid.patch_h, grid.patch_w, derive_seed(seed, kRewardInit));
  HModel h = learn_h ? HModel::zero_output(grid, prior.schedule(), derive_seed(seed, kHInit), cfg.h_model)
                     : HModel::all_zero(grid, prior.schedule(), cfg.h_model);
  const std::vector<int> updates = learn_h ? cfg.scheduler.steps(budget) : std::vector<int>{};
  std::size_t next_update = 0;
  Rng random_rng(derive_seed(seed, kRandom));
  std::vector<double> outcomes;
  double total = 0.0;

  for (int t = 0; t < budget; ++t) {
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.t = t;
    rec.cumulative = total;
    try {
      int q = -1;
      if (method == Method::Random) {
        q = baseline_random(obs.visited(), random_rng);
      } else {
        PosteriorEnsemble ens = sample_posterior(prior, h, obs, cfg.policy.P, derive_seed(seed, kEnsemble, t), t);
        if (sinks.on_ensemble) sinks.on_ensemble(t, ens);
        CandidateScores raw = score_candidates(ens, grid, reward, cfg.policy.sigma_x);
        ScoreBreakdown scores;
        if (method == Method::GreedyAdaptive) {
          scores.alpha = 0.0;
          scores.combined = raw.exploit;
          scores.raw = std::move(raw);
        } else {
          scores = combined_score(std::move(raw), t, budget, cfg.policy, obs.visited());
        }
        if (sinks.on_scores) sinks.on_scores(t, scores);
        q = select_query(scores, obs.visited());
        rec.alpha = scores.alpha;
        rec.scores = ChosenScores{scores.raw.expl(q), scores.raw.likeli(q), scores.raw.reward_sum(q),
                                  scores.raw.exploit(q), scores.combined(q)};
        res.final_ensemble = std::move(ens);
      }
      auto [fb, next] = query(task, obs, q);
      obs = std::move(next);
      total += fb.outcome;
      outcomes.push_back(fb.outcome);
      rec.query = q;
      rec.outcome = fb.outcome;
      rec.cumulative = total;

      if (method != Method::Random) {
        store.add(fb.patch_values, fb.outcome);
        RewardOptions ro = cfg.reward;
        ro.seed = derive_seed(seed, kRewardUpdate, t);
        reward = reward_update(reward, store, ro).model;
        rec.reward_update = true;
      }

      if (next_update < updates.size() && updates[next_update] == t) {
        const auto u = static_cast<std::uint64_t>(next_update);
        const PosteriorEnsemble fresh =
            sample_posterior(prior, h, obs, cfg.buffer_size(), derive_seed(seed, kBuffer, u), t);
        res.update_l2.push_back(ensemble_mean_l2(fresh, task.content));
        res.update_observed_error.push_back(observed_pixel_error(fresh, obs));
        TrainBuffer buffer(static_cast<std::size_t>(fresh.size()));
        buffer.add_batch(impose_observations(fresh.samples, obs));
        HTrainOptions ho = cfg.h_train;
        ho.seed = derive_seed(seed, kHTrain, u);
        h = train_h(h, prior, buffer, obs, ho).model;
        rec.h_update = true;
        ++next_update;
      }
    } catch (const std::exception& e) {
      rec.status = "aborted";
      rec.error = e.what();
      rec.wall_ms = elapsed_ms(start);
      res.records.push_back(rec);
      if (sinks.on_record) sinks.on_record(rec);
      res.aborted = true;
      break;
    }
    rec.wall_ms = elapsed_ms(start);
    res.records.push_back(rec);
    if (sinks.on_record) sinks.on_record(rec);
  }

  const std::vector<std::vector<double>> runs{outcomes};
  const std::vector<SearchTask> tasks{task};
  res.success_rate = success_rate(runs, tasks);
  res.h = std::move(h);
  res.observations = std::move(obs);
  return res;
}

double SuiteCell::mean() const {
  if (success.empty()) return 0.0;
  double s = 0.0;
  for (double v : success) s += v;
  return s / static_cast<double>(success.size());
}

double SuiteCell::sd() const {
  if (success.size() < 2) return 0.0;
  const double m = mean();
  double s = 0.0;
  for (double v : success) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(success.size() - 1));
}

std::string format_mean_sd(double mean, double sd, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << mean << " ± " << sd;
  return os.str();
}

SuiteResult run_suite(const ExperimentConfig& cfg, const ScoreModel& prior,
                      const std::function<void(const std::string&, int, std::uint64_t, const EpisodeResult&)>&
                          on_episode) {
  cfg.validate();
  SuiteResult out;
  for (const auto& name : cfg.methods) {
    const Method method = parse_method(name);
    for (int budget : cfg.budgets) {
      SuiteCell cell;
      cell.method = name;
      cell.budget = budget;
      for (std::uint64_t seed : cfg.seeds) {
        try {
          const SearchTask task = make_config_task(cfg, seed, budget);
          EpisodeResult ep = run_episode(cfg, method, prior, task, seed);
          if (ep.aborted) {
            cell.complete = false;
            cell.errors.push_back("seed " + std::to_string(seed) + ": " + ep.records.back().error);
          } else {
            cell.seeds.push_back(seed);
            cell.success.push_back(ep.success_rate);
            std::vector<double> curve;
            for (const auto& r : ep.records) curve.push_back(r.cumulative);
            cell.curves.push_back(std::move(curve));
          }
          if (on_episode) on_episode(name, budget, seed, ep);
        } catch (const std::exception& e) {
          cell.complete = false;
          cell.errors.push_back("seed " + std::to_string(seed) + ": " + e.what());
        }
      }
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

TrainBuffer final_posterior_buffer(const ExperimentConfig& cfg, const ScoreModel& prior, const EpisodeResult& ep,
                                   std::uint64_t seed) {
  const PosteriorEnsemble ens =
      sample_posterior(prior, ep.h, ep.observations, cfg.buffer_size(), derive_seed(seed, kFinalBuffer));
  TrainBuffer buffer(static_cast<std::size_t>(ens.size()));
  buffer.add_batch(impose_observations(ens.samples, ep.observations));
  return buffer;
}

SequenceResult cross_task_loop(const ExperimentConfig& cfg, Method method, const ScoreModel& prior,
                               const std::vector<SearchTask>& tasks, std::uint64_t seed) {
  require(!tasks.empty(), "cross_task_loop: no tasks");
  if (cfg.permanent_update) require(prior.trainable(), "permanent-memory updates need a trainable prior");
  SequenceResult out;
  ScoreModel current = prior;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::uint64_t task_seed = derive_seed(seed, kSequence, i);
    out.prior_checksums.push_back(current.checksum());
    out.episodes.push_back(run_episode(cfg, method, current, tasks[i], task_seed));
    if (cfg.permanent_update) {
      const TrainBuffer buffer = final_posterior_buffer(cfg, current, out.episodes.back(), task_seed);
      TrainOptions opt = cfg.permanent_train;
      opt.seed = derive_seed(task_seed, kPermanent);
      current = update_permanent(current, buffer, opt).model;
    }
  }
  return out;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::vector<double> mean_curve(const SuiteCell& cell) {
  std::size_t len = 0;
  for (const auto& c : cell.curves) len = std::max(len, c.size());
  std::vector<double> m(len, 0.0);
  std::vector<int> n(len, 0);
  for (const auto& c : cell.curves)
    for (std::size_t t = 0; t < c.size(); ++t) {
      m[t] += c[t];
      ++n[t];
    }
  for (std::size_t t = 0; t < len; ++t) m[t] /= std::max(1, n[t]);
  return m;
}

void write_svg(const std::filesystem::path& path, int budget, const std::vector<const SuiteCell*>& cells) {
  const double w = 640, h = 400, left = 60, right = 160, top = 30, bottom = 50;
  double ymax = 1e-9;
  std::vector<std::vector<double>> curves;
  for (const auto* c : cells) {
    curves.push_back(mean_curve(*c));
    for (double v : curves.back()) ymax = std::max(ymax, v);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">Cumulative discovery, B = " << budget << "</text>\n";
  const double pw = w - left - right, ph = h - top - bottom;
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 15 << "\" font-size=\"12\">step</text>\n";
  out << "<text x=\"10\" y=\"" << top + 10 << "\" font-size=\"12\">R</text>\n";
  out << "<text x=\"" << left - 5 << "\" y=\"" << top + 4 << "\" font-size=\"10\" text-anchor=\"end\">"
      << std::setprecision(3) << ymax << "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < curves[i].size(); ++t)
      out << left + pw * static_cast<double>(t + 1) / budget << ',' << top + ph * (1.0 - curves[i][t] / ymax) << ' ';
    out << "\"/>\n";
    const double ly = top + 15 + 18 * static_cast<double>(i);
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << cells[i]->method
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace

void emit_plots(const SuiteResult& results, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream curves(out_dir / "curves.csv");
  std::ofstream table(out_dir / "sr_by_budget.csv");
  if (!curves || !table) throw Error("cannot write plots into " + out_dir.string());
  curves << "method,budget,seed,t,cumulative\n";
  table << "method,budget,runs,mean,sd,formatted,complete\n";
  std::map<int, std::vector<const SuiteCell*>> by_budget;
  curves << std::setprecision(17);
  for (const auto& cell : results.cells) {
    for (std::size_t s = 0; s < cell.curves.size(); ++s)
      for (std::size_t t = 0; t < cell.curves[s].size(); ++t)
        curves << cell.method << ',' << cell.budget << ',' << cell.seeds[s] << ',' << t << ',' << cell.curves[s][t]
               << '\n';
    table << cell.method << ',' << cell.budget << ',' << cell.success.size() << ',' << std::setprecision(6)
          << cell.mean() << ',' << cell.sd() << ",\"" << format_mean_sd(cell.mean(), cell.sd()) << "\","
          << (cell.complete ? "yes" : "no") << '\n';
    by_budget[cell.budget].push_back(&cell);
  }
  for (const auto& [budget, cells] : by_budget)
    write_svg(out_dir / ("curves_B" + std::to_string(budget) + ".svg"), budget, cells);
}

}  // namespace atd
