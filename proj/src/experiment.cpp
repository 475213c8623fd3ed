#include "lgc/experiment.hpp"

#include "lgc/errors.hpp"
#include "lgc/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace lgc {

namespace fs = std::filesystem;
using nlohmann::json;

const ArmStats& ComparisonReport::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.arm == name) return a;
  throw ConfigError("report has no arm '" + name + "'");
}

const std::vector<std::string>& report_metrics() {
  static const std::vector<std::string> m{"mae_theta",      "max_ae_theta",    "test_mse_y",
                                          "test_mae_y",     "test_mae_y_mean", "test_dist_loss",
                                          "val_dist_loss",  "val_mse_y",       "threshold_epoch",
                                          "seconds"};
  return m;
}

double metric_value(const RunSummary& s, const std::string& metric) {
  if (metric == "mae_theta") return s.mae_theta;
  if (metric == "max_ae_theta") return s.max_ae_theta;
  if (metric == "test_mse_y") return s.test_mse_y;
  if (metric == "test_mae_y") return s.test_mae_y;
  if (metric == "test_mae_y_mean") return s.test_mae_y_mean;
  if (metric == "test_dist_loss") return s.test_dist_loss;
  if (metric == "val_dist_loss") return s.val_dist_loss;
  if (metric == "val_mse_y") return s.val_mse_y;
  if (metric == "threshold_epoch") return s.threshold_epoch;
  if (metric == "seconds") return s.seconds;
  throw ConfigError("unknown report metric '" + metric + "'");
}

std::size_t thread_count(std::size_t requested) {
  std::size_t n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LGC_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

Dataset prepare_dataset(const DatasetSpec& spec, const std::optional<fs::path>& data_dir) {
  if (data_dir) {
    Dataset d = load_dataset(*data_dir);
    const auto& p = d.manifest.ground_truth;
    if (p.n_communities != spec.params.n_communities || p.community_size != spec.params.community_size ||
        p.theta_on != spec.params.theta_on || p.sigma_x != spec.params.sigma_x)
      throw ConfigMismatch("dataset in " + data_dir->string() + " was built with different parameters");
    return d;
  }
  return generate(build_ground_truth(spec.params), spec.n_pairs, spec.seed);
}

RunInit make_run_init(const ArmSpec& arm, std::uint64_t seed, const GroundTruth& gt) {
  RunInit init;
  init.n_nodes = gt.node_count();
  init.hops = gt.model_star.hops();
  init.d_in = gt.model_star.d_in();
  init.d_out = gt.model_star.d_out();
  switch (arm.model) {
    case ModelSource::joint: break;
    case ModelSource::true_psi: init.model = gt.model_star; break;
    case ModelSource::perturbed: {
      Rng rng = make_rng(seed, 3);
      init.model = perturb(gt.model_star, arm.perturbation, rng);
      break;
    }
  }
  init.frozen_edges = arm.frozen_edges;
  return init;
}

namespace {

json run_identity(const ArmSpec& arm, std::uint64_t seed, const Dataset& data) {
  json j = to_json(arm);
  j["seed"] = seed;
  j["dataset"] = {{"seed", data.manifest.seed}, {"n_pairs", data.manifest.n_pairs}};
  return j;
}

std::optional<RunSummary> reusable(const fs::path& dir, const json& identity) {
  std::ifstream in(dir / "run.json");
  if (!in || !fs::exists(dir / "summary.json")) return std::nullopt;
  try {
    if (json::parse(in) != identity) return std::nullopt;
    RunSummary s = read_run_summary(dir);
    if (s.status != "ok") return std::nullopt;
    return s;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

ArmSpec with_seed(ArmSpec arm, std::uint64_t seed) {
  arm.train.seed = seed;
  return arm;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct Job {
  ArmSpec arm;
  std::uint64_t seed;
  fs::path dir;
};

// Runs jobs on a fixed pool; each job owns its output directory.
std::vector<RunSummary> run_jobs(const std::vector<Job>& jobs, const Dataset& data,
                                 const ExperimentOptions& opts) {
  std::vector<RunSummary> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!opts.log) return;
    std::lock_guard lock(log_mutex);
    opts.log(msg);
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const ArmSpec arm = with_seed(job.arm, job.seed);
      const json identity = run_identity(arm, job.seed, data);
      if (opts.resume) {
        if (auto s = reusable(job.dir, identity)) {
          out[i] = *s;
          log("reused " + job.dir.string());
          continue;
        }
      }
      try {
        out[i] = run_single(arm, job.seed, data, job.dir).summary;
        write_file_atomic(job.dir / "run.json", identity.dump(2) + "\n");
        log("done " + job.arm.name + " seed " + std::to_string(job.seed) + ": mae_theta " +
            format_number(out[i].mae_theta) + " (" + format_number(out[i].seconds) + " s)");
      } catch (const std::exception& e) {
        out[i].status = std::string("failed: ") + e.what();
        try {
          RunRecord rec;
          rec.summary = out[i];
          write_run_record(rec, job.dir);
        } catch (const std::exception&) {
        }
        log("FAILED " + job.arm.name + " seed " + std::to_string(job.seed) + ": " + e.what());
      }
    }
  };
  const std::size_t n = std::min(thread_count(opts.threads), std::max<std::size_t>(1, jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  return out;
}

std::string grid_label(const std::string& prior, double sigma) {
  std::string label = prior + "_s" + format_number(sigma);
  std::replace(label.begin(), label.end(), ':', '-');
  return label;
}

}  // namespace

RunRecord run_single(const ArmSpec& arm, std::uint64_t seed, const Dataset& data,
                     const fs::path& dir) {
  ArmSpec a = with_seed(arm, seed);
  const LossConfig loss = resolved_loss(a, data.ground_truth);
  TrainerState state = init_run(a.train, make_run_init(a, seed, data.ground_truth));
  RunRecord rec = train(state, data, loss);
  fs::create_directories(dir);
  write_run_record(rec, dir);
  save_checkpoint(state, dir);
  return rec;
}

ComparisonReport run_experiment(const ExperimentSpec& spec, const ExperimentOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("experiment needs an output directory");
  fs::create_directories(opts.out_dir);
  write_file_atomic(opts.out_dir / "experiment.json", to_json(spec).dump(2) + "\n");
  const Dataset data = prepare_dataset(spec.dataset, opts.data_dir);

  // ELBO grids are searched on the first seed before the main runs.
  std::vector<ArmSpec> arms = spec.arms;
  std::map<std::string, json> notes;
  {
    std::vector<Job> grid_jobs;
    std::vector<std::pair<std::size_t, std::pair<std::string, double>>> owners;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      if (!arms[a].elbo_grid) continue;
      for (const auto& prior : arms[a].elbo_grid->priors)
        for (double sigma : arms[a].elbo_grid->sigmas) {
          ArmSpec g = arms[a];
          g.elbo_grid.reset();
          g.elbo_prior = prior;
          g.loss.elbo_sigma = sigma;
          grid_jobs.push_back({g, spec.seeds.front(),
                               opts.out_dir / arms[a].name / "grid" / grid_label(prior, sigma)});
          owners.push_back({a, {prior, sigma}});
        }
    }
    const auto grid = run_jobs(grid_jobs, data, opts);
    std::map<std::size_t, std::pair<double, std::size_t>> best;  // arm -> (val_mse, job)
    std::map<std::size_t, json> tried;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const std::size_t a = owners[i].first;
      tried[a].push_back({{"prior", owners[i].second.first},
                          {"elbo_sigma", owners[i].second.second},
                          {"status", grid[i].status},
                          {"val_mse_y", grid[i].val_mse_y}});
      if (grid[i].status != "ok" || !std::isfinite(grid[i].val_mse_y)) continue;
      auto it = best.find(a);
      if (it == best.end() || grid[i].val_mse_y < it->second.first) best[a] = {grid[i].val_mse_y, i};
    }
    for (const auto& [a, entry] : tried) {
      if (!best.count(a))
        throw NumericalDivergence("every ELBO grid run of arm '" + arms[a].name + "' failed");
      const auto& [prior, sigma] = owners[best[a].second].second;
      arms[a].elbo_prior = prior;
      arms[a].loss.elbo_sigma = sigma;
      arms[a].elbo_grid.reset();
      json note{{"selected", {{"prior", prior}, {"elbo_sigma", sigma}}},
                {"selection_seed", spec.seeds.front()},
                {"criterion", "val_mse_y"},
                {"grid", entry}};
      write_file_atomic(opts.out_dir / arms[a].name / "grid.json", note.dump(2) + "\n");
      notes[arms[a].name] = note;
    }
  }

  std::vector<Job> jobs;
  for (const auto& arm : arms)
    for (std::uint64_t seed : spec.seeds)
      jobs.push_back({arm, seed, opts.out_dir / arm.name / ("seed_" + std::to_string(seed))});
  const auto summaries = run_jobs(jobs, data, opts);

  std::vector<RunOutcome> runs;
  for (std::size_t i = 0; i < jobs.size(); ++i)
    runs.push_back({jobs[i].arm.name, jobs[i].seed, summaries[i]});
  std::vector<std::string> order;
  for (const auto& a : arms) order.push_back(a.name);
  ComparisonReport report = build_report(spec.name, order, std::move(runs));
  report.notes = std::move(notes);
  write_report(report, opts.out_dir);
  return report;
}

ComparisonReport build_report(const std::string& name, const std::vector<std::string>& arm_order,
                              std::vector<RunOutcome> runs) {
  ComparisonReport r;
  r.name = name;
  r.metrics = report_metrics();
  r.runs = std::move(runs);

  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const auto& run : r.runs) {
    if (run.summary.status != "ok") continue;
    for (const auto& m : r.metrics) {
      const double v = metric_value(run.summary, m);
      // an unreached threshold has no epoch
      if (m == "threshold_epoch" && v < 0.0) continue;
      values[run.arm][m].push_back(v);
    }
  }
  for (const auto& arm : arm_order) {
    ArmStats s;
    s.arm = arm;
    for (const auto& run : r.runs)
      if (run.arm == arm && run.summary.status == "ok") ++s.runs_ok;
    for (const auto& m : r.metrics) {
      const auto& v = values[arm][m];
      if (v.empty()) continue;
      s.mean[m] = mean(v);
      s.stddev[m] = stddev(v);
    }
    r.arms.push_back(std::move(s));
  }
  for (const auto& m : r.metrics) {
    const ArmStats* best = nullptr;
    for (const auto& a : r.arms)
      if (a.mean.count(m) && (!best || a.mean.at(m) < best->mean.at(m))) best = &a;
    if (!best) continue;
    r.best[m] = best->arm;
    for (auto& a : r.arms) {
      if (&a == best || !a.mean.count(m)) continue;
      const auto& va = values[a.arm][m];
      const auto& vb = values[best->arm][m];
      if (va.size() >= 2 && vb.size() >= 2) a.p_vs_best[m] = welch_t_test(va, vb).p_value;
    }
  }
  return r;
}

ComparisonReport regenerate_report(const fs::path& out_dir) {
  const ExperimentSpec spec = parse_experiment(read_config(out_dir / "experiment.json"));
  std::vector<RunOutcome> runs;
  std::vector<std::string> order;
  std::map<std::string, json> notes;
  for (const auto& arm : spec.arms) {
    order.push_back(arm.name);
    for (std::uint64_t seed : spec.seeds)
      runs.push_back({arm.name, seed,
                      read_run_summary(out_dir / arm.name / ("seed_" + std::to_string(seed)))});
    std::ifstream in(out_dir / arm.name / "grid.json");
    if (in) notes[arm.name] = json::parse(in);
  }
  ComparisonReport r = build_report(spec.name, order, std::move(runs));
  r.notes = std::move(notes);
  return r;
}

json report_json(const ComparisonReport& r) {
  json arms = json::array();
  for (const auto& a : r.arms) {
    json metrics = json::object();
    for (const auto& [m, v] : a.mean) {
      json entry{{"mean", v}, {"std", a.stddev.at(m)}};
      if (a.p_vs_best.count(m)) entry["welch_p_vs_best"] = a.p_vs_best.at(m);
      metrics[m] = entry;
    }
    json arm{{"arm", a.arm}, {"runs_ok", a.runs_ok}, {"metrics", metrics}};
    if (r.notes.count(a.arm)) arm["notes"] = r.notes.at(a.arm);
    arms.push_back(arm);
  }
  json failed = json::array();
  for (const auto& run : r.runs)
    if (run.summary.status != "ok")
      failed.push_back({{"arm", run.arm}, {"seed", run.seed}, {"status", run.summary.status}});
  return {{"experiment", r.name}, {"best", r.best}, {"arms", arms}, {"failed_runs", failed}};
}

std::string report_csv(const ComparisonReport& r) {
  std::ostringstream csv;
  csv.precision(10);
  csv << "arm,seed,metric,value\n";
  for (const auto& run : r.runs) {
    if (run.summary.status != "ok") continue;
    for (const auto& m : r.metrics)
      csv << run.arm << ',' << run.seed << ',' << m << ',' << metric_value(run.summary, m) << '\n';
  }
  return csv.str();
}

void write_report(const ComparisonReport& r, const fs::path& out_dir) {
  write_file_atomic(out_dir / "report.csv", report_csv(r));
  write_file_atomic(out_dir / "report.json", report_json(r).dump(2) + "\n");
}

}  // namespace lgc
