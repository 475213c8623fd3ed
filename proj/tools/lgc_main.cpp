// lgc: dataset generation, training, evaluation, experiments and oracles.
#include "lgc/config.hpp"
#include "lgc/datagen.hpp"
#include "lgc/errors.hpp"
#include "lgc/experiment.hpp"
#include "lgc/metrics.hpp"
#include "lgc/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lgc;

namespace {

json config_or_empty(const std::string& path) {
  return path.empty() ? json::object() : read_config(path);
}

Dataset dataset_for(const json& cfg, const std::string& data_dir) {
  const DatasetSpec spec = parse_dataset(cfg);
  if (!data_dir.empty()) return prepare_dataset(spec, fs::path(data_dir));
  return prepare_dataset(spec);
}

int cmd_datagen(const std::string& config, const std::string& out,
                std::optional<std::size_t> n_pairs, std::optional<std::uint64_t> seed) {
  DatasetSpec spec = parse_dataset(config_or_empty(config));
  if (n_pairs) spec.n_pairs = *n_pairs;
  if (seed) spec.seed = *seed;
  const Dataset d = generate(build_ground_truth(spec.params), spec.n_pairs, spec.seed);
  save_dataset(d, out);
  std::cout << "wrote " << d.pairs.size() << " pairs (" << d.train.size() << " train, "
            << d.validation.size() << " validation, " << d.test.size() << " test) to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data_dir, const std::string& out,
              std::optional<std::uint64_t> seed) {
  const json cfg = config_or_empty(config);
  ArmSpec arm = parse_arm(cfg);
  if (seed) arm.train.seed = *seed;
  const Dataset data = dataset_for(cfg, data_dir);
  const LossConfig loss = resolved_loss(arm, data.ground_truth);
  TrainerState state = init_run(arm.train, make_run_init(arm, arm.train.seed, data.ground_truth));
  TrainHooks hooks;
  hooks.on_eval = [](const EpochRow& r) {
    std::printf("epoch %6.2f  lr %.4f  loss %.5f  val_dist %.5f  mae_theta %.4f  max_ae %.3f  "
                "val_mse %.4f  val_mae %.4f  %.1fs\n",
                r.epoch, r.lr, r.train_loss, r.val_dist_loss, r.mae_theta, r.max_ae_theta,
                r.val_mse_y, r.val_mae_y, r.seconds);
    std::fflush(stdout);
  };
  const RunRecord rec = train(state, data, loss, hooks);
  write_run_record(rec, out);
  save_checkpoint(state, out);
  std::cout << json(rec.summary).dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config, const std::string& data_dir, const std::string& run,
                 std::size_t n_adj, std::uint64_t seed) {
  const Dataset data = dataset_for(config_or_empty(config), data_dir);
  auto read_json = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read " + p.string());
    return json::parse(in);
  };
  const auto dist = read_json(fs::path(run) / "theta.json").get<EdgeDistribution>();
  const auto model = read_json(fs::path(run) / "model.json").get<PolyGnn>();
  const auto cal = calibration_metrics(dist.theta(), data.ground_truth.dist_star.theta());
  const auto test = data.split_view(data.test);
  Rng rng = make_rng(seed, 30000);
  const double dist_loss = distributional_loss(dist, model, test, KernelSpec{}, 16, rng);
  const auto pm = point_metrics(dist, model, test, n_adj, rng);
  const json out{{"mae_theta", cal.mae},         {"max_ae_theta", cal.max_ae},
                 {"test_dist_loss", dist_loss},  {"test_mse_y", pm.mse_y},
                 {"test_mae_y", pm.mae_y},       {"test_mae_y_mean", pm.mae_y_mean}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_experiment(const std::string& config, const std::string& out, const std::string& data_dir,
                   std::size_t threads, bool no_resume, bool report_only,
                   const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& arms) {
  ComparisonReport report;
  if (report_only) {
    report = regenerate_report(out);
    write_report(report, out);
  } else {
    ExperimentSpec spec = parse_experiment(read_config(config));
    if (!seeds.empty()) spec.seeds = seeds;
    if (!arms.empty()) {
      std::erase_if(spec.arms, [&](const ArmSpec& a) {
        return std::find(arms.begin(), arms.end(), a.name) == arms.end();
      });
      if (spec.arms.empty()) throw ConfigError("--arms matched no arm of the recipe");
    }
    ExperimentOptions opts;
    opts.out_dir = out;
    if (!data_dir.empty()) opts.data_dir = fs::path(data_dir);
    opts.threads = threads;
    opts.resume = !no_resume;
    opts.log = [](const std::string& msg) { std::cerr << msg << std::endl; };
    report = run_experiment(spec, opts);
  }
  std::printf("%-16s %4s  %-17s %-17s %-17s %-17s\n", "arm", "ok", "mae_theta", "test_mse_y",
              "test_mae_y", "test_mae_y_mean");
  for (const auto& a : report.arms) {
    std::printf("%-16s %4zu ", a.arm.c_str(), a.runs_ok);
    for (const char* m : {"mae_theta", "test_mse_y", "test_mae_y", "test_mae_y_mean"}) {
      if (a.mean.count(m))
        std::printf(" %.4f +- %.4f  ", a.mean.at(m), a.stddev.at(m));
      else
        std::printf(" %-17s", "n/a");
    }
    std::printf("\n");
  }
  std::cout << "report: " << (fs::path(out) / "report.json").string() << "\n";
  return 0;
}

int cmd_oracle(const std::string& config, std::size_t n_inputs, std::size_t n_adj,
               std::uint64_t seed) {
  const DatasetSpec spec = parse_dataset(config_or_empty(config));
  const GroundTruth gt = build_ground_truth(spec.params);
  OracleOptions o;
  o.n_inputs = n_inputs;
  o.n_adj = n_adj;
  o.seed = seed;
  const json out{{"optimal_mse_y", optimal_error_oracle(gt, PointMetric::mse, o)},
                 {"optimal_mae_y", optimal_error_oracle(gt, PointMetric::mae, o)},
                 {"n_inputs", n_inputs},
                 {"n_adj", n_adj}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated latent graph learning with distributional losses"};
  app.require_subcommand(1);

  std::string config, out, data_dir, run;
  std::optional<std::size_t> n_pairs;
  std::optional<std::uint64_t> seed_opt;

  auto* datagen = app.add_subcommand("datagen", "generate and save the synthetic dataset");
  datagen->add_option("--config", config, "config file (dataset section)");
  datagen->add_option("--out", out, "output directory")->required();
  datagen->add_option("--n-pairs", n_pairs, "override dataset.n_pairs");
  datagen->add_option("--seed", seed_opt, "override dataset.seed");

  auto* train_cmd = app.add_subcommand("train", "train one run");
  train_cmd->add_option("--config", config, "config file")->required();
  train_cmd->add_option("--data", data_dir, "dataset directory (generated from config if omitted)");
  train_cmd->add_option("--out", out, "run directory")->required();
  train_cmd->add_option("--seed", seed_opt, "override train.seed");

  std::size_t eval_adj = 256;
  std::uint64_t seed = 7;
  auto* evaluate = app.add_subcommand("evaluate", "score a saved checkpoint on the test split");
  evaluate->add_option("--config", config, "config file (dataset section)");
  evaluate->add_option("--data", data_dir, "dataset directory");
  evaluate->add_option("--run", run, "run directory with theta.json and model.json")->required();
  evaluate->add_option("--n-adj", eval_adj, "adjacency samples per pair")->capture_default_str();
  evaluate->add_option("--seed", seed, "evaluation seed")->capture_default_str();

  std::size_t threads = 0;
  bool no_resume = false, report_only = false;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> arm_filter;
  auto* experiment = app.add_subcommand("experiment", "run every arm and seed of a recipe");
  experiment->add_option("--config", config, "recipe file");
  experiment->add_option("--out", out, "output directory")->required();
  experiment->add_option("--data", data_dir, "dataset directory (generated if omitted)");
  experiment->add_option("--threads", threads, "worker threads (capped by LGC_THREADS)");
  experiment->add_flag("--no-resume", no_resume, "retrain runs that already finished");
  experiment->add_flag("--report-only", report_only, "rebuild the report from saved runs");
  experiment->add_option("--seeds", seeds, "override experiment.seeds");
  experiment->add_option("--arms", arm_filter, "run only the named arms");

  std::size_t n_inputs = 100000, oracle_adj = 256;
  auto* oracle = app.add_subcommand("oracle", "irreducible point-prediction errors");
  oracle->add_option("--config", config, "config file (dataset section)");
  oracle->add_option("--n-inputs", n_inputs, "inputs x")->capture_default_str();
  oracle->add_option("--n-adj", oracle_adj, "adjacency samples per input")->capture_default_str();
  oracle->add_option("--seed", seed, "seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*datagen) return cmd_datagen(config, out, n_pairs, seed_opt);
    if (*train_cmd) return cmd_train(config, data_dir, out, seed_opt);
    if (*evaluate) return cmd_evaluate(config, data_dir, run, eval_adj, seed);
    if (*experiment) {
      if (config.empty() && !report_only) throw ConfigError("--config is required");
      return cmd_experiment(config, out, data_dir, threads, no_resume, report_only, seeds, arm_filter);
    }
    if (*oracle) return cmd_oracle(config, n_inputs, oracle_adj, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
