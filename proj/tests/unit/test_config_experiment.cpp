#include "lgc/config.hpp"
#include "lgc/errors.hpp"
#include "lgc/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace lgc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

TEST(Config, DottedKeysExpandIntoSections) {
  const json j = expand_dotted(json{{"loss.kernel.sigma", 0.1}, {"loss.kind", "dist_crps"},
                                    {"loss", {{"n_adj", 8}}}});
  const ArmSpec a = parse_arm(j);
  EXPECT_EQ(a.loss.kind, LossKind::dist_crps);
  EXPECT_EQ(a.loss.n_adj, 8u);
  EXPECT_EQ(a.loss.kernel.sigma, 0.1);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_arm(json{{"loss", {{"kinds", "dist_mmd"}}}}), ConfigError);
  EXPECT_THROW(parse_arm(json{{"train", {{"learning_rate", 0.1}}}}), ConfigError);
  EXPECT_THROW(parse_dataset(json{{"dataset", {{"nodes", 12}}}}), ConfigError);
  EXPECT_THROW(parse_arm(json{{"loss", {{"kind", "mystery"}}}}), ConfigError);
}

TEST(Config, ModelSourceImpliesFrozenPsi) {
  const ArmSpec a = parse_arm(json{{"model", {{"source", "perturbed"}, {"perturbation", 0.2}}}});
  EXPECT_EQ(a.model, ModelSource::perturbed);
  EXPECT_TRUE(a.train.freeze_psi);
  const ArmSpec b = parse_arm(json{{"train", {{"freeze_psi", true}}}});
  EXPECT_EQ(b.model, ModelSource::true_psi);
  EXPECT_FALSE(parse_arm(json::object()).train.freeze_psi);
}

TEST(Config, ArmsOverrideSharedSections) {
  const json root = {
      {"loss", {{"n_adj", 8}, {"kind", "dist_mmd"}}},
      {"train", {{"epochs", 3}}},
      {"experiment",
       {{"name", "x"},
        {"seeds", {1, 2}},
        {"arms", {{{"name", "a"}}, {{"name", "b"}, {"loss", {{"kind", "point_mse"}}}}}}}}};
  const ExperimentSpec e = parse_experiment(root);
  ASSERT_EQ(e.arms.size(), 2u);
  EXPECT_EQ(e.arms[1].loss.kind, LossKind::point_mse);
  EXPECT_EQ(e.arms[1].loss.n_adj, 8u);
  EXPECT_EQ(e.arms[0].train.epochs, 3u);
}

TEST(Config, DuplicateArmsOrSeedsAreRejected) {
  json root = {{"experiment", {{"name", "x"}, {"seeds", {1, 1}}, {"arms", {{{"name", "a"}}}}}}};
  EXPECT_THROW(parse_experiment(root), ConfigError);
  root["experiment"]["seeds"] = {1, 2};
  root["experiment"]["arms"] = {{{"name", "a"}}, {{"name", "a"}}};
  EXPECT_THROW(parse_experiment(root), ConfigError);
}

TEST(Config, PriorStrings) {
  const GroundTruth gt = build_ground_truth({});
  const EdgeDistribution u = make_prior("uniform:0.3", gt);
  EXPECT_EQ(u.theta()(4, 7), 0.3);
  const EdgeDistribution p = make_prior("pattern:0.75:0.05", gt);
  EXPECT_EQ(p.theta()(0, 1), 0.75);
  EXPECT_EQ(p.theta()(0, 3), 0.05);
  EXPECT_THROW(make_prior("uniform:1.5", gt), ConfigError);
  EXPECT_THROW(make_prior("laplace:0.1", gt), ConfigError);
}

TEST(Config, ShippedRecipesParse) {
  for (const char* name : {"table1", "table2", "fig2", "misconfigured_p", "n120", "n40", "smoke"}) {
    const fs::path file = fs::path(LGC_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
    const ExperimentSpec e = parse_experiment(read_config(file));
    EXPECT_EQ(e.name, name);
    EXPECT_FALSE(e.arms.empty());
    for (ArmSpec a : e.arms) {
      // grid-searched arms get their prior from the grid
      if (a.elbo_grid) a.elbo_prior = a.elbo_grid->priors.front();
      EXPECT_NO_THROW(resolved_loss(a, build_ground_truth(e.dataset.params))) << a.name;
    }
    const std::string n = name;
    if (n != "smoke" && n != "n120" && n != "n40") EXPECT_EQ(e.seeds.size(), 8u);
  }
}

TEST(Config, ArmJsonRoundTrip) {
  const ArmSpec a = parse_arm(json{{"loss", {{"kind", "lit2"}, {"inner_metric", "mae"}}},
                                   {"theta", {{"frozen", {{0, 2, 0.25}}}}},
                                   {"model", {{"source", "true_psi"}}}});
  const ArmSpec b = parse_arm(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Threads, EnvironmentCapsParallelism) {
  ::setenv("LGC_THREADS", "2", 1);
  EXPECT_EQ(thread_count(8), 2u);
  EXPECT_EQ(thread_count(1), 1u);
  ::setenv("LGC_THREADS", "junk", 1);
  EXPECT_EQ(thread_count(3), 3u);
  ::unsetenv("LGC_THREADS");
  EXPECT_EQ(thread_count(5), 5u);
}

ExperimentSpec smoke_spec() {
  return parse_experiment(read_config(fs::path(LGC_SOURCE_DIR) / "configs" / "smoke.json"));
}

TEST(Experiment, SmokeRunEmitsReportsAndRegeneratesIdentically) {
  const fs::path out = fs::temp_directory_path() / "lgc_test_experiment";
  fs::remove_all(out);
  ExperimentOptions opts;
  opts.out_dir = out;
  opts.threads = 2;
  const ComparisonReport rep = run_experiment(smoke_spec(), opts);
  for (const char* f : {"report.csv", "report.json", "experiment.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  for (const char* arm : {"dist_mmd", "point_mse"})
    for (const char* f : {"metrics.csv", "summary.json", "theta.json", "model.json"})
      EXPECT_TRUE(fs::exists(out / arm / "seed_1" / f)) << arm << "/" << f;
  EXPECT_EQ(rep.runs.size(), 4u);
  EXPECT_EQ(rep.arm("dist_mmd").runs_ok, 2u);

  const ComparisonReport again = regenerate_report(out);
  EXPECT_EQ(report_json(again), report_json(rep));
  EXPECT_EQ(report_csv(again), report_csv(rep));

  // the long-format CSV has one row per (arm, seed, metric) plus a header
  std::ifstream in(out / "report.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "arm,seed,metric,value");
  while (std::getline(in, line)) ++rows;
  EXPECT_GT(rows, 4u * 8u);

  // finished runs are reused, not retrained
  const auto stamp = fs::last_write_time(out / "dist_mmd" / "seed_1" / "summary.json");
  const ComparisonReport resumed = run_experiment(smoke_spec(), opts);
  EXPECT_EQ(fs::last_write_time(out / "dist_mmd" / "seed_1" / "summary.json"), stamp);
  EXPECT_EQ(report_json(resumed), report_json(rep));
  fs::remove_all(out);
}

TEST(Report, BestArmAndWelchAgainstIt) {
  std::vector<RunOutcome> runs;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    RunSummary good, bad;
    good.mae_theta = 0.01 + 0.001 * s;
    bad.mae_theta = 0.08 + 0.001 * s;
    good.threshold_epoch = bad.threshold_epoch = -1.0;
    runs.push_back({"good", s, good});
    runs.push_back({"bad", s, bad});
  }
  RunSummary failed;
  failed.status = "failed: diverged";
  runs.push_back({"bad", 9, failed});
  const ComparisonReport r = build_report("t", {"good", "bad"}, runs);
  EXPECT_EQ(r.best.at("mae_theta"), "good");
  EXPECT_EQ(r.arm("bad").runs_ok, 4u);
  EXPECT_LT(r.arm("bad").p_vs_best.at("mae_theta"), 1e-6);
  EXPECT_FALSE(r.arm("good").p_vs_best.count("mae_theta"));
  EXPECT_NEAR(r.arm("good").mean.at("mae_theta"), 0.0125, 1e-15);
  // unreached thresholds are excluded, so no statistic exists
  EXPECT_FALSE(r.arm("good").mean.count("threshold_epoch"));
}

}  // namespace
}  // namespace lgc
