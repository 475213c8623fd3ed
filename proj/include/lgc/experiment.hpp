#pragma once
// Multi-seed experiment runner and comparison reports.
#include "lgc/config.hpp"
#include "lgc/datagen.hpp"
#include "lgc/trainer.hpp"
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lgc {

struct RunOutcome {
  std::string arm;
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct ArmStats {
  std::string arm;
  std::size_t runs_ok = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;
  // two-sided Welch p-value against the best arm of each metric; absent for
  // the best arm itself
  std::map<std::string, double> p_vs_best;
};

struct ComparisonReport {
  std::string name;
  std::vector<std::string> metrics;
  std::vector<ArmStats> arms;
  std::map<std::string, std::string> best;  // metric -> arm with the lowest mean
  std::vector<RunOutcome> runs;
  std::map<std::string, nlohmann::json> notes;  // per-arm extras, e.g. ELBO grid choice

  const ArmStats& arm(const std::string& name) const;
};

/// Metrics aggregated per arm; all are "lower is better".
const std::vector<std::string>& report_metrics();
double metric_value(const RunSummary& s, const std::string& metric);

struct ExperimentOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> data_dir;  // load instead of generating
  std::size_t threads = 0;                        // 0: LGC_THREADS or hardware
  bool resume = true;  // reuse finished runs whose recorded arm config matches
  std::function<void(const std::string&)> log;
};

/// Worker count: `requested` if non-zero, else hardware concurrency, capped by
/// the LGC_THREADS environment variable.
std::size_t thread_count(std::size_t requested = 0);

Dataset prepare_dataset(const DatasetSpec& spec,
                        const std::optional<std::filesystem::path>& data_dir = std::nullopt);

/// Predictor and frozen entries for one run of an arm.
RunInit make_run_init(const ArmSpec& arm, std::uint64_t seed, const GroundTruth& gt);

/// Trains one (arm, seed) run and writes metrics.csv, summary.json, the
/// checkpoint and the arm config into `dir`.
RunRecord run_single(const ArmSpec& arm, std::uint64_t seed, const Dataset& data,
                     const std::filesystem::path& dir);

/// Runs every (arm, seed) combination. Failed runs are flagged in their
/// summary status and excluded from the statistics; the others continue.
ComparisonReport run_experiment(const ExperimentSpec& spec, const ExperimentOptions& opts);

ComparisonReport build_report(const std::string& name, const std::vector<std::string>& arm_order,
                              std::vector<RunOutcome> runs);
/// Rebuilds the report from the persisted experiment.json and run summaries.
ComparisonReport regenerate_report(const std::filesystem::path& out_dir);
/// report.csv (arm, seed, metric, value) and report.json.
void write_report(const ComparisonReport& report, const std::filesystem::path& out_dir);
nlohmann::json report_json(const ComparisonReport& report);
std::string report_csv(const ComparisonReport& report);

}  // namespace lgc
