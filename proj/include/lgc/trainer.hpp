#pragma once

// First-order training loop: Adam on psi and theta, projection of theta,
// step learning-rate schedule, per-epoch validation metrics.

#include "lgc/datagen.hpp"
#include "lgc/edge_dist.hpp"
#include "lgc/kernels.hpp"
#include "lgc/losses.hpp"
#include "lgc/poly_gnn.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <cmath>
#include <vector>

namespace lgc {

struct TrainConfig {
  double lr_initial = 0.05;
  double lr_after_drop = 0.01;
  std::size_t drop_epoch = 5;
  double lr_decay = 1.0;  // per-epoch factor applied after the drop
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  std::size_t batch_size = 128;
  std::size_t epochs = 15;
  double theta_init_low = 0.0;
  double theta_init_high = 0.1;
  double psi_init_range = 0.5;  // joint arm: psi ~ U(-r, r)
  bool freeze_psi = false;
  std::uint64_t seed = 0;

  // evaluation
  KernelSpec val_kernel{};
  std::size_t val_dist_adj = 16;
  std::size_t val_point_adj = 64;
  std::size_t test_point_adj = 256;
  std::size_t val_max_pairs = 0;  // 0: whole validation split
  std::size_t evals_per_epoch = 1;
  // first evaluation epoch with validation L^dist at or below this value is
  // recorded in the summary
  std::optional<double> dist_threshold;

  void validate() const;
  double learning_rate(std::size_t epoch) const {
    if (epoch < drop_epoch) return lr_initial;
    return lr_after_drop * std::pow(lr_decay, static_cast<double>(epoch - drop_epoch));
  }
};

struct AdamMoments {
  Matrix m;
  Matrix v;
  std::size_t steps = 0;
};

/// Bias-corrected Adam update applied in place.
void adam_step(Matrix& params, const Matrix& grad, AdamMoments& moments, double lr, double beta1,
               double beta2, double eps);

struct FrozenEdge {
  std::size_t from;
  std::size_t to;
  double value;
};

/// Where the initial predictor comes from. With a model supplied it is used
/// as given (the caller decides whether it is psi* or a perturbation);
/// otherwise psi ~ U(-psi_init_range, psi_init_range).
struct RunInit {
  std::size_t n_nodes = 12;
  std::size_t hops = 2;
  std::size_t d_in = 4;
  std::size_t d_out = 1;
  std::optional<PolyGnn> model;
  std::vector<FrozenEdge> frozen_edges;
};

struct TrainerState {
  TrainConfig cfg;
  EdgeDistribution dist;
  PolyGnn model;
  AdamMoments theta_moments;
  std::vector<AdamMoments> psi_moments;
  LossState loss_state;
  Rng sample_rng;
  std::size_t epochs_done = 0;
};

TrainerState init_run(const TrainConfig& cfg, const RunInit& init);

struct EpochRow {
  double epoch = 0.0;  // fractional when evals_per_epoch > 1
  double lr = 0.0;
  double train_loss = 0.0;
  double val_dist_loss = 0.0;
  double mae_theta = 0.0;
  double max_ae_theta = 0.0;
  double val_mse_y = 0.0;
  double val_mae_y = 0.0;
  double seconds = 0.0;
};

struct RunSummary {
  std::string status = "ok";
  std::size_t epochs = 0;
  double seconds = 0.0;
  double mae_theta = 0.0;
  double max_ae_theta = 0.0;
  double test_dist_loss = 0.0;
  double test_mse_y = 0.0;
  double test_mae_y = 0.0;
  double test_mae_y_mean = 0.0;
  double val_dist_loss = 0.0;
  double val_mse_y = 0.0;
  double val_loss = 0.0;  // training objective on the validation split
  double threshold_epoch = -1.0;  // -1: threshold unset or never reached
};

struct RunRecord {
  std::vector<EpochRow> rows;
  RunSummary summary;
};

struct TrainHooks {
  std::function<void(const EpochRow&)> on_eval;
  bool evaluate_test = true;
};

/// Runs cfg.epochs epochs from the current state. Throws NumericalDivergence
/// if any parameter becomes non-finite.
RunRecord train(TrainerState& state, const Dataset& data, const LossConfig& loss,
                const TrainHooks& hooks = {});

/// Writes theta.json and model.json atomically (temp file, then rename).
void save_checkpoint(const TrainerState& state, const std::filesystem::path& dir);
void write_run_record(const RunRecord& record, const std::filesystem::path& dir);
RunSummary read_run_summary(const std::filesystem::path& dir);
void write_file_atomic(const std::filesystem::path& file, const std::string& content);

void to_json(nlohmann::json& j, const RunSummary& s);
void from_json(const nlohmann::json& j, RunSummary& s);

}  // namespace lgc
