#include "lgc/trainer.hpp"

#include "lgc/errors.hpp"
#include "lgc/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace lgc {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(lr_initial >= 0.0 && lr_after_drop >= 0.0 && lr_after_drop <= lr_initial))
    throw ConfigError("learning rates must satisfy 0 <= lr_after_drop <= lr_initial");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(theta_init_low <= theta_init_high)) throw ConfigError("theta init range is empty");
  if (!(psi_init_range >= 0.0)) throw ConfigError("psi_init_range must be non-negative");
  if (val_dist_adj < 2 || val_point_adj < 2 || test_point_adj < 2)
    throw ConfigError("evaluation sample counts must be at least 2");
  if (evals_per_epoch == 0) throw ConfigError("evals_per_epoch must be at least 1");
  val_kernel.validate();
}

void adam_step(Matrix& params, const Matrix& grad, AdamMoments& mom, double lr, double beta1,
               double beta2, double eps) {
  if (grad.rows() != params.rows() || grad.cols() != params.cols())
    throw ShapeMismatch("Adam gradient shape differs from parameters");
  if (mom.m.rows() != params.rows() || mom.m.cols() != params.cols()) {
    mom.m = Matrix::Zero(params.rows(), params.cols());
    mom.v = Matrix::Zero(params.rows(), params.cols());
    mom.steps = 0;
  }
  ++mom.steps;
  mom.m = beta1 * mom.m + (1.0 - beta1) * grad;
  mom.v = beta2 * mom.v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(mom.steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(mom.steps));
  params.array() -= lr * (mom.m.array() / c1) / ((mom.v.array() / c2).sqrt() + eps);
}

TrainerState init_run(const TrainConfig& cfg, const RunInit& init) {
  cfg.validate();
  if (init.n_nodes == 0 || init.hops == 0 || init.d_in == 0 || init.d_out == 0)
    throw ConfigError("run dimensions must be positive");
  Rng rng = make_rng(cfg.seed, 1);
  const auto n = static_cast<Eigen::Index>(init.n_nodes);

  std::uniform_real_distribution<double> theta_init(cfg.theta_init_low, cfg.theta_init_high);
  Matrix theta(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) theta(i, j) = theta_init(rng);
  EdgeDistribution dist(std::move(theta));
  for (const auto& f : init.frozen_edges) dist.freeze(f.from, f.to, f.value);

  PolyGnn model;
  if (init.model) {
    model = *init.model;
    if (model.d_in() != init.d_in || model.d_out() != init.d_out || model.hops() != init.hops)
      throw ConfigError("supplied model does not match the run dimensions");
  } else {
    std::uniform_real_distribution<double> psi_init(-cfg.psi_init_range, cfg.psi_init_range);
    std::vector<Matrix> layers;
    for (std::size_t l = 0; l < init.hops; ++l) {
      Matrix psi(static_cast<Eigen::Index>(init.d_out), static_cast<Eigen::Index>(init.d_in));
      for (Eigen::Index r = 0; r < psi.rows(); ++r)
        for (Eigen::Index c = 0; c < psi.cols(); ++c) psi(r, c) = psi_init(rng);
      layers.push_back(std::move(psi));
    }
    model = PolyGnn(std::move(layers));
  }

  TrainerState state{cfg, std::move(dist), std::move(model), {}, {}, {}, make_rng(cfg.seed, 2), 0};
  state.theta_moments = {Matrix::Zero(n, n), Matrix::Zero(n, n), 0};
  for (const auto& psi : state.model.layers())
    state.psi_moments.push_back(
        {Matrix::Zero(psi.rows(), psi.cols()), Matrix::Zero(psi.rows(), psi.cols()), 0});
  return state;
}

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void check_finite(const TrainerState& s, std::size_t epoch, std::size_t step) {
  if (!all_finite(s.dist.theta()))
    throw NumericalDivergence("theta became non-finite at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step));
  for (std::size_t l = 0; l < s.model.hops(); ++l)
    if (!all_finite(s.model.layer(l)))
      throw NumericalDivergence("psi_" + std::to_string(l + 1) + " became non-finite at epoch " +
                                std::to_string(epoch) + ", step " + std::to_string(step));
}

std::vector<const DataPair*> validation_view(const Dataset& data, const TrainConfig& cfg) {
  auto view = data.split_view(data.validation);
  if (cfg.val_max_pairs > 0 && view.size() > cfg.val_max_pairs) view.resize(cfg.val_max_pairs);
  return view;
}

}  // namespace

RunRecord train(TrainerState& state, const Dataset& data, const LossConfig& loss,
                const TrainHooks& hooks) {
  const TrainConfig& cfg = state.cfg;
  cfg.validate();
  loss.validate();
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (data.ground_truth.node_count() != state.dist.size())
    throw ShapeMismatch("dataset node count differs from the trained distribution");

  const Matrix& theta_star = data.ground_truth.dist_star.theta();
  const auto val = validation_view(data, cfg);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  RunRecord record;
  std::vector<std::size_t> order = data.train;
  std::vector<const DataPair*> batch;
  const std::size_t steps_per_epoch = (order.size() + cfg.batch_size - 1) / cfg.batch_size;

  auto evaluate = [&](double progress, double lr, double train_loss) {
    Rng eval_rng = make_rng(cfg.seed, 10000 + static_cast<std::uint64_t>(std::llround(progress * 1000)));
    EpochRow row;
    row.epoch = progress;
    row.lr = lr;
    row.train_loss = train_loss;
    row.val_dist_loss =
        distributional_loss(state.dist, state.model, val, cfg.val_kernel, cfg.val_dist_adj, eval_rng);
    const auto cal = calibration_metrics(state.dist.theta(), theta_star);
    row.mae_theta = cal.mae;
    row.max_ae_theta = cal.max_ae;
    const auto pm = point_metrics(state.dist, state.model, val, cfg.val_point_adj, eval_rng);
    row.val_mse_y = pm.mse_y;
    row.val_mae_y = pm.mae_y;
    row.seconds = elapsed();
    record.rows.push_back(row);
    if (hooks.on_eval) hooks.on_eval(row);
  };

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = state.epochs_done;
    const double lr = cfg.learning_rate(epoch);
    Rng shuffle_rng = make_rng(cfg.seed, 100 + epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t next_eval = 1;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t lo = step * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&data.pairs[order[i]]);

      EstimateOptions opts;
      opts.grad_psi = !cfg.freeze_psi;
      const LossEstimate est =
          estimate_loss(state.dist, state.model, batch, loss, state.loss_state, state.sample_rng, opts);
      loss_sum += est.value * static_cast<double>(batch.size());
      loss_count += batch.size();

      Matrix theta = state.dist.theta();
      adam_step(theta, est.grad_theta, state.theta_moments, lr, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_eps);
      state.dist.assign(theta);
      if (!cfg.freeze_psi) {
        for (std::size_t l = 0; l < state.model.hops(); ++l) {
          Matrix psi = state.model.layer(l);
          adam_step(psi, est.grad_psi[l], state.psi_moments[l], lr, cfg.adam_beta1,
                    cfg.adam_beta2, cfg.adam_eps);
          state.model.set_layer(l, psi);
        }
      }
      check_finite(state, epoch, step);

      // intermediate evaluations for evals_per_epoch > 1
      if (next_eval < cfg.evals_per_epoch &&
          (step + 1) * cfg.evals_per_epoch >= next_eval * steps_per_epoch) {
        evaluate(static_cast<double>(epoch) + static_cast<double>(step + 1) / steps_per_epoch, lr,
                 loss_sum / static_cast<double>(loss_count));
        ++next_eval;
      }
    }
    ++state.epochs_done;
    evaluate(static_cast<double>(state.epochs_done), lr, loss_sum / static_cast<double>(loss_count));
  }

  RunSummary& s = record.summary;
  s.epochs = state.epochs_done;
  const auto cal = calibration_metrics(state.dist.theta(), theta_star);
  s.mae_theta = cal.mae;
  s.max_ae_theta = cal.max_ae;
  if (!record.rows.empty()) {
    s.val_dist_loss = record.rows.back().val_dist_loss;
    s.val_mse_y = record.rows.back().val_mse_y;
  }
  {
    Rng rng = make_rng(cfg.seed, 20000);
    LossState scratch = state.loss_state;
    EstimateOptions opts{false, false};
    double total = 0.0;
    for (std::size_t startp = 0; startp < val.size(); startp += 256) {
      const auto chunk = std::span<const DataPair* const>(val).subspan(
          startp, std::min<std::size_t>(256, val.size() - startp));
      total += estimate_loss(state.dist, state.model, chunk, loss, scratch, rng, opts).value *
               static_cast<double>(chunk.size());
    }
    s.val_loss = val.empty() ? 0.0 : total / static_cast<double>(val.size());
  }
  if (hooks.evaluate_test && !data.test.empty()) {
    const auto test = data.split_view(data.test);
    Rng rng = make_rng(cfg.seed, 30000);
    s.test_dist_loss =
        distributional_loss(state.dist, state.model, test, cfg.val_kernel, cfg.val_dist_adj, rng);
    const auto pm = point_metrics(state.dist, state.model, test, cfg.test_point_adj, rng);
    s.test_mse_y = pm.mse_y;
    s.test_mae_y = pm.mae_y;
    s.test_mae_y_mean = pm.mae_y_mean;
  }
  if (cfg.dist_threshold) {
    for (const auto& r : record.rows)
      if (r.val_dist_loss <= *cfg.dist_threshold) {
        s.threshold_epoch = r.epoch;
        break;
      }
  }
  s.seconds = elapsed();
  return record;
}

void write_file_atomic(const fs::path& file, const std::string& content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("failed while writing " + tmp.string());
  }
  fs::rename(tmp, file);
}

void save_checkpoint(const TrainerState& state, const fs::path& dir) {
  write_file_atomic(dir / "theta.json", nlohmann::json(state.dist).dump() + "\n");
  write_file_atomic(dir / "model.json", nlohmann::json(state.model).dump() + "\n");
}

void to_json(nlohmann::json& j, const RunSummary& s) {
  j = nlohmann::json{{"status", s.status},
                     {"epochs", s.epochs},
                     {"seconds", s.seconds},
                     {"mae_theta", s.mae_theta},
                     {"max_ae_theta", s.max_ae_theta},
                     {"test_dist_loss", s.test_dist_loss},
                     {"test_mse_y", s.test_mse_y},
                     {"test_mae_y", s.test_mae_y},
                     {"test_mae_y_mean", s.test_mae_y_mean},
                     {"val_dist_loss", s.val_dist_loss},
                     {"val_mse_y", s.val_mse_y},
                     {"val_loss", s.val_loss},
                     {"threshold_epoch", s.threshold_epoch}};
}

void from_json(const nlohmann::json& j, RunSummary& s) {
  s.status = j.value("status", std::string("ok"));
  s.epochs = j.value("epochs", std::size_t{0});
  s.seconds = j.value("seconds", 0.0);
  s.mae_theta = j.value("mae_theta", 0.0);
  s.max_ae_theta = j.value("max_ae_theta", 0.0);
  s.test_dist_loss = j.value("test_dist_loss", 0.0);
  s.test_mse_y = j.value("test_mse_y", 0.0);
  s.test_mae_y = j.value("test_mae_y", 0.0);
  s.test_mae_y_mean = j.value("test_mae_y_mean", 0.0);
  s.val_dist_loss = j.value("val_dist_loss", 0.0);
  s.val_mse_y = j.value("val_mse_y", 0.0);
  s.val_loss = j.value("val_loss", 0.0);
  s.threshold_epoch = j.value("threshold_epoch", -1.0);
}

void write_run_record(const RunRecord& record, const fs::path& dir) {
  std::ostringstream csv;
  csv.precision(10);
  csv << "epoch,lr,train_loss,val_dist_loss,mae_theta,max_ae_theta,val_mse_y,val_mae_y,seconds\n";
  for (const auto& r : record.rows)
    csv << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.val_dist_loss << ','
        << r.mae_theta << ',' << r.max_ae_theta << ',' << r.val_mse_y << ',' << r.val_mae_y << ','
        << r.seconds << '\n';
  write_file_atomic(dir / "metrics.csv", csv.str());
  write_file_atomic(dir / "summary.json", nlohmann::json(record.summary).dump(2) + "\n");
}

RunSummary read_run_summary(const fs::path& dir) {
  std::ifstream in(dir / "summary.json");
  if (!in) throw IoError("cannot read " + (dir / "summary.json").string());
  return nlohmann::json::parse(in).get<RunSummary>();
}

}  // namespace lgc
