#include "lgc/config.hpp"

#include "lgc/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace lgc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ModelSource s) {
  switch (s) {
    case ModelSource::joint: return "joint";
    case ModelSource::true_psi: return "true_psi";
    case ModelSource::perturbed: return "perturbed";
  }
  return "unknown";
}

ModelSource model_source_from_string(const std::string& name) {
  for (auto s : {ModelSource::joint, ModelSource::true_psi, ModelSource::perturbed})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown model source '" + name + "'");
}

json expand_dotted(const json& j) {
  if (!j.is_object()) {
    if (!j.is_array()) return j;
    json out = json::array();
    for (const auto& e : j) out.push_back(expand_dotted(e));
    return out;
  }
  json out = json::object();
  for (const auto& [key, value] : j.items()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      json v = expand_dotted(value);
      if (out.contains(key) && out[key].is_object() && v.is_object())
        out[key].merge_patch(v);
      else
        out[key] = std::move(v);
    } else {
      json nested = expand_dotted(json{{key.substr(dot + 1), value}});
      json& slot = out[key.substr(0, dot)];
      if (slot.is_null()) slot = json::object();
      if (!slot.is_object()) throw ConfigError("key '" + key + "' conflicts with a scalar value");
      slot.merge_patch(nested);
    }
  }
  return out;
}

json read_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read config " + file.string());
  try {
    return expand_dotted(json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + where + "." + key + "': " + obj.at(key).dump());
  }
}

json section(const json& root, const char* name) {
  return root.contains(name) ? root.at(name) : json::object();
}

double parse_number(const std::string& text, const std::string& context) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ConfigError("bad number '" + text + "' in " + context);
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) parts.push_back(part);
  return parts;
}

}  // namespace

DatasetSpec parse_dataset(const json& root) {
  DatasetSpec d;
  const json s = section(root, "dataset");
  check_keys(s, {"n_communities", "community_size", "theta_on", "sigma_x", "n_pairs", "seed"},
             "dataset");
  read(s, "n_communities", d.params.n_communities, "dataset");
  read(s, "community_size", d.params.community_size, "dataset");
  read(s, "theta_on", d.params.theta_on, "dataset");
  read(s, "sigma_x", d.params.sigma_x, "dataset");
  read(s, "n_pairs", d.n_pairs, "dataset");
  read(s, "seed", d.seed, "dataset");
  if (d.n_pairs < 10) throw ConfigError("dataset.n_pairs must be at least 10");
  return d;
}

ArmSpec parse_arm(const json& root) {
  check_keys(root, {"name", "dataset", "loss", "train", "model", "theta", "elbo_grid", "experiment"},
             "config");
  ArmSpec a;
  read(root, "name", a.name, "arm");

  const json loss = section(root, "loss");
  check_keys(loss,
             {"kind", "inner_metric", "n_adj", "control_variates", "kernel", "elbo_sigma",
              "elbo_prior", "baseline_momentum"},
             "loss");
  std::string text;
  if (loss.contains("kind")) {
    read(loss, "kind", text, "loss");
    a.loss.kind = loss_kind_from_string(text);
  }
  if (loss.contains("inner_metric")) {
    read(loss, "inner_metric", text, "loss");
    a.loss.inner_metric = point_metric_from_string(text);
  }
  read(loss, "n_adj", a.loss.n_adj, "loss");
  read(loss, "control_variates", a.loss.control_variates, "loss");
  read(loss, "elbo_sigma", a.loss.elbo_sigma, "loss");
  read(loss, "elbo_prior", a.elbo_prior, "loss");
  read(loss, "baseline_momentum", a.loss.baseline_momentum, "loss");
  if (loss.contains("kernel")) {
    const json k = loss.at("kernel");
    check_keys(k, {"kind", "sigma", "alpha"}, "loss.kernel");
    if (k.contains("kind")) {
      read(k, "kind", text, "loss.kernel");
      a.loss.kernel.kind = kernel_kind_from_string(text);
    }
    read(k, "sigma", a.loss.kernel.sigma, "loss.kernel");
    read(k, "alpha", a.loss.kernel.alpha, "loss.kernel");
  }

  const json tr = section(root, "train");
  check_keys(tr,
             {"lr_initial", "lr_after_drop", "drop_epoch", "lr_decay", "batch_size", "epochs", "seed",
              "freeze_psi", "theta_init_low", "theta_init_high", "adam_beta1", "adam_beta2",
              "adam_eps", "psi_init_range", "val_dist_adj", "val_point_adj", "test_point_adj",
              "val_max_pairs", "evals_per_epoch", "dist_threshold"},
             "train");
  TrainConfig& t = a.train;
  read(tr, "lr_initial", t.lr_initial, "train");
  read(tr, "lr_after_drop", t.lr_after_drop, "train");
  read(tr, "drop_epoch", t.drop_epoch, "train");
  read(tr, "lr_decay", t.lr_decay, "train");
  read(tr, "batch_size", t.batch_size, "train");
  read(tr, "epochs", t.epochs, "train");
  read(tr, "seed", t.seed, "train");
  read(tr, "freeze_psi", t.freeze_psi, "train");
  read(tr, "theta_init_low", t.theta_init_low, "train");
  read(tr, "theta_init_high", t.theta_init_high, "train");
  read(tr, "adam_beta1", t.adam_beta1, "train");
  read(tr, "adam_beta2", t.adam_beta2, "train");
  read(tr, "adam_eps", t.adam_eps, "train");
  read(tr, "psi_init_range", t.psi_init_range, "train");
  read(tr, "val_dist_adj", t.val_dist_adj, "train");
  read(tr, "val_point_adj", t.val_point_adj, "train");
  read(tr, "test_point_adj", t.test_point_adj, "train");
  read(tr, "val_max_pairs", t.val_max_pairs, "train");
  read(tr, "evals_per_epoch", t.evals_per_epoch, "train");
  if (tr.contains("dist_threshold")) {
    double v = 0.0;
    read(tr, "dist_threshold", v, "train");
    t.dist_threshold = v;
  }

  const json m = section(root, "model");
  check_keys(m, {"source", "perturbation"}, "model");
  if (m.contains("source")) {
    read(m, "source", text, "model");
    a.model = model_source_from_string(text);
  } else if (t.freeze_psi) {
    a.model = ModelSource::true_psi;
  }
  read(m, "perturbation", a.perturbation, "model");
  if (a.perturbation < 0.0) throw ConfigError("model.perturbation must be non-negative");
  // a supplied predictor is held fixed unless the config says otherwise
  if (a.model != ModelSource::joint && !tr.contains("freeze_psi")) t.freeze_psi = true;

  const json th = section(root, "theta");
  check_keys(th, {"frozen"}, "theta");
  if (th.contains("frozen")) {
    for (const auto& e : th.at("frozen")) {
      if (!e.is_array() || e.size() != 3) throw ConfigError("theta.frozen entries are [from, to, value]");
      a.frozen_edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<double>()});
    }
  }

  if (root.contains("elbo_grid")) {
    const json g = root.at("elbo_grid");
    check_keys(g, {"priors", "sigmas"}, "elbo_grid");
    ElboGrid grid;
    read(g, "priors", grid.priors, "elbo_grid");
    read(g, "sigmas", grid.sigmas, "elbo_grid");
    if (grid.priors.empty() || grid.sigmas.empty()) throw ConfigError("elbo_grid needs priors and sigmas");
    a.elbo_grid = std::move(grid);
  }
  if (a.loss.kind == LossKind::elbo && a.elbo_prior.empty() && !a.elbo_grid)
    throw ConfigError("elbo loss needs loss.elbo_prior or an elbo_grid");
  a.train.validate();
  return a;
}

ExperimentSpec parse_experiment(const json& root) {
  ExperimentSpec e;
  e.dataset = parse_dataset(root);
  const json ex = section(root, "experiment");
  check_keys(ex, {"name", "seeds", "arms"}, "experiment");
  read(ex, "name", e.name, "experiment");
  read(ex, "seeds", e.seeds, "experiment");
  if (e.name.empty()) throw ConfigError("experiment.name is required");
  if (e.seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  std::set<std::uint64_t> distinct(e.seeds.begin(), e.seeds.end());
  if (distinct.size() != e.seeds.size()) throw ConfigError("experiment.seeds must be distinct");

  json base = root;
  base.erase("experiment");
  base.erase("dataset");
  if (!ex.contains("arms") || !ex.at("arms").is_array() || ex.at("arms").empty())
    throw ConfigError("experiment.arms must list at least one arm");
  std::set<std::string> names;
  for (const auto& arm_json : ex.at("arms")) {
    json merged = base;
    merged.merge_patch(expand_dotted(arm_json));
    ArmSpec arm = parse_arm(merged);
    if (arm.name.empty()) throw ConfigError("every arm needs a name");
    if (!names.insert(arm.name).second) throw ConfigError("duplicate arm name '" + arm.name + "'");
    e.arms.push_back(std::move(arm));
  }
  return e;
}

EdgeDistribution make_prior(const std::string& spec, const GroundTruth& gt) {
  const auto parts = split(spec, ':');
  const std::size_t n = gt.node_count();
  auto probability = [&](const std::string& text) {
    const double p = parse_number(text, spec);
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("ELBO prior '" + spec + "' needs values in (0, 1)");
    return p;
  };
  if (parts.size() == 2 && parts[0] == "uniform")
    return EdgeDistribution::constant(n, probability(parts[1]));
  if (parts.size() == 3 && parts[0] == "pattern") {
    const double on = probability(parts[1]);
    const double off = probability(parts[2]);
    Matrix theta = Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), off);
    for (const auto& [i, j] :
         canonical_template_edges(gt.params.n_communities, gt.params.community_size))
      theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = on;
    return EdgeDistribution(std::move(theta));
  }
  throw ConfigError("bad ELBO prior '" + spec + "' (expected uniform:<p> or pattern:<on>:<off>)");
}

LossConfig resolved_loss(const ArmSpec& arm, const GroundTruth& gt) {
  LossConfig cfg = arm.loss;
  if (cfg.kind == LossKind::elbo) {
    if (arm.elbo_prior.empty()) throw ConfigError("arm '" + arm.name + "' has no ELBO prior");
    cfg.elbo_prior = make_prior(arm.elbo_prior, gt);
  }
  cfg.validate();
  return cfg;
}

json to_json(const DatasetSpec& d) {
  return {{"n_communities", d.params.n_communities},
          {"community_size", d.params.community_size},
          {"theta_on", d.params.theta_on},
          {"sigma_x", d.params.sigma_x},
          {"n_pairs", d.n_pairs},
          {"seed", d.seed}};
}

json to_json(const ArmSpec& a) {
  json loss{{"kind", to_string(a.loss.kind)},
            {"inner_metric", to_string(a.loss.inner_metric)},
            {"n_adj", a.loss.n_adj},
            {"control_variates", a.loss.control_variates},
            {"kernel",
             {{"kind", to_string(a.loss.kernel.kind)},
              {"sigma", a.loss.kernel.sigma},
              {"alpha", a.loss.kernel.alpha}}},
            {"elbo_sigma", a.loss.elbo_sigma},
            {"baseline_momentum", a.loss.baseline_momentum}};
  if (!a.elbo_prior.empty()) loss["elbo_prior"] = a.elbo_prior;
  const TrainConfig& t = a.train;
  json train{{"lr_initial", t.lr_initial},         {"lr_after_drop", t.lr_after_drop},
             {"drop_epoch", t.drop_epoch},         {"batch_size", t.batch_size},
             {"epochs", t.epochs},                 {"seed", t.seed},
             {"freeze_psi", t.freeze_psi},         {"theta_init_low", t.theta_init_low},
             {"theta_init_high", t.theta_init_high}, {"adam_beta1", t.adam_beta1},
             {"adam_beta2", t.adam_beta2},         {"adam_eps", t.adam_eps},
             {"psi_init_range", t.psi_init_range}, {"val_dist_adj", t.val_dist_adj},
             {"val_point_adj", t.val_point_adj},   {"test_point_adj", t.test_point_adj},
             {"val_max_pairs", t.val_max_pairs},   {"evals_per_epoch", t.evals_per_epoch}};
  if (t.dist_threshold) train["dist_threshold"] = *t.dist_threshold;
  if (t.lr_decay != 1.0) train["lr_decay"] = t.lr_decay;
  json j{{"name", a.name},
         {"loss", loss},
         {"train", train},
         {"model", {{"source", to_string(a.model)}, {"perturbation", a.perturbation}}}};
  if (!a.frozen_edges.empty()) {
    json frozen = json::array();
    for (const auto& f : a.frozen_edges) frozen.push_back({f.from, f.to, f.value});
    j["theta"] = {{"frozen", frozen}};
  }
  if (a.elbo_grid) j["elbo_grid"] = {{"priors", a.elbo_grid->priors}, {"sigmas", a.elbo_grid->sigmas}};
  return j;
}

json to_json(const ExperimentSpec& e) {
  json arms = json::array();
  for (const auto& a : e.arms) arms.push_back(to_json(a));
  return {{"dataset", to_json(e.dataset)},
          {"experiment", {{"name", e.name}, {"seeds", e.seeds}, {"arms", arms}}}};
}

}  // namespace lgc
