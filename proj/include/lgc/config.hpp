#pragma once
// Run and experiment configuration. Files are JSON; sections may be nested
// objects ({"loss": {"kind": ...}}) or flat dotted keys ({"loss.kind": ...}).
#include "lgc/datagen.hpp"
#include "lgc/losses.hpp"
#include "lgc/trainer.hpp"
#include <nlohmann/json.hpp>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lgc {

struct DatasetSpec {
  GroundTruthParams params;
  std::size_t n_pairs = 35000;
  std::uint64_t seed = 42;
};

enum class ModelSource { joint, true_psi, perturbed };
std::string to_string(ModelSource s);
ModelSource model_source_from_string(const std::string& name);

/// Fixed ELBO hyperparameter grid, searched on the first seed and selected by
/// validation point MSE.
struct ElboGrid {
  std::vector<std::string> priors;
  std::vector<double> sigmas;
};

/// One training recipe: loss, optimiser, where psi comes from and which
/// theta entries are pinned.
struct ArmSpec {
  std::string name;
  LossConfig loss;
  std::string elbo_prior;  // "uniform:<p>" or "pattern:<on>:<off>"; resolved per dataset
  TrainConfig train;
  ModelSource model = ModelSource::joint;
  double perturbation = 0.0;
  std::vector<FrozenEdge> frozen_edges;
  std::optional<ElboGrid> elbo_grid;
};

struct ExperimentSpec {
  std::string name;
  DatasetSpec dataset;
  std::vector<ArmSpec> arms;
  std::vector<std::uint64_t> seeds;
};

/// Replaces every dotted key "a.b" by nested objects, recursively.
nlohmann::json expand_dotted(const nlohmann::json& j);
nlohmann::json read_config(const std::filesystem::path& file);

DatasetSpec parse_dataset(const nlohmann::json& root);
/// Reads the loss/train/model sections of `root`; unknown keys are errors.
ArmSpec parse_arm(const nlohmann::json& root);
ExperimentSpec parse_experiment(const nlohmann::json& root);

/// Builds the prior named by an ELBO prior string for the given ground truth.
EdgeDistribution make_prior(const std::string& spec, const GroundTruth& gt);

/// Arm with its prior resolved against the ground truth.
LossConfig resolved_loss(const ArmSpec& arm, const GroundTruth& gt);

nlohmann::json to_json(const DatasetSpec& d);
nlohmann::json to_json(const ArmSpec& a);
nlohmann::json to_json(const ExperimentSpec& e);

}  // namespace lgc
