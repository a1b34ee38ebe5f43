#pragma once

// JSON experiment configuration: schema check, defaults, header echo and
// construction of the client problem for one seed.
//
// Sections: model, data, channel, training, run, sweep, validation. Every
// key is optional; unknown keys and mistyped values are rejected by name.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otapfl/channel.h"
#include "otapfl/data.h"
#include "otapfl/models.h"
#include "otapfl/theory.h"
#include "otapfl/training.h"

namespace otapfl {

/// Schema or constraint violation in a configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class DataSource { kTeacher, kClustered, kCsv };

struct DataConfig {
  DataSource source = DataSource::kTeacher;
  FederatedTaskConfig task;  // K, d, class counts, heterogeneity, alpha
  double noisy_client_ratio = 0.0;
  double level_lower_bound = 0.5;
  std::optional<std::uint64_t> problem_seed;  // default: the run seed
  // CSV source: one pooled file, partitioned over K clients and split
  // per client into train/test.
  std::string path;
  std::string label_column = "label";
  PartitionScheme scheme = PartitionScheme::kDirichlet;
  double test_fraction = 0.2;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kLogisticL2;
  double rho = 0.01;
  std::vector<int> hidden{16};
  QuadraticEnsembleConfig ensemble;  // K and d mirror the data section
};

struct RunConfig {
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out = "out";
  bool bound_validation = false;
  std::optional<int> workers;
  bool resume = false;
};

struct SweepConfig {
  std::vector<double> lambda;
  std::vector<int> K;
  std::vector<double> noisy_client_ratio;
};

struct ValidationConfig {
  std::vector<double> lambdas{0.1, 1.0, 10.0};
  double eta_l_scale = 0.5;
  double radius_factor = 1.25;
  double rate_lambda = 1.0;
};

struct ExperimentConfig {
  ModelConfig model;
  DataConfig data;
  ChannelModel channel;
  TrainerConfig trainer;
  // eta_g as a multiple of the computed eta_g_max; replaces training.eta_g.
  std::optional<double> eta_g_relative;
  RunConfig run;
  SweepConfig sweep;
  ValidationConfig validation;
  nlohmann::ordered_json effective;  // every key with defaults applied

  /// "section.key=value" for every effective parameter, sorted by section
  /// order then key.
  std::vector<std::string> echo_lines() const;
};

/// Parses and validates a JSON document. `origin` prefixes error messages.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin = "config");

/// Reads `path` and parses it. When run.bound_validation is set, the
/// configured eta_g is checked against eta_g_max of the seed-0 problem.
/// Throws IoError for unreadable files and ConfigError otherwise.
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Parses an already-loaded document (missing keys take defaults).
ExperimentConfig config_from_json(const nlohmann::ordered_json& doc,
                                  const std::string& origin = "config");

/// Merges `patch` (same section layout) into the effective document of
/// `base` and re-validates, including the bound-validation step size check.
ExperimentConfig apply_overrides(const ExperimentConfig& base,
                                 const nlohmann::ordered_json& patch);

/// Rejects eta_g >= eta_g_max (message carries the computed maximum) when
/// run.bound_validation is set; no-op otherwise.
void check_step_size(const ExperimentConfig& cfg);

/// Client problem for one seed: losses, shards (after label noise) and
/// optima where they are known in closed form.
Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed);

struct ProblemTheory {
  TheoryConstants constants;
  double eta_g_max = 0.0;
  double radius = 0.0;  // ball containing w0 and every optimum
  ClientOptima optima;
};

/// Constants and eta_g_max of a convex problem. delta is twice the
/// configured projection radius, or twice radius_factor times the largest
/// optimum norm when no radius is configured.
ProblemTheory problem_theory(const ExperimentConfig& cfg, const Problem& problem);

/// Trainer settings for one seed: eta_g resolved from eta_g_relative,
/// projection enabled for bound validation, seeds applied.
TrainerConfig trainer_for(const ExperimentConfig& cfg, const Problem& problem,
                          std::uint64_t seed);

}  // namespace otapfl
