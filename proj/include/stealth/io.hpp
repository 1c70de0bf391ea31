#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "stealth/attack.hpp"
#include "stealth/errors.hpp"
#include "stealth/inventory.hpp"
#include "stealth/linear_attack.hpp"
#include "stealth/mdp.hpp"

namespace stealth {

using Json = nlohmann::ordered_json;

/// Schema violation; the message starts with the offending field path.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& path, const std::string& what) : InvalidInput(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

Json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const Json& doc);

Json attack_policy_to_json(const AttackPolicy& phi);
AttackPolicy attack_policy_from_json(const Json& doc);

/// Square matrix of action distances, one row per line, comma separated.
Vector load_distance_csv(const std::filesystem::path& path, std::size_t n_actions);

struct AttackSettings {
  double attack_discount = 0.95;
  RewardModel reward_model = RewardModel::executed;
  std::vector<double> constrained_epsilons{0, 1, 2, 3, 4, 5, 6, 8, 10};
  std::vector<double> lp_epsilons{0.02, 0.05, 0.1, 0.15, 0.21, 0.3, 0.4, 0.5, 0.6, 0.8};
  std::vector<double> penalties{0.5, 1, 2, 4, 6.2, 8, 12, 50, 100, 150, 200, 250, 300, 500};
  double constrained_epsilon = 3.0;
  double lp_epsilon = 0.21;
  double penalty = 6.2;
};

struct DetectorSettings {
  double delta = 0.01;
  std::size_t horizon = 1000;
  std::size_t change_time = 25;
  std::size_t max_steps = 20000;
  std::size_t trace_length = 200;
};

struct SweepSettings {
  std::vector<double> epsilons{0.05, 0.1, 0.21, 0.3, 0.5};
  std::vector<double> attack_discounts{0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999};
};

struct LinearSettings {
  Eigen::MatrixXd a, b, k, sigma;  // defaults to the two-dimensional example
  std::vector<double> betas{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35};
  std::size_t horizon = 100;
  std::size_t change_time = 25;
  std::size_t value_horizon = 200;
  double frontier_tol = 1e-6;
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  std::size_t trials = 100;
  unsigned threads = 0;  // not part of the hash: results do not depend on it
  InventoryParams inventory;
  AttackSettings attack;
  DetectorSettings detector;
  SweepSettings sweep;
  LinearSettings linear;

  LinearSystem linear_system() const;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"inventory-tradeoff", "inventory-detect", "inventory-gamma-sweep",
                                              "linear-attack", "linear-frontier"};
  return names;
}

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ConfigError naming the field path. Missing fields take defaults.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration with every default filled in.
Json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical resolved configuration (without threads).
std::string config_hash(const ExperimentConfig& cfg);

const char* library_version();
const char* reward_model_name(RewardModel model);

}  // namespace stealth
