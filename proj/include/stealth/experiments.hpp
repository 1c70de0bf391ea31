#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stealth/attack.hpp"
#include "stealth/detection.hpp"
#include "stealth/info_rate.hpp"
#include "stealth/inventory.hpp"
#include "stealth/io.hpp"
#include "stealth/mdp.hpp"

namespace stealth {

inline constexpr int kCsvSchemaVersion = 1;

/// Inventory instance with its optimal victim policy and the quantities
/// every inventory pipeline shares.
struct InventorySetup {
  TabularMdp mdp;
  Policy victim;
  Vector victim_stationary;  // mu^pi
  Vector alpha;              // uniform start for the discounted problems
  RewardModel model;
  double attack_discount;
  Vector adversary_reward;
  double base_value;  // mu^pi . V^pi
};

InventorySetup make_inventory_setup(const InventoryParams& params, RewardModel model, double attack_discount);
InventorySetup make_inventory_setup(const ExperimentConfig& cfg);

/// mu^pi . V^{phi o pi} / mu^pi . V^pi
double normalized_victim_reward(const InventorySetup& setup, const AttackPolicy& phi);

struct AttackPoint {
  std::string kind;  // constrained, lp, penalized
  double parameter = 0.0;
  std::string status = "ok";
  std::optional<AttackPolicy> policy;
  double normalized_reward = 0.0;
  double info_rate = 0.0;
  double upper_rate = 0.0;
  double discounted_rate = 0.0;
  double adversary_value = 0.0;
};

AttackPoint constrained_point(const InventorySetup& setup, double epsilon);
AttackPoint lp_point(const InventorySetup& setup, double epsilon);
AttackPoint penalized_point(const InventorySetup& setup, double penalty);

struct GammaSweepRow {
  double epsilon = 0.0;
  double attack_discount = 0.0;
  double info_rate = 0.0;
  double upper_rate = 0.0;
  double discounted_rate = 0.0;
  double gap = 0.0;    // upper_rate - discounted_rate
  double bound = 0.0;  // error bound at attack_discount, NaN below gamma0
  MixingBound mixing;
  std::string status = "ok";
};

GammaSweepRow gamma_sweep_point(const InventoryParams& params, RewardModel model, double epsilon,
                                double attack_discount);

struct RunReport {
  std::vector<std::filesystem::path> files;
  Json summary;
};

/// Runs cfg.experiment, writing CSV files and manifest.json into out_dir.
RunReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace stealth
