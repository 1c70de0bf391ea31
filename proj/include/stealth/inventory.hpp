#pragma once

#include <cstddef>

#include "stealth/mdp.hpp"

namespace stealth {

struct InventoryParams {
  std::size_t capacity = 35;       // N
  double fixed_order_cost = 3.0;   // k
  double unit_cost = 2.0;          // c
  double holding_cost = 2.0;       // h
  double unit_price = 4.0;         // p
  double demand_rate = 6.0;        // lambda, Poisson
  double discount = 0.95;
};

void validate(const InventoryParams& params);

/// States and actions are 0..N. With m = min(N, s + a) units on hand after
/// ordering and Poisson demand d, the next level is max(0, m - d); the
/// stock-out row lumps the whole demand tail, so rows sum to one exactly.
/// Stage reward: -k 1{a>0} - h s - c (m - s) + p (m - s').
/// The initial distribution is uniform.
TabularMdp build_inventory(const InventoryParams& params);

/// r(s, a, s') before taking the expectation over s'.
double inventory_stage_reward(const InventoryParams& params, std::size_t s, std::size_t a, std::size_t next);

}  // namespace stealth
