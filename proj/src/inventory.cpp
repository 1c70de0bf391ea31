#include "stealth/inventory.hpp"

#include <algorithm>
#include <cmath>

#include "stealth/errors.hpp"

namespace stealth {

void validate(const InventoryParams& p) {
  if (p.capacity < 1) throw InvalidInput("inventory.capacity must be >= 1");
  if (!(p.fixed_order_cost > 0.0)) throw InvalidInput("inventory.fixed_order_cost must be positive");
  if (!(p.unit_cost > 0.0)) throw InvalidInput("inventory.unit_cost must be positive");
  if (!(p.holding_cost > 0.0)) throw InvalidInput("inventory.holding_cost must be positive");
  if (!(p.unit_price > 0.0)) throw InvalidInput("inventory.unit_price must be positive");
  if (!(p.unit_price > p.holding_cost)) throw InvalidInput("inventory.unit_price must exceed holding_cost");
  if (!(p.demand_rate > 0.0) || !std::isfinite(p.demand_rate))
    throw InvalidInput("inventory.demand_rate must be positive");
  check_discount(p.discount, "inventory.discount");
}

double inventory_stage_reward(const InventoryParams& p, std::size_t s, std::size_t a, std::size_t next) {
  const std::size_t m = std::min(p.capacity, s + a);
  const double order = a > 0 ? p.fixed_order_cost : 0.0;
  return -order - p.holding_cost * static_cast<double>(s) - p.unit_cost * static_cast<double>(m - s) +
         p.unit_price * static_cast<double>(m > next ? m - next : 0);
}

TabularMdp build_inventory(const InventoryParams& params) {
  validate(params);
  const std::size_t S = params.capacity + 1, A = S;
  Vector pmf(S, 0.0);
  pmf[0] = std::exp(-params.demand_rate);
  for (std::size_t d = 1; d < S; ++d) pmf[d] = pmf[d - 1] * params.demand_rate / static_cast<double>(d);

  Vector transition(S * A * S, 0.0), reward(S * A, 0.0);
  double bound = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double* row = transition.data() + (s * A + a) * S;
      const std::size_t m = std::min(params.capacity, s + a);
      double body = 0.0;
      for (std::size_t j = m; j >= 1; --j) {
        row[j] = pmf[m - j];
        body += row[j];
      }
      row[0] = std::max(0.0, 1.0 - body);
      double r = 0.0;
      for (std::size_t j = 0; j <= m; ++j)
        if (row[j] > 0.0) r += row[j] * inventory_stage_reward(params, s, a, j);
      reward[s * A + a] = r;
      bound = std::max(bound, std::fabs(r));
    }
  return TabularMdp(S, A, std::move(transition), std::move(reward), bound,
                    Vector(S, 1.0 / static_cast<double>(S)), params.discount);
}

}  // namespace stealth
