#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stealth/attack.hpp"
#include "stealth/mdp.hpp"
#include "stealth/rng.hpp"

namespace stealth {

struct Step {
  std::size_t state;
  std::size_t action;
  std::size_t executed;
  std::size_t next;
};

struct Trajectory {
  std::vector<Step> steps;
  std::size_t change_time = 0;
  std::uint64_t seed = 0;
};

/// Samples the attacked closed loop. Holds the pi-stationary law used for
/// initial states.
class ChainSampler {
 public:
  ChainSampler(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi);

  std::size_t initial_state(Rng& rng) const { return rng.categorical(stationary_); }
  Step step(Rng& rng, std::size_t state, bool attacked) const;
  const Vector& stationary() const { return stationary_; }

 private:
  const TabularMdp& mdp_;
  const Policy& pi_;
  const AttackPolicy& phi_;
  Vector stationary_;
};

/// a_t ~ pi always, the replacement applies for t >= change_time, and the
/// first state is drawn from the stationary law of pi.
Trajectory simulate_trajectory(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                               std::size_t change_time, std::size_t horizon, std::uint64_t seed);

}  // namespace stealth
