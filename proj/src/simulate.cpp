#include "stealth/simulate.hpp"

#include "stealth/errors.hpp"

namespace stealth {

ChainSampler::ChainSampler(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi)
    : mdp_(mdp), pi_(pi), phi_(phi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
    throw InvalidInput("policy shape does not match mdp");
  if (phi.n_states() != mdp.n_states() || phi.n_actions() != mdp.n_actions())
    throw InvalidInput("attack policy shape does not match mdp");
  stationary_ = stationary_distribution(mdp, pi);
}

Step ChainSampler::step(Rng& rng, std::size_t state, bool attacked) const {
  const std::size_t a = rng.categorical(pi_.row(state));
  const std::size_t b = attacked ? rng.categorical(phi_.row(state, a)) : a;
  const std::size_t next = rng.categorical(mdp_.row(state, b));
  return {state, a, b, next};
}

Trajectory simulate_trajectory(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                               std::size_t change_time, std::size_t horizon, std::uint64_t seed) {
  if (change_time > horizon) throw InvalidInput("change time exceeds horizon");
  const ChainSampler sampler(mdp, pi, phi);
  Rng rng(seed);
  Trajectory tr;
  tr.change_time = change_time;
  tr.seed = seed;
  tr.steps.reserve(horizon);
  std::size_t s = sampler.initial_state(rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    const Step st = sampler.step(rng, s, t >= change_time);
    tr.steps.push_back(st);
    s = st.next;
  }
  return tr;
}

}  // namespace stealth
