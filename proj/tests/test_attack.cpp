#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stealth/attack.hpp"
#include "stealth/errors.hpp"
#include "stealth/experiments.hpp"
#include "stealth/info_rate.hpp"

using namespace stealth;

namespace {

AttackProblem problem_for(const Policy& pi, double gamma_bar) {
  return AttackProblem{.victim = pi,
                       .adversary_reward = {},
                       .attack_discount = gamma_bar,
                       .epsilon = kInfinity,
                       .distance = {},
                       .penalty = 0.0};
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("attack policy construction") {
  auto id = AttackPolicy::identity(2, 3);
  CHECK(id.is_identity());
  CHECK(id.is_deterministic());
  std::vector<std::size_t> rep{1, 1, 2, 0, 0, 0};
  auto det = AttackPolicy::deterministic(2, 3, rep);
  CHECK(det.replacement(0, 0) == 1);
  CHECK(det(1, 0, 0) == 1.0);
  CHECK_FALSE(det.is_identity());
  CHECK_THROWS_AS(AttackPolicy(2, 3, Vector(17, 0.0)), InvalidInput);
  Vector bad(2 * 3 * 3, 0.0);
  CHECK_THROWS_AS(AttackPolicy(2, 3, bad), InvalidInput);
}

TEST_CASE("composition mixes the victim through the replacement law") {
  std::mt19937_64 g(1);
  auto pi = oracle::random_policy(g, 3, 2);
  auto phi = oracle::random_attack(g, 3, 2);
  auto c = phi.compose(pi);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t b = 0; b < 2; ++b) {
      double expect = 0.0;
      for (std::size_t a = 0; a < 2; ++a) expect += pi(s, a) * phi(s, a, b);
      CHECK(c(s, b) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("attack MDP structure") {
  std::mt19937_64 g(2);
  auto m = oracle::random_mdp(g, 3, 2, 0.3);
  std::vector<std::size_t> act{1, 0, 1};
  auto pi = Policy::deterministic(2, act);
  auto am = build_attack_mdp(m, problem_for(pi, 0.9));
  CHECK(am.n_states() == 6);
  CHECK(am.n_actions() == 2);
  for (std::size_t x = 0; x < 6; ++x)
    for (std::size_t b = 0; b < 2; ++b) {
      double total = 0.0;
      for (std::size_t y = 0; y < 6; ++y) {
        const double p = am.prob(x, b, y);
        total += p;
        // only (s', pi(s')) pairs receive mass
        if (p > 0.0) CHECK(y % 2 == act[y / 2]);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("identity attack value is the negated victim value") {
  std::mt19937_64 g(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = oracle::random_mdp(g, 4, 3);
    auto pi = oracle::random_policy(g, 4, 3);
    const double gb = 0.8;
    auto rbar = adversary_reward_tensor(m, RewardModel::intended);
    auto val = attack_value(m, pi, AttackPolicy::identity(4, 3), rbar, gb);
    auto vref = oracle::policy_value(m, pi, gb);
    for (std::size_t s = 0; s < 4; ++s) {
      double avg = 0.0;
      for (std::size_t a = 0; a < 3; ++a) avg += pi(s, a) * val.per_pair[s * 3 + a];
      CHECK(avg == doctest::Approx(-vref[s]).epsilon(1e-10));
      CHECK(val.per_state[s] == doctest::Approx(-vref[s]).epsilon(1e-10));
    }
  }
}

TEST_CASE("attack value agrees with evaluation on the attack MDP") {
  std::mt19937_64 g(4);
  auto m = oracle::random_mdp(g, 3, 2);
  auto pi = oracle::random_policy(g, 3, 2);
  auto phi = oracle::random_attack(g, 3, 2);
  auto am = build_attack_mdp(m, problem_for(pi, 0.85));
  auto val = attack_value(m, pi, phi, am.rewards(), 0.85);
  // phi viewed as a policy of the attack MDP
  Vector probs(phi.probs());
  auto ref = oracle::policy_value(am, Policy(6, 2, probs), 0.85);
  for (std::size_t x = 0; x < 6; ++x) CHECK(val.per_pair[x] == doctest::Approx(ref[x]).epsilon(1e-10));
}

TEST_CASE("perturbed kernel") {
  std::mt19937_64 g(5);
  auto m = oracle::random_mdp(g, 4, 3, 0.3);
  CHECK(perturbed_kernel(m, AttackPolicy::identity(4, 3)) == m.transition());
  auto phi = oracle::random_attack(g, 4, 3, 0.3);
  auto k = perturbed_kernel(m, phi);
  for (std::size_t i = 0; i < 12; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 4; ++j) total += k[i * 4 + j];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  // sampling oracle on three rows: draw b from phi, then s' from P(s,b)
  std::mt19937_64 h(6);
  for (std::size_t sa : {0u, 5u, 11u}) {
    const std::size_t s = sa / 3, a = sa % 3;
    Vector counts(4, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      std::discrete_distribution<std::size_t> pb(phi.row(s, a).begin(), phi.row(s, a).end());
      const std::size_t b = pb(h);
      std::discrete_distribution<std::size_t> ps(m.row(s, b).begin(), m.row(s, b).end());
      counts[ps(h)] += 1.0 / n;
    }
    CHECK(tv_distance(counts, std::span<const double>(k.data() + sa * 4, 4)) <= 1e-2);
  }
}

TEST_CASE("continuity mask") {
  TabularMdp m(2, 3, {1, 0, 0.5, 0.5, 0, 1, 0.2, 0.8, 0.2, 0.8, 1, 0}, {0, 0, 0, 0, 0, 0}, 0.0, {0.5, 0.5}, 0.9);
  auto mask = continuity_mask(m);
  CHECK(mask[(0 * 3 + 1) * 3 + 0] == 1);  // (1,0) << (.5,.5)
  CHECK(mask[(0 * 3 + 0) * 3 + 1] == 0);
  CHECK(mask[(0 * 3 + 0) * 3 + 2] == 0);
  CHECK(mask[(1 * 3 + 0) * 3 + 1] == 1);
  CHECK(mask[(1 * 3 + 0) * 3 + 2] == 1);
  CHECK(mask[(1 * 3 + 2) * 3 + 0] == 0);
}

TEST_CASE("zero budget keeps the identity") {
  std::mt19937_64 g(7);
  auto m = oracle::random_mdp(g, 4, 3);
  auto pi = oracle::random_policy(g, 4, 3);
  auto prob = problem_for(pi, 0.9);
  prob.epsilon = 0.0;
  auto phi = solve_constrained_attack(m, prob);
  CHECK(phi.is_identity());
  auto v = victim_value(m, pi, phi, 0.9, RewardModel::intended);
  auto ref = oracle::policy_value(m, pi, 0.9);
  for (std::size_t s = 0; s < 4; ++s) CHECK(v[s] == doctest::Approx(ref[s]).epsilon(1e-12));
}

TEST_CASE("unconstrained attack beats every deterministic replacement") {
  std::mt19937_64 g(8);
  for (int rep = 0; rep < 3; ++rep) {
    auto m = oracle::random_mdp(g, 3, 3);
    auto pi = oracle::random_policy(g, 3, 3);
    auto prob = problem_for(pi, 0.9);
    auto rbar = resolved_adversary_reward(m, prob);
    auto best = attack_value(m, pi, solve_constrained_attack(m, prob), rbar, 0.9);
    std::size_t worse = 0;
    oracle::for_each_deterministic(9, 3, [&](const std::vector<std::size_t>& c) {
      auto v = attack_value(m, pi, AttackPolicy::deterministic(3, 3, c), rbar, 0.9);
      for (std::size_t s = 0; s < 3; ++s)
        if (v.per_state[s] > best.per_state[s] + 1e-9) ++worse;
    });
    CHECK(worse == 0);
  }
}

TEST_CASE("penalized attack limits") {
  std::mt19937_64 g(9);
  for (int rep = 0; rep < 10; ++rep) {
    auto m = oracle::random_mdp(g, 4, 3);
    auto pi = oracle::random_policy(g, 4, 3);
    auto prob = problem_for(pi, 0.9);
    prob.penalty = 1e9;
    auto phi = solve_penalized_attack(m, prob);
    CHECK(phi.is_identity());
    CHECK(upper_information_rate(m, pi, phi) == 0.0);

    prob.penalty = 0.0;
    auto rbar = resolved_adversary_reward(m, prob);
    auto pen = attack_value(m, pi, solve_penalized_attack(m, prob), rbar, 0.9);
    prob.epsilon = kInfinity;
    auto con = attack_value(m, pi, solve_constrained_attack(m, prob), rbar, 0.9);
    for (std::size_t s = 0; s < 4; ++s) CHECK(pen.per_state[s] == doctest::Approx(con.per_state[s]).epsilon(1e-10));
  }
}

TEST_CASE("distance validation") {
  std::mt19937_64 g(10);
  auto m = oracle::random_mdp(g, 2, 2);
  auto prob = problem_for(Policy::uniform(2, 2), 0.9);
  prob.distance = {0, 1, 2, 0};
  CHECK_THROWS_AS(solve_constrained_attack(m, prob), InvalidInput);
  prob.distance = {0, 1};
  CHECK_THROWS_AS(solve_constrained_attack(m, prob), InvalidInput);
  CHECK(action_distance_abs(3) == Vector{0, 1, 2, 1, 0, 1, 2, 1, 0});
}

TEST_CASE("inventory constrained attack at epsilon 3 hurts and is detectable") {
  auto setup = make_inventory_setup(InventoryParams{}, RewardModel::executed, 0.95);
  auto p = constrained_point(setup, 3.0);
  REQUIRE(p.status == "ok");
  CHECK(p.normalized_reward < 0.9);
  CHECK(p.info_rate > 0.0);
  auto zero = constrained_point(setup, 0.0);
  CHECK(zero.normalized_reward == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
