#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "stealth/experiments.hpp"
#include "stealth/io.hpp"

using namespace stealth;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("stealth_io_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small(const std::string& experiment) {
  Json doc = Json::parse(R"({
    "seed": 3, "trials": 10,
    "inventory": {"capacity": 8, "demand_rate": 2.0},
    "attack": {"constrained_epsilons": [0, 2], "lp_epsilons": [0.1], "penalties": [5],
               "constrained_epsilon": 2, "lp_epsilon": 0.1, "penalty": 5},
    "detector": {"max_steps": 3000, "trace_length": 30},
    "sweep": {"epsilons": [0.1], "attack_discounts": [0.9]},
    "linear": {"betas": [0.1, 0.25, 0.5], "horizon": 30, "value_horizon": 40}
  })");
  doc["experiment"] = experiment;
  return parse_config(doc);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("defaults and strict parsing") {
  auto cfg = parse_config(Json::object());
  CHECK(cfg.seed == 1);
  CHECK(cfg.trials == 100);
  CHECK(cfg.detector.delta == 0.01);
  CHECK(cfg.inventory.capacity == 35);
  try {
    parse_config(Json::parse(R"({"detector": {"threshold": 3}})"));
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "detector.threshold");
  }
  try {
    parse_config(Json::parse(R"({"attack": {"lp_epsilons": [0.1, "wide"]}})"));
    FAIL("bad type accepted");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "attack.lp_epsilons[1]");
  }
  CHECK_THROWS_AS(parse_config(Json::parse(R"({"detector": {"delta": 1.5}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(Json::parse(R"({"trials": -4})")), ConfigError);
}

TEST_CASE("resolved config round trips") {
  auto cfg = small("inventory-tradeoff");
  auto again = parse_config(config_to_json(cfg));
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("config hash tracks fields but not threads") {
  auto base = small("inventory-tradeoff");
  const auto h = config_hash(base);
  auto t = base;
  t.threads = 7;
  CHECK(config_hash(t) == h);
  auto s = base;
  s.seed = 4;
  CHECK(config_hash(s) != h);
  auto d = base;
  d.detector.delta = 0.02;
  CHECK(config_hash(d) != h);
  auto e = base;
  e.attack.lp_epsilons.push_back(0.5);
  CHECK(config_hash(e) != h);
}

TEST_CASE("mdp and attack policy json round trip") {
  std::mt19937_64 g(1);
  auto m = oracle::random_mdp(g, 3, 2, 0.2);
  auto back = mdp_from_json(Json::parse(mdp_to_json(m).dump()));
  CHECK(back.transition() == m.transition());
  CHECK(back.rewards() == m.rewards());
  CHECK(back.initial_dist() == m.initial_dist());
  CHECK(back.discount() == m.discount());
  auto phi = oracle::random_attack(g, 3, 2);
  auto phi2 = attack_policy_from_json(Json::parse(attack_policy_to_json(phi).dump()));
  CHECK(phi2.probs() == phi.probs());
  Json broken = mdp_to_json(m);
  broken["transition"][0] = 2.0;
  CHECK_THROWS_AS(mdp_from_json(broken), InvalidInput);
}

TEST_CASE("distance csv") {
  auto dir = scratch("distance");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "d.csv");
    out << "0,1,2\n1,0,1\n2,1,0\n";
  }
  CHECK(load_distance_csv(dir / "d.csv", 3) == action_distance_abs(3));
  CHECK_THROWS_AS(load_distance_csv(dir / "d.csv", 2), InvalidInput);
  {
    std::ofstream out(dir / "bad.csv");
    out << "0,1\n1,x\n";
  }
  CHECK_THROWS_AS(load_distance_csv(dir / "bad.csv", 2), InvalidInput);
  fs::remove_all(dir);
}

TEST_CASE("reruns are byte identical and thread independent") {
  for (const auto& name : experiment_names()) {
    auto cfg = small(name);
    auto a = scratch("a"), b = scratch("b");
    cfg.threads = 1;
    auto ra = run_experiment(cfg, a);
    cfg.threads = 4;
    auto rb = run_experiment(cfg, b);
    REQUIRE(ra.files.size() == rb.files.size());
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
      INFO(name << " " << ra.files[i].filename().string());
      CHECK(slurp(ra.files[i]) == slurp(rb.files[i]));
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("manifest fields") {
  auto cfg = small("linear-frontier");
  auto dir = scratch("manifest");
  auto rep = run_experiment(cfg, dir);
  auto man = Json::parse(slurp(dir / "manifest.json"));
  CHECK(man["experiment"] == "linear-frontier");
  CHECK(man["csv_schema_version"] == kCsvSchemaVersion);
  CHECK(man["config_hash"] == config_hash(cfg));
  CHECK(man["seed"] == 3);
  CHECK(man["library_version"] == library_version());
  CHECK(man["files"].size() + 1 == rep.files.size());
  for (const auto& f : man["files"]) CHECK(fs::exists(dir / f.get<std::string>()));
  fs::remove_all(dir);
}

TEST_CASE("infeasible points keep their row with a status") {
  auto cfg = small("linear-frontier");
  auto dir = scratch("status");
  run_experiment(cfg, dir);
  const std::string csv = slurp(dir / "frontier_curve.csv");
  CHECK(csv.find("0.5,nan,nan,nan,infeasible") != std::string::npos);
  CHECK(csv.find(",ok\n") != std::string::npos);
  fs::remove_all(dir);
}

}  // TEST_SUITE
