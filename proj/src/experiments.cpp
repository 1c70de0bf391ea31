#include "stealth/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "stealth/errors.hpp"
#include "stealth/linear_attack.hpp"
#include "stealth/rng.hpp"
#include "stealth/simulate.hpp"
#include "stealth/stealth_lp.hpp"

namespace stealth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

Json json_num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header) : out_(path), path_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

std::string error_status(const std::exception& e) {
  if (dynamic_cast<const Infeasible*>(&e)) return "infeasible";
  if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical_error";
  if (dynamic_cast<const StructureError*>(&e)) return "structure_error";
  return "error";
}

// Stream ids keep the random sources of different pipeline stages apart.
enum Stream : std::uint64_t {
  kStreamMonteCarlo = 1,
  kStreamDelay = 100,
  kStreamTrace = 200,
  kStreamFalseAlarm = 300,
  kStreamLinear = 400,
};

AttackProblem attack_problem(const InventorySetup& setup) {
  return AttackProblem{.victim = setup.victim,
                       .adversary_reward = setup.adversary_reward,
                       .attack_discount = setup.attack_discount,
                       .epsilon = kInfinity,
                       .distance = {},
                       .penalty = 0.0};
}

void fill_rates(const InventorySetup& setup, AttackPoint& point) {
  const auto report = info_rate_report(setup.mdp, setup.victim, *point.policy, setup.attack_discount, setup.alpha);
  point.info_rate = report.rate;
  point.upper_rate = report.upper_rate;
  point.discounted_rate = report.discounted_rate;
  point.normalized_reward = normalized_victim_reward(setup, *point.policy);
}

double alpha_value(const InventorySetup& setup, const AttackPolicy& phi) {
  const auto v = attack_value(setup.mdp, setup.victim, phi, setup.adversary_reward, setup.attack_discount);
  double total = 0.0;
  for (std::size_t s = 0; s < v.per_state.size(); ++s) total += setup.alpha[s] * v.per_state[s];
  return total;
}

template <class Solve>
AttackPoint guarded_point(const char* kind, double parameter, Solve&& solve) {
  AttackPoint point;
  point.kind = kind;
  point.parameter = parameter;
  try {
    solve(point);
  } catch (const InvalidInput&) {
    throw;
  } catch (const Error& e) {
    point.status = error_status(e);
    point.policy.reset();
    point.normalized_reward = point.info_rate = point.upper_rate = point.discounted_rate = point.adversary_value =
        kNaN;
  }
  return point;
}

struct MonteCarloReward {
  double mean = kNaN;
  double ci_low = kNaN;
  double ci_high = kNaN;
};

// Discounted victim reward from the pi-stationary law with the attack active
// throughout, normalized by the exact unattacked value.
MonteCarloReward monte_carlo_reward(const InventorySetup& setup, const AttackPolicy& phi, std::size_t trials,
                                    std::uint64_t seed, unsigned threads) {
  const double gamma = setup.mdp.discount();
  const auto horizon = static_cast<std::size_t>(std::ceil(std::log(1e-10) / std::log(gamma)));
  const ChainSampler sampler(setup.mdp, setup.victim, phi);
  Vector totals(trials, 0.0);
  parallel_for(trials, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    std::size_t s = sampler.initial_state(rng);
    double total = 0.0, weight = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const Step st = sampler.step(rng, s, true);
      const std::size_t paid = setup.model == RewardModel::executed ? st.executed : st.action;
      total += weight * setup.mdp.reward(st.state, paid);
      weight *= gamma;
      s = st.next;
    }
    totals[i] = total / setup.base_value;
  });
  MonteCarloReward out;
  if (trials == 0) return out;
  double mean = 0.0;
  for (double x : totals) mean += x;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double x : totals) var += (x - mean) * (x - mean);
  var = trials > 1 ? var / static_cast<double>(trials - 1) : 0.0;
  const double half = 2.5758293035489 * std::sqrt(var / static_cast<double>(trials));
  out.mean = mean;
  out.ci_low = mean - half;
  out.ci_high = mean + half;
  return out;
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

// ---- inventory-tradeoff ----

Json run_tradeoff(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::vector<std::filesystem::path>& files) {
  const InventorySetup setup = make_inventory_setup(cfg);
  struct Job {
    const char* kind;
    double parameter;
  };
  std::vector<Job> jobs;
  for (double e : cfg.attack.constrained_epsilons) jobs.push_back({"constrained", e});
  for (double e : cfg.attack.lp_epsilons) jobs.push_back({"lp", e});
  for (double b : cfg.attack.penalties) jobs.push_back({"penalized", b});

  std::vector<AttackPoint> points(jobs.size());
  std::vector<MonteCarloReward> mc(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    const std::string kind = jobs[i].kind;
    if (kind == "constrained")
      points[i] = constrained_point(setup, jobs[i].parameter);
    else if (kind == "lp")
      points[i] = lp_point(setup, jobs[i].parameter);
    else
      points[i] = penalized_point(setup, jobs[i].parameter);
    if (points[i].policy)
      mc[i] = monte_carlo_reward(setup, *points[i].policy, cfg.trials, derive_seed(cfg.seed, kStreamMonteCarlo + i), 1);
  });

  CsvWriter csv(dir / "tradeoff.csv",
                {"attack_kind", "parameter", "victim_normalized_reward", "I", "I_bar", "I_bar_gamma",
                 "adversary_value", "mc_normalized_reward", "mc_ci_low", "mc_ci_high", "status"});
  CsvWriter lp_csv(dir / "lp_sweep.csv", {"epsilon_or_rho", "adversary_value", "victim_value", "I_bar", "status"});
  std::size_t failed = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.status != "ok") ++failed;
    csv.row({p.kind, num(p.parameter), num(p.normalized_reward), num(p.info_rate), num(p.upper_rate),
             num(p.discounted_rate), num(p.adversary_value), num(mc[i].mean), num(mc[i].ci_low), num(mc[i].ci_high),
             p.status});
    if (p.kind == "lp")
      lp_csv.row({num(p.parameter), num(p.adversary_value), num(p.normalized_reward), num(p.discounted_rate),
                  p.status});
  }
  files.push_back(csv.path());
  files.push_back(lp_csv.path());
  return {{"points", points.size()}, {"failed_points", failed}, {"base_value", setup.base_value}};
}

// ---- inventory-detect ----

Json run_detect(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::vector<std::filesystem::path>& files) {
  const InventorySetup setup = make_inventory_setup(cfg);
  std::vector<AttackPoint> attacks{constrained_point(setup, cfg.attack.constrained_epsilon),
                                   lp_point(setup, cfg.attack.lp_epsilon), penalized_point(setup, cfg.attack.penalty)};
  const auto cal = calibrate_threshold(cfg.detector.delta, cfg.detector.horizon);

  CsvWriter delays(dir / "delays.csv", {"attack_kind", "parameter", "detector", "I", "mean_delay", "ci_low", "ci_high",
                                        "trials", "detected", "false_alarms", "undetected", "status"});
  CsvWriter traces(dir / "traces.csv", {"attack_kind", "trial", "t", "c_t", "g_t"});
  CsvWriter mean_traces(dir / "traces_mean.csv", {"attack_kind", "t", "mean_c_t", "mean_g_t"});

  Json calibration{{"delta", cal.delta}, {"horizon", cal.horizon}, {"threshold", cal.threshold}};
  Json attacks_json = Json::array();
  Json summary = Json::object();
  double cusum_delay[3] = {kNaN, kNaN, kNaN};

  for (std::size_t k = 0; k < attacks.size(); ++k) {
    const auto& point = attacks[k];
    Json record{{"attack_kind", point.kind}, {"parameter", point.parameter}, {"status", point.status}};
    if (!point.policy) {
      for (DetectorKind kind : {DetectorKind::cusum, DetectorKind::glr})
        delays.row({point.kind, num(point.parameter), detector_name(kind), "nan", "nan", "nan", "nan", "0", "0", "0",
                    "0", point.status});
      attacks_json.push_back(record);
      continue;
    }
    const AttackPolicy& phi = *point.policy;
    record["I"] = json_num(point.info_rate);
    record["calibration_valid"] = calibration_valid(cal, point.info_rate);

    for (DetectorKind kind : {DetectorKind::cusum, DetectorKind::glr}) {
      DelayOptions opts;
      opts.change_time = cfg.detector.change_time;
      opts.trials = cfg.trials;
      opts.max_steps_after_change = cfg.detector.max_steps;
      opts.seed = derive_seed(cfg.seed, kStreamDelay + 2 * k + (kind == DetectorKind::glr ? 1 : 0));
      opts.threads = cfg.threads;
      std::string status = "ok";
      DelayReport rep;
      try {
        rep = estimate_detection_delay(setup.mdp, setup.victim, phi, kind, cal, opts);
        if (rep.detected == 0) status = "undetected";
      } catch (const InvalidInput&) {
        throw;
      } catch (const Error& e) {
        status = error_status(e);
        rep.mean_delay = rep.ci_low = rep.ci_high = kNaN;
      }
      if (kind == DetectorKind::cusum) cusum_delay[k] = rep.detected ? rep.mean_delay : kNaN;
      delays.row({point.kind, num(point.parameter), detector_name(kind), num(point.info_rate), num(rep.mean_delay),
                  num(rep.ci_low), num(rep.ci_high), std::to_string(rep.trials), std::to_string(rep.detected),
                  std::to_string(rep.false_alarms), std::to_string(rep.undetected), status});
    }

    const auto fa = false_alarm_rate(setup.mdp, setup.victim, phi, cal, cfg.trials,
                                     derive_seed(cfg.seed, kStreamFalseAlarm + k), cfg.threads);
    record["false_alarm_frequency"] = fa.frequency;
    record["false_alarm_trials"] = fa.trials;

    const std::size_t len = cfg.detector.trace_length;
    std::vector<std::vector<TraceRow>> runs(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
      runs[i] = detection_trace(setup.mdp, setup.victim, phi, cfg.detector.change_time, len,
                                derive_seed(derive_seed(cfg.seed, kStreamTrace + k), i));
    });
    Vector mean_c(len, 0.0), mean_g(len, 0.0);
    for (std::size_t i = 0; i < runs.size(); ++i)
      for (std::size_t j = 0; j < runs[i].size(); ++j) {
        const auto& r = runs[i][j];
        traces.row({point.kind, std::to_string(i), std::to_string(r.t), num(r.cusum), num(r.glr)});
        mean_c[j] += r.cusum / static_cast<double>(runs.size());
        mean_g[j] += r.glr / static_cast<double>(runs.size());
      }
    if (!runs.empty())
      for (std::size_t j = 0; j < runs.front().size(); ++j)
        mean_traces.row({point.kind, std::to_string(runs.front()[j].t), num(mean_c[j]), num(mean_g[j])});
    attacks_json.push_back(record);
  }
  calibration["attacks"] = attacks_json;
  write_json(dir / "calibration.json", calibration);
  files.insert(files.end(), {delays.path(), traces.path(), mean_traces.path(), dir / "calibration.json"});

  summary["threshold"] = cal.threshold;
  summary["cusum_delay_constrained"] = json_num(cusum_delay[0]);
  summary["cusum_delay_lp"] = json_num(cusum_delay[1]);
  summary["cusum_delay_penalized"] = json_num(cusum_delay[2]);
  summary["delay_ratio_lp_over_constrained"] = json_num(cusum_delay[1] / cusum_delay[0]);
  return summary;
}

// ---- inventory-gamma-sweep ----

Json run_gamma_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                     std::vector<std::filesystem::path>& files) {
  const auto& eps = cfg.sweep.epsilons;
  const auto& gammas = cfg.sweep.attack_discounts;
  std::vector<GammaSweepRow> rows(eps.size() * gammas.size());
  parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
    rows[i] = gamma_sweep_point(cfg.inventory, cfg.attack.reward_model, eps[i / gammas.size()], gammas[i % gammas.size()]);
  });
  CsvWriter csv(dir / "gamma_sweep.csv", {"epsilon", "gamma_bar", "I", "I_bar", "I_bar_gamma", "gap", "bound",
                                          "l_const", "theta", "d_star", "gamma0", "status"});
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") ++failed;
    csv.row({num(r.epsilon), num(r.attack_discount), num(r.info_rate), num(r.upper_rate), num(r.discounted_rate),
             num(r.gap), num(r.bound), num(r.mixing.l_const), num(r.mixing.theta), num(r.mixing.d_star),
             num(r.mixing.gamma0), r.status});
  }
  files.push_back(csv.path());
  return {{"points", rows.size()}, {"failed_points", failed}};
}

// ---- linear-attack ----

Json run_linear_attack(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                       std::vector<std::filesystem::path>& files) {
  const LinearSystem sys = cfg.linear_system();
  const auto& betas = cfg.linear.betas;
  CsvWriter traj(dir / "linear_trajectory.csv",
                 {"beta", "t", "mean_x_sq", "mean_z", "ci_low", "ci_high", "live_trials", "status"});
  CsvWriter values(dir / "values.csv", {"beta", "j_deterministic", "j_gaussian", "gap", "log_det_term", "trace_term",
                                        "status"});
  std::size_t diverged = 0;
  for (std::size_t k = 0; k < betas.size(); ++k) {
    const double beta = betas[k];
    try {
      const auto riccati = stationary_riccati(sys, beta);
      const auto attack = synthesize_attack(riccati, sys, LinearAttackKind::gaussian);
      LinearSimOptions opts;
      opts.horizon = cfg.linear.horizon;
      opts.change_time = cfg.linear.change_time;
      opts.trials = cfg.trials;
      opts.seed = derive_seed(cfg.seed, kStreamLinear + k);
      opts.threads = cfg.threads;
      const auto sim = simulate_linear(sys, attack, opts);
      diverged += sim.diverged;
      for (const auto& s : sim.steps)
        traj.row({num(beta), std::to_string(s.t), num(s.mean_x_sq), num(s.mean_z), num(s.ci_low), num(s.ci_high),
                  std::to_string(s.live_trials), s.live_trials ? "ok" : "diverged"});
    } catch (const InvalidInput&) {
      throw;
    } catch (const Error& e) {
      traj.row({num(beta), "nan", "nan", "nan", "nan", "nan", "0", error_status(e)});
    }
    try {
      const auto cmp = compare_values(sys, beta, cfg.linear.value_horizon);
      values.row({num(beta), num(cmp.j_deterministic), num(cmp.j_gaussian), num(cmp.j_deterministic - cmp.j_gaussian),
                  num(cmp.log_det_term), num(cmp.trace_term), "ok"});
    } catch (const InvalidInput&) {
      throw;
    } catch (const Error& e) {
      values.row({num(beta), "nan", "nan", "nan", "nan", "nan", error_status(e)});
    }
  }
  files.push_back(traj.path());
  files.push_back(values.path());
  return {{"betas", betas.size()}, {"diverged_trials", diverged}};
}

// ---- linear-frontier ----

Json run_linear_frontier(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                         std::vector<std::filesystem::path>& files) {
  const LinearSystem sys = cfg.linear_system();
  const auto frontier = beta_star(sys, cfg.linear.frontier_tol);
  const Json report{{"beta0", json_num(frontier.beta0)},
                    {"beta1", json_num(frontier.beta1)},
                    {"beta_star", json_num(frontier.beta_star)}};
  write_json(dir / "frontier.json", report);

  CsvWriter csv(dir / "frontier_curve.csv", {"beta", "info_rate", "mean_x_sq", "spectral_radius", "status"});
  for (double beta : cfg.linear.betas) {
    try {
      const auto riccati = stationary_riccati(sys, beta);
      const auto stats = stationary_linear_stats(sys, synthesize_attack(riccati, sys, LinearAttackKind::gaussian));
      csv.row({num(beta), num(stats.info_rate), num(stats.mean_x_sq), num(stats.spectral_radius), "ok"});
    } catch (const InvalidInput&) {
      throw;
    } catch (const Error& e) {
      csv.row({num(beta), "nan", "nan", "nan", error_status(e)});
    }
  }
  files.push_back(dir / "frontier.json");
  files.push_back(csv.path());
  return report;
}

}  // namespace

InventorySetup make_inventory_setup(const InventoryParams& params, RewardModel model, double attack_discount) {
  check_discount(attack_discount, "attack_discount");
  TabularMdp mdp = build_inventory(params);
  const double tol = 1e-10 * std::max(1.0, mdp.reward_bound());
  Policy victim = value_iteration(mdp, mdp.discount(), tol).policy;
  Vector mu = stationary_distribution(mdp, victim);
  const Vector v = policy_evaluation(mdp, victim, mdp.discount());
  double base = 0.0;
  for (std::size_t s = 0; s < mu.size(); ++s) base += mu[s] * v[s];
  if (!(std::fabs(base) > 0.0)) throw NumericalError("unattacked value is zero; normalization undefined");
  const std::size_t S = mdp.n_states();
  Vector adversary = adversary_reward_tensor(mdp, model);
  return InventorySetup{std::move(mdp), std::move(victim), std::move(mu), Vector(S, 1.0 / static_cast<double>(S)),
                        model, attack_discount, std::move(adversary), base};
}

InventorySetup make_inventory_setup(const ExperimentConfig& cfg) {
  return make_inventory_setup(cfg.inventory, cfg.attack.reward_model, cfg.attack.attack_discount);
}

double normalized_victim_reward(const InventorySetup& setup, const AttackPolicy& phi) {
  const Vector v = victim_value(setup.mdp, setup.victim, phi, setup.mdp.discount(), setup.model);
  double total = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s) total += setup.victim_stationary[s] * v[s];
  return total / setup.base_value;
}

AttackPoint constrained_point(const InventorySetup& setup, double epsilon) {
  return guarded_point("constrained", epsilon, [&](AttackPoint& p) {
    AttackProblem problem = attack_problem(setup);
    problem.epsilon = epsilon;
    p.policy = solve_constrained_attack(setup.mdp, problem);
    p.adversary_value = alpha_value(setup, *p.policy);
    fill_rates(setup, p);
  });
}

AttackPoint lp_point(const InventorySetup& setup, double epsilon) {
  return guarded_point("lp", epsilon, [&](AttackPoint& p) {
    auto attack = optimal_stealthy_attack(setup.mdp, setup.victim, epsilon, setup.attack_discount, setup.alpha,
                                          setup.adversary_reward);
    p.policy = std::move(attack.policy);
    p.adversary_value = attack.value;
    fill_rates(setup, p);
  });
}

AttackPoint penalized_point(const InventorySetup& setup, double penalty) {
  return guarded_point("penalized", penalty, [&](AttackPoint& p) {
    AttackProblem problem = attack_problem(setup);
    problem.penalty = penalty;
    p.policy = solve_penalized_attack(setup.mdp, problem);
    p.adversary_value = alpha_value(setup, *p.policy);
    fill_rates(setup, p);
  });
}

GammaSweepRow gamma_sweep_point(const InventoryParams& params, RewardModel model, double epsilon,
                                double attack_discount) {
  GammaSweepRow row;
  row.epsilon = epsilon;
  row.attack_discount = attack_discount;
  try {
    const InventorySetup setup = make_inventory_setup(params, model, attack_discount);
    const AttackPoint p = lp_point(setup, epsilon);
    if (!p.policy) {
      row.status = p.status;
      row.info_rate = row.upper_rate = row.discounted_rate = row.gap = row.bound = kNaN;
      return row;
    }
    row.info_rate = p.info_rate;
    row.upper_rate = p.upper_rate;
    row.discounted_rate = p.discounted_rate;
    row.gap = std::fabs(p.upper_rate - p.discounted_rate);
    row.mixing = fit_mixing_bound(setup.mdp, setup.victim, *p.policy);
    row.bound = attack_discount > row.mixing.gamma0 ? info_rate_error_bound(row.mixing, attack_discount) : kNaN;
  } catch (const InvalidInput&) {
    throw;
  } catch (const Error& e) {
    row.status = error_status(e);
    row.bound = kNaN;
  }
  return row;
}

RunReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunReport report;
  if (cfg.experiment == "inventory-tradeoff")
    report.summary = run_tradeoff(cfg, out_dir, report.files);
  else if (cfg.experiment == "inventory-detect")
    report.summary = run_detect(cfg, out_dir, report.files);
  else if (cfg.experiment == "inventory-gamma-sweep")
    report.summary = run_gamma_sweep(cfg, out_dir, report.files);
  else if (cfg.experiment == "linear-attack")
    report.summary = run_linear_attack(cfg, out_dir, report.files);
  else if (cfg.experiment == "linear-frontier")
    report.summary = run_linear_frontier(cfg, out_dir, report.files);
  else
    throw ConfigError("experiment", "unknown experiment '" + cfg.experiment + "'");

  Json files = Json::array();
  for (const auto& f : report.files) files.push_back(f.filename().string());
  const Json manifest{{"experiment", cfg.experiment},
                      {"library_version", library_version()},
                      {"csv_schema_version", kCsvSchemaVersion},
                      {"config_hash", config_hash(cfg)},
                      {"seed", cfg.seed},
                      {"trials", cfg.trials},
                      {"files", files},
                      {"summary", report.summary},
                      {"config", config_to_json(cfg)}};
  write_json(out_dir / "manifest.json", manifest);
  report.files.push_back(out_dir / "manifest.json");
  return report;
}

}  // namespace stealth
