#include "stealth/detection.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "stealth/errors.hpp"
#include "stealth/rng.hpp"
#include "stealth/simulate.hpp"

namespace stealth {

CusumState cusum_step(CusumState state, double z) {
  if (std::isnan(z)) throw InvalidInput("cusum increment is NaN");
  ++state.steps;
  if (z == -kInfinity) {
    // the attacked law cannot produce this transition
    state.statistic = 0.0;
  } else {
    state.statistic = std::max(0.0, state.statistic + z);
  }
  return state;
}

DetectorCalibration calibrate_threshold(double delta, std::size_t horizon) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0,1)");
  if (horizon < 1) throw InvalidInput("horizon must be >= 1");
  return {delta, horizon, std::log(2.0 * static_cast<double>(horizon) / delta)};
}

bool calibration_valid(const DetectorCalibration& cal, double rate) {
  if (!(rate > 0.0)) return false;
  return static_cast<double>(cal.horizon) > std::log(1.0 / cal.delta) / rate;
}

const char* detector_name(DetectorKind kind) { return kind == DetectorKind::cusum ? "cusum" : "glr"; }

namespace {

// Running plug-in log-likelihood ratio of a growing sample set.
class PlugInScore {
 public:
  PlugInScore(const TabularMdp& mdp) : mdp_(mdp) {}

  void add(const Transition& o) {
    const std::size_t S = mdp_.n_states(), A = mdp_.n_actions();
    const double p = mdp_.prob(o.state, o.action, o.next);
    if (p == 0.0) {
      impossible_ = true;
    } else {
      nominal_ += std::log(p);
    }
    const std::uint64_t pair = o.state * A + o.action;
    const std::uint64_t triple = pair * S + o.next;
    double& k = triples_[triple];
    counts_ += xlogx(k + 1.0) - xlogx(k);
    Pair& pr = pairs_[pair];
    if (k == 0.0) ++pr.distinct;
    k += 1.0;
    pairs_sum_ -= xlogx(pr.count);
    floor_sum_ -= pr.count * pr.log_norm;
    pr.count += 1.0;
    pr.log_norm = std::log1p(static_cast<double>(S - pr.distinct) * 1e-12);
    pairs_sum_ += xlogx(pr.count);
    floor_sum_ += pr.count * pr.log_norm;
  }

  double value() const {
    if (impossible_) return kInfinity;
    return counts_ - pairs_sum_ - floor_sum_ - nominal_;
  }

 private:
  struct Pair {
    double count = 0.0;
    std::size_t distinct = 0;
    double log_norm = 0.0;
  };
  static double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

  const TabularMdp& mdp_;
  std::unordered_map<std::uint64_t, double> triples_;
  std::unordered_map<std::uint64_t, Pair> pairs_;
  double counts_ = 0.0, pairs_sum_ = 0.0, floor_sum_ = 0.0, nominal_ = 0.0;
  bool impossible_ = false;
};

}  // namespace

double glr_window_statistic(std::span<const Transition> window, const TabularMdp& mdp) {
  PlugInScore score(mdp);
  for (const Transition& o : window) score.add(o);
  return score.value();
}

GlrState glr_step(GlrState state, const Transition& obs, const TabularMdp& mdp, const Policy& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
    throw InvalidInput("policy shape does not match mdp");
  if (obs.state >= mdp.n_states() || obs.next >= mdp.n_states() || obs.action >= mdp.n_actions())
    throw InvalidInput("observation out of range");
  constexpr std::size_t capacity = kGlrWindows * kGlrWindowStep;
  state.buffer.push_back(obs);
  if (state.buffer.size() > capacity) state.buffer.pop_front();
  ++state.steps;

  // windows are nested suffixes, so one pass from the newest sample scores all of them
  PlugInScore score(mdp);
  double best = 0.0;
  std::size_t taken = 0;
  for (auto it = state.buffer.rbegin(); it != state.buffer.rend(); ++it) {
    score.add(*it);
    ++taken;
    if (taken % kGlrWindowStep == 0) {
      const std::size_t n = taken / kGlrWindowStep - 1;
      state.window_stats[n] = score.value();
      state.window_active[n] = true;
      best = std::max(best, state.window_stats[n]);
    }
  }
  for (std::size_t n = state.buffer.size() / kGlrWindowStep; n < kGlrWindows; ++n) {
    state.window_active[n] = false;
    state.window_stats[n] = 0.0;
  }
  state.statistic = best;
  return state;
}

namespace {

// Shared trial loop. Returns the first time the statistic reaches the
// threshold, or 0 when it never does within `steps`.
std::size_t run_detector(const ChainSampler& sampler, const TabularMdp& mdp, const Policy& pi,
                         const LlrTable& z, DetectorKind kind, double threshold, std::size_t change_time,
                         std::size_t steps, bool attack, Rng& rng) {
  std::size_t s = sampler.initial_state(rng);
  CusumState cusum;
  GlrState glr;
  for (std::size_t t = 0; t < steps; ++t) {
    const Step st = sampler.step(rng, s, attack && t >= change_time);
    double stat;
    if (kind == DetectorKind::cusum) {
      cusum = cusum_step(cusum, z(st.state, st.action, st.next));
      stat = cusum.statistic;
    } else {
      glr = glr_step(std::move(glr), {st.state, st.action, st.next}, mdp, pi);
      stat = glr.statistic;
    }
    if (stat >= threshold) return t + 1;
    s = st.next;
  }
  return 0;
}

}  // namespace

DelayReport estimate_detection_delay(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                     DetectorKind kind, const DetectorCalibration& calibration,
                                     const DelayOptions& options) {
  if (options.trials < 1) throw InvalidInput("trials must be >= 1");
  const ChainSampler sampler(mdp, pi, phi);
  const LlrTable z = log_likelihood_ratio(mdp, phi);
  const std::size_t nu = options.change_time;
  std::vector<std::size_t> alarm(options.trials, 0);
  parallel_for(options.trials, options.threads, [&](std::size_t i) {
    Rng rng(derive_seed(options.seed, i));
    alarm[i] = run_detector(sampler, mdp, pi, z, kind, calibration.threshold, nu,
                            nu + options.max_steps_after_change, true, rng);
  });

  DelayReport r;
  r.trials = options.trials;
  r.delays.assign(options.trials, std::nan(""));
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < options.trials; ++i) {
    if (alarm[i] == 0) {
      ++r.undetected;
    } else if (alarm[i] <= nu) {
      ++r.false_alarms;
      r.delays[i] = 0.0;
    } else {
      const double d = static_cast<double>(alarm[i] - nu);
      r.delays[i] = d;
      ++r.detected;
      sum += d;
      sum_sq += d * d;
    }
  }
  if (r.detected > 0) {
    const double k = static_cast<double>(r.detected);
    r.mean_delay = sum / k;
    const double var = r.detected > 1 ? std::max(0.0, (sum_sq - k * r.mean_delay * r.mean_delay) / (k - 1.0)) : 0.0;
    const double half = 2.5758293035489004 * std::sqrt(var / k);
    r.ci_low = r.mean_delay - half;
    r.ci_high = r.mean_delay + half;
  } else {
    r.mean_delay = r.ci_low = r.ci_high = std::nan("");
  }
  return r;
}

FalseAlarmReport false_alarm_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                  const DetectorCalibration& calibration, std::size_t trials, std::uint64_t seed,
                                  unsigned threads) {
  if (trials < 1) throw InvalidInput("trials must be >= 1");
  const ChainSampler sampler(mdp, pi, phi);
  const LlrTable z = log_likelihood_ratio(mdp, phi);
  std::vector<unsigned char> fired(trials, 0);
  parallel_for(trials, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    fired[i] = run_detector(sampler, mdp, pi, z, DetectorKind::cusum, calibration.threshold, 0,
                            calibration.horizon, false, rng) != 0;
  });
  FalseAlarmReport r;
  r.trials = trials;
  for (unsigned char f : fired) r.alarms += f;
  r.frequency = static_cast<double>(r.alarms) / static_cast<double>(trials);
  return r;
}

std::vector<TraceRow> detection_trace(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                      std::size_t change_time, std::size_t horizon, std::uint64_t seed) {
  const Trajectory tr = simulate_trajectory(mdp, pi, phi, change_time, horizon, seed);
  const LlrTable z = log_likelihood_ratio(mdp, phi);
  std::vector<TraceRow> rows;
  rows.reserve(horizon);
  CusumState cusum;
  GlrState glr;
  for (std::size_t t = 0; t < tr.steps.size(); ++t) {
    const Step& st = tr.steps[t];
    cusum = cusum_step(cusum, z(st.state, st.action, st.next));
    glr = glr_step(std::move(glr), {st.state, st.action, st.next}, mdp, pi);
    rows.push_back({t + 1, cusum.statistic, glr.statistic});
  }
  return rows;
}

}  // namespace stealth
