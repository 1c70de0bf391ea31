#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>

#include "stealth/attack.hpp"
#include "stealth/info_rate.hpp"
#include "stealth/mdp.hpp"

namespace stealth {

struct CusumState {
  double statistic = 0.0;
  std::size_t steps = 0;
};

/// max(0, c + z). A -inf increment resets to 0, +inf jumps to +inf, NaN is rejected.
CusumState cusum_step(CusumState state, double z);

struct DetectorCalibration {
  double delta = 0.01;
  std::size_t horizon = 1000;
  double threshold = 0.0;
};

/// threshold = ln(2 m / delta)
DetectorCalibration calibrate_threshold(double delta, std::size_t horizon);

/// horizon > ln(1/delta) / rate
bool calibration_valid(const DetectorCalibration& cal, double rate);

struct Transition {
  std::size_t state;
  std::size_t action;
  std::size_t next;
};

inline constexpr std::size_t kGlrWindows = 38;
inline constexpr std::size_t kGlrWindowStep = 5;

/// Window-limited GLR. Window n (1-based) covers the last 5n transitions and
/// stays inactive until full.
struct GlrState {
  std::deque<Transition> buffer;
  std::array<double, kGlrWindows> window_stats{};
  std::array<bool, kGlrWindows> window_active{};
  double statistic = 0.0;
  std::size_t steps = 0;
};

GlrState glr_step(GlrState state, const Transition& obs, const TabularMdp& mdp, const Policy& pi);

/// Log-likelihood of `window` under the plug-in kernel (floored at 1e-12,
/// renormalized) minus its log-likelihood under P.
double glr_window_statistic(std::span<const Transition> window, const TabularMdp& mdp);

enum class DetectorKind { cusum, glr };

const char* detector_name(DetectorKind kind);

struct DelayOptions {
  std::size_t change_time = 25;
  std::size_t trials = 100;
  /// Steps simulated after the change before a trial counts as undetected.
  std::size_t max_steps_after_change = 20000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct DelayReport {
  double mean_delay = 0.0;  // over detected trials, (T - nu)^+
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t trials = 0;
  std::size_t detected = 0;
  std::size_t false_alarms = 0;  // fired before the change
  std::size_t undetected = 0;
  std::vector<double> delays;  // per trial, NaN when undetected
};

/// Monte Carlo detection delay. Trials start from the stationary law of pi,
/// the attack applies from step change_time on, and the detector scores
/// transitions with the log-likelihood ratio of phi.
DelayReport estimate_detection_delay(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                     DetectorKind kind, const DetectorCalibration& calibration,
                                     const DelayOptions& options);

struct FalseAlarmReport {
  std::size_t trials = 0;
  std::size_t alarms = 0;
  double frequency = 0.0;
};

/// Fraction of unattacked streams of calibration.horizon transitions on
/// which the CUSUM designed for phi crosses the threshold.
FalseAlarmReport false_alarm_rate(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                  const DetectorCalibration& calibration, std::size_t trials, std::uint64_t seed,
                                  unsigned threads);

struct TraceRow {
  std::size_t t;
  double cusum;
  double glr;
};

/// Per-step statistics of both detectors along one attacked trajectory.
std::vector<TraceRow> detection_trace(const TabularMdp& mdp, const Policy& pi, const AttackPolicy& phi,
                                      std::size_t change_time, std::size_t horizon, std::uint64_t seed);

}  // namespace stealth
