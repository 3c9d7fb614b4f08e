#pragma once

// Forecasting from a fitted model: the expected waiting time until the next
// event of the superposed process, and the ranking of pairs by their
// conditional intensity right after the last observed event.

#include "lppm/model.hpp"
#include "lppm/types.hpp"

#include <span>
#include <vector>

namespace lppm {

/// Intensities conditioned on the history up to t_now with no further
/// events: lambda_a(t_now + s) = mu_a + excitation_a * exp(-omega_a s).
struct IntensitySnapshot {
  Eigen::VectorXd mu;
  Eigen::VectorXd excitation;
  Eigen::VectorXd omega;

  Eigen::Index pair_count() const { return mu.size(); }
  double total_rate(double s) const;
  /// Integral of the total rate over [0, s].
  double total_mass(double s) const;
};

IntensitySnapshot snapshot(const ModelState& state, std::span<const AssignedEvent> history, double t_now);

/// History weighted by responsibilities: events [0, count) of the log.
IntensitySnapshot snapshot(const ModelState& state, const EventLog& log, const Responsibilities& phi,
                           std::size_t count, double t_now);

struct WaitingTimeOptions {
  double relative_tolerance = 1e-10;
  /// Stop extending the integration range once the bound on the remaining
  /// tail of the expectation falls below this fraction of the estimate.
  double tail_tolerance = 1e-10;
};

/// Integral over [0, L] of s lambda_S(s) exp(-Lambda_S(s)) ds with L extended
/// until the remaining tail is negligible.
double expected_waiting_time(const IntensitySnapshot& snap, const WaitingTimeOptions& options = {});

inline double expected_waiting_time(const ModelState& state, std::span<const AssignedEvent> history, double t_now,
                                    const WaitingTimeOptions& options = {}) {
  return expected_waiting_time(snapshot(state, history, t_now), options);
}

/// Top-K pairs by lambda_a(t_now+), ties broken by lower pair index.
std::vector<PairIndex> rank_next_pairs(const IntensitySnapshot& snap, int k);

inline std::vector<PairIndex> rank_next_pairs(const ModelState& state, std::span<const AssignedEvent> history,
                                              double t_now, int k) {
  return rank_next_pairs(snapshot(state, history, t_now), k);
}

/// |actual - predicted| / |actual|. Throws InputError when actual is 0.
double mape(double actual, double predicted);

struct MapeSummary {
  double mean = 0.0;
  std::size_t scored = 0;
  std::size_t skipped = 0;  // actual == 0
};

MapeSummary mape(std::span<const double> actual, std::span<const double> predicted);

}  // namespace lppm
