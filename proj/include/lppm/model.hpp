#pragma once

// Exact evaluation of the latent point process model: per-pair Hawkes
// intensities and compensators, pair-specific spatial densities, the
// complete-data log-likelihood and the variational lower bound.

#include "lppm/configurations.hpp"
#include "lppm/types.hpp"

#include <span>

namespace lppm {

/// Which factors of the intensity take part in evaluation and learning.
/// A disabled factor is replaced by a constant.
enum class ModelMode { Full, TemporalOnly, SpatialOnly };

inline bool uses_temporal(ModelMode m) { return m != ModelMode::SpatialOnly; }
inline bool uses_spatial(ModelMode m) { return m != ModelMode::TemporalOnly; }

/// A past event together with the pair it is attributed to.
struct AssignedEvent {
  double t = 0.0;
  PairIndex pair = 0;
};

/// lambda_a(t): background rate plus excitation from every history event
/// of pair a at or before t (right-continuous at own events). History must
/// be sorted and contain no time after t.
double temporal_intensity(PairIndex a, double t, std::span<const AssignedEvent> history, const ModelState& state);

/// Closed-form integral of lambda_a over [0, upto].
double compensator(PairIndex a, double upto, std::span<const AssignedEvent> history, const ModelState& state);

double spatial_log_density(PairIndex a, const Vec2& x, const SpatialModel& spatial);
double spatial_density(PairIndex a, const Vec2& x, const SpatialModel& spatial);

/// log r_a(x_k) for every event and pair.
Eigen::MatrixXd spatial_log_densities(const EventLog& log, const SpatialModel& spatial);

std::vector<double> event_times(const EventLog& log);

/// sum_k [log lambda_{z_k}(t_k) + log r_{z_k}(x_k)] - sum_a Lambda_a(T).
/// Returns -infinity when an assigned event has zero intensity or density.
double complete_data_log_likelihood(const EventLog& log, const Assignment& assignment, const ModelState& state,
                                    ModelMode mode = ModelMode::Full);

/// Components of the variational lower bound.
struct ElboTerms {
  double temporal = 0.0;  // E_Q[sum z log lambda] - E_Q[sum Lambda]
  double spatial = 0.0;   // sum phi log r
  double entropy = 0.0;   // -sum phi log phi

  double total() const { return temporal + spatial + entropy; }
};

ElboTerms elbo_terms(const EventLog& log, const Responsibilities& phi, const ModelState& state,
                     const ExpectationOptions& opts, ModelMode mode = ModelMode::Full);

inline double elbo(const EventLog& log, const Responsibilities& phi, const ModelState& state,
                   const ExpectationOptions& opts, ModelMode mode = ModelMode::Full) {
  return elbo_terms(log, phi, state, opts, mode).total();
}

/// Expected compensator of pair a under phi: mu T + beta sum_l phi_la (1 - exp(-omega (T - t_l))).
double expected_compensator(std::span<const double> times, const Responsibilities& phi, PairIndex a,
                            const PairParams& params, double horizon);

}  // namespace lppm
