#pragma once

// Variational EM for the latent point process model.
//
// E-step: coordinate ascent on each unlabeled event's responsibility row.
// The bound is linear in a single row apart from the entropy, so the row
// maximizer is a softmax of per-pair scores:
//   self term      E[log lambda_a(t_p)] over the window before p
//   future terms   sum_k phi_ka E[log((lambda_a(t_k) without p + g(t_k - t_p)) / lambda_a(t_k) without p)]
//   compensator    -beta_a (1 - exp(-omega_a (T - t_p)))
//   spatial        log r_a(x_p)
//
// M-step: weighted Gaussian moments (or mixture weights) for the spatial
// part; for the temporal part a concave (mu, beta) solve at fixed omega and
// a bracketed Newton solve of d bound / d omega = 0.

#include "lppm/configurations.hpp"
#include "lppm/model.hpp"
#include "lppm/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lppm {

enum class OmegaSolver { Newton, ClosedForm };
enum class SweepOrder { Forward, Reverse };

struct FitConfig {
  int window = 0;  // 0: adaptive window (see ExpectationOptions)
  int max_outer_iters = 100;
  int max_estep_sweeps = 100;
  double tol_phi = 1e-6;
  double tol_params = 1e-5;
  int exact_config_limit = 12;
  int mc_samples = 256;
  OmegaSolver omega_solver = OmegaSolver::Newton;
  std::uint64_t seed = 0;

  ModelMode mode = ModelMode::Full;
  /// false: beta pinned to 0 and omega frozen (homogeneous Poisson pairs).
  bool learn_excitation = true;
  /// One (mu, beta, omega) shared by every pair.
  bool tie_temporal = false;
  SweepOrder sweep_order = SweepOrder::Forward;
  /// Reset unlabeled rows to uniform at the start of every outer iteration.
  bool reinit_hidden = true;
  double min_variance = 1e-4;

  ExpectationOptions expectation() const { return {window, exact_config_limit, mc_samples, seed}; }
};

/// Throws InputError unless every count is positive and tolerances are in (0, 1).
void validate(const FitConfig& config);

struct LogIntensityTerms {
  double self_term = 0.0;
  double future_terms = 0.0;
  double compensator_term = 0.0;

  double total() const { return self_term + future_terms + compensator_term; }
};

LogIntensityTerms expected_log_intensity_terms(const EventLog& log, std::size_t p, PairIndex a,
                                               const Responsibilities& phi, const ModelState& state,
                                               const FitConfig& config);

/// New responsibility row for event p, normalized over its admissible pairs.
/// `log_r` may carry precomputed spatial log densities (events x pairs).
Eigen::RowVectorXd estep_update_phi(const EventLog& log, std::size_t p, const Responsibilities& phi,
                                    const ModelState& state, const FitConfig& config,
                                    const Eigen::MatrixXd* log_r = nullptr);

struct SweepResult {
  int sweeps = 0;
  double change = 0.0;  // max-abs row change in the final sweep
  bool converged = true;
};

SweepResult estep_sweep(const EventLog& log, Responsibilities& phi, const ModelState& state, const FitConfig& config);

struct SpatialUpdate {
  SpatialModel model;
  std::vector<PairIndex> frozen;  // pairs with no responsibility mass, held at previous values
};

SpatialUpdate mstep_spatial(const EventLog& log, const Responsibilities& phi, const SpatialModel& previous,
                            const FitConfig& config);

struct TemporalUpdate {
  std::vector<PairParams> params;
  std::vector<PairIndex> frozen;          // no mass: mu floored, beta/omega held
  std::vector<PairIndex> omega_fallback;  // Newton failed to bracket, closed form used
};

TemporalUpdate mstep_temporal(const EventLog& log, const Responsibilities& phi, const ModelState& state,
                              const FitConfig& config);

/// mu = n / (M T), beta = 0.5, omega = 2 / mean gap; spatial Gaussians from
/// labeled means (k-means on all locations when nothing is labeled).
ModelState initial_state(const EventLog& log, const FitConfig& config);

struct FitReport {
  ModelState state;
  Responsibilities phi;
  std::vector<double> elbo_trace;
  int outer_iters = 0;
  int estep_sweeps = 0;
  bool params_converged = false;
  bool estep_converged = true;
  std::vector<PairIndex> frozen_pairs;
  int omega_fallbacks = 0;
};

FitReport fit(const EventLog& log, const FitConfig& config, std::optional<ModelState> initial = std::nullopt);

}  // namespace lppm
