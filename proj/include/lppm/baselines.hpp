#pragma once

// Reference methods: Hawkes fitted on labeled events only (B1), homogeneous
// Poisson pairs learned with EM (B2), last-pair recency (B3), a spatial-only
// classifier, and exact posterior enumeration for small instances.

#include "lppm/label_inference.hpp"
#include "lppm/model.hpp"
#include "lppm/variational_em.hpp"

#include <span>
#include <vector>

namespace lppm {

/// The log restricted to its Known events (same pairs and horizon).
EventLog labeled_only(const EventLog& log);

/// Fits on labeled events only, then computes responsibilities for the
/// full log with a single forward E-step pass under that model.
FitReport fit_b1(const EventLog& log, const FitConfig& config);

/// variational EM with beta pinned to 0 and omega frozen.
FitReport fit_b2(const EventLog& log, const FitConfig& config);

/// Pair of the most recent event.
PairIndex predict_b3(std::span<const AssignedEvent> history);

/// The k most recent distinct pairs, most recent first.
std::vector<PairIndex> predict_b3_top(std::span<const AssignedEvent> history, int k);

struct SpatialOnlyResult {
  InferenceResult inference;
  SpatialModel model;
  std::vector<PairIndex> excluded;  // pairs without labeled events
};

/// Per-pair Gaussians fitted on labeled events; each hidden event goes to
/// the admissible pair with the highest density at its location.
SpatialOnlyResult spatial_only_infer(const EventLog& log, double min_variance = 1e-4);

inline constexpr std::size_t kExactHiddenLimit = 12;
inline constexpr double kExactConfigurationLimit = 5e7;

struct ExactPosterior {
  std::vector<std::size_t> hidden;  // event indices
  Eigen::MatrixXd marginals;        // hidden x pairs
  Assignment map;                   // full labeling with the highest joint likelihood
  double log_evidence = 0.0;        // log sum over configurations
};

/// Enumerates every joint labeling of the hidden events, scores each with
/// the complete-data log-likelihood, and normalizes.
ExactPosterior exact_ml_enumerate(const EventLog& log, const ModelState& state, ModelMode mode = ModelMode::Full);

/// Inference result of the MAP labeling (probabilities are the marginals).
InferenceResult exact_map_inference(const ExactPosterior& posterior, const EventLog& log);

}  // namespace lppm
