#pragma once

#include "lppm/types.hpp"

#include <span>
#include <vector>

namespace lppm {

struct RankedPair {
  PairIndex pair = 0;
  double probability = 0.0;
};

struct InferredEvent {
  std::size_t event = 0;
  std::vector<RankedPair> ranking;  // descending probability, ties by pair index
  PairIndex estimate() const { return ranking.front().pair; }
  double probability() const { return ranking.front().probability; }
};

struct InferenceResult {
  std::vector<InferredEvent> events;  // non-Known events in log order
};

/// Ranks admissible pairs of every non-Known event by its responsibility row.
InferenceResult infer_labels(const Responsibilities& phi, const EventLog& log);

/// Fraction of hidden events whose inferred pair equals the true pair.
/// Result and truth must cover the same events.
double accuracy(const InferenceResult& result, const GroundTruth& truth);

/// Mean fraction of true endpoints recovered per hidden event (1, 0.5 or 0).
double endpoint_recall(const InferenceResult& result, const GroundTruth& truth, const PairTable& pairs);

/// max rate / sum of rates: best achievable accuracy when pairs are
/// independent homogeneous Poisson processes.
double homogeneous_identifiability_bound(std::span<const double> rates);

}  // namespace lppm
