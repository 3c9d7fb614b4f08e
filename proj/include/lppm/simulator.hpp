#pragma once

#include "lppm/rng.hpp"
#include "lppm/types.hpp"

#include <cstdint>
#include <vector>

namespace lppm {

/// Event times of one pair's Hawkes process on [0, horizon] by Ogata
/// thinning. The intensity only decays between events, so the bound for
/// each proposal is the current post-event intensity.
std::vector<double> simulate_pair(const PairParams& params, double horizon, Rng& rng);

/// Draws one location from pair a's spatial model.
Vec2 sample_location(PairIndex a, const SpatialModel& spatial, Rng& rng);

/// Independent per-pair simulation merged into one fully labeled log.
/// Pair a uses the stream make_rng(seed, a) for its times and locations.
EventLog simulate_network(const ModelState& state, const PairTable& pairs, double horizon, std::uint64_t seed);

/// Simulates until at least `count` events exist, keeps the first `count`,
/// shifts time so the first event is at 0, and sets the horizon to the last
/// event time. Attempt r uses master seed split_seed(seed, r).
EventLog simulate_event_count(const ModelState& state, const PairTable& pairs, std::size_t count,
                              std::uint64_t seed);

struct MaskSpec {
  enum class Mode { Fraction, Count, OneEndpoint };
  Mode mode = Mode::Fraction;
  double rho = 0.0;        // Fraction / OneEndpoint
  std::size_t count = 0;   // Count
  std::uint64_t seed = 0;

  static MaskSpec fraction(double rho, std::uint64_t seed) { return {Mode::Fraction, rho, 0, seed}; }
  static MaskSpec exact_count(std::size_t k, std::uint64_t seed) { return {Mode::Count, 0.0, k, seed}; }
  static MaskSpec one_endpoint(double rho, std::uint64_t seed) { return {Mode::OneEndpoint, rho, 0, seed}; }
};

struct MaskedLog {
  EventLog log;
  GroundTruth truth;
};

/// Hides labels of a random subset of round(rho * n) events (or exactly
/// `count`). OneEndpoint keeps one random endpoint and turns the label
/// into the set of pairs containing it.
MaskedLog mask_labels(const EventLog& log, const MaskSpec& spec);

}  // namespace lppm
