#pragma once

// Expectations over latent label configurations.
//
// Under the factorized variational distribution, the membership of event l
// in pair a is Bernoulli(phi(l, a)) independently of every other event. The
// intensity of pair a at event k depends only on which preceding events in
// its history window belong to a. Events with phi exactly 0 or 1 are
// deterministic; the remaining "hidden" members are enumerated exactly
// (2^h configurations) when h <= exact_config_limit and sampled otherwise.

#include "lppm/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lppm {

inline constexpr int kAdaptiveWindowCap = 20;
inline constexpr double kAdaptiveWindowCutoff = 1e-4;

struct ExpectationOptions {
  /// Number of preceding events in each history window. 0 selects the
  /// adaptive rule: look back while exp(-omega * dt) >= 1e-4, at most 20 events.
  int window = 0;
  int exact_config_limit = 12;
  int mc_samples = 256;
  std::uint64_t seed = 0;
};

/// Whether event l < k lies in the history window of event k for a pair
/// with decay rate omega.
bool in_window(std::span<const double> times, std::size_t l, std::size_t k, double omega,
               const ExpectationOptions& opts);

/// First event index of the history window of event k.
std::size_t window_begin(std::span<const double> times, std::size_t k, double omega, const ExpectationOptions& opts);

/// Configurations of h hidden Bernoulli members with `weights(c)` the
/// probability of configuration c (exact) or 1/S (sampled). Exact sets
/// index configurations by bit pattern: member b is present in c when bit b
/// of c is set. Sampled sets store their draws in `membership`, one row per
/// sample.
struct ConfigurationSet {
  Eigen::MatrixXd membership;
  Eigen::VectorXd weights;
  int members = 0;
  bool exact = true;

  Eigen::Index size() const { return weights.size(); }
  bool contains(Eigen::Index c, int b) const;
  /// offset + sum of g over the members present, for every configuration.
  Eigen::VectorXd sums(const Eigen::VectorXd& g, double offset = 0.0) const;
};

ConfigurationSet configurations(const Eigen::Ref<const Eigen::VectorXd>& probs, const ExpectationOptions& opts,
                                std::uint64_t stream);

/// History window of pair a at event k, split into deterministic members
/// (phi == 1) and hidden members (0 < phi < 1). Stores time lags so the
/// kernel can be re-evaluated for any (beta, omega).
struct WindowMembers {
  std::vector<double> fixed_lags;
  std::vector<double> hidden_lags;
  std::vector<std::size_t> hidden_events;
  Eigen::VectorXd hidden_probs;
};

WindowMembers window_members(std::span<const double> times, const Responsibilities& phi, PairIndex a, std::size_t k,
                             double omega, const ExpectationOptions& opts,
                             std::optional<std::size_t> exclude = std::nullopt);

/// Deterministic stream id for Monte Carlo draws of one (event, pair,
/// excluded event) window, so that every consumer sees the same samples.
std::uint64_t window_stream(std::size_t k, PairIndex a, std::optional<std::size_t> exclude);

/// Excitation sums per configuration: fixed part plus hidden members.
/// Returns a vector with one entry per configuration of `configs`.
Eigen::VectorXd excitation_per_configuration(const WindowMembers& members, const ConfigurationSet& configs,
                                             const PairParams& params);

/// E_Q[log lambda_a(t_k)] over the window of event k.
double expected_log_intensity(std::span<const double> times, const Responsibilities& phi, PairIndex a,
                              std::size_t k, const PairParams& params, const ExpectationOptions& opts);

}  // namespace lppm
