#include "lppm/configurations.hpp"

#include "lppm/kernels.hpp"
#include "lppm/rng.hpp"

#include <cmath>

namespace lppm {

namespace {

constexpr int kMaxExactBits = 24;

}  // namespace

bool ConfigurationSet::contains(Eigen::Index c, int b) const {
  if (exact) return ((c >> b) & 1) != 0;
  return membership(c, b) != 0.0;
}

Eigen::VectorXd ConfigurationSet::sums(const Eigen::VectorXd& g, double offset) const {
  if (!exact) {
    Eigen::VectorXd out = membership * g;
    out.array() += offset;
    return out;
  }
  Eigen::VectorXd out(size());
  out(0) = offset;
  for (int b = 0; b < members; ++b) {
    const Eigen::Index half = Eigen::Index{1} << b;
    const double gb = g(b);
    for (Eigen::Index r = 0; r < half; ++r) out(r + half) = out(r) + gb;
  }
  return out;
}

bool in_window(std::span<const double> times, std::size_t l, std::size_t k, double omega,
               const ExpectationOptions& opts) {
  if (l >= k) return false;
  if (opts.window > 0) return k - l <= static_cast<std::size_t>(opts.window);
  if (k - l > static_cast<std::size_t>(kAdaptiveWindowCap)) return false;
  return std::exp(-omega * (times[k] - times[l])) >= kAdaptiveWindowCutoff;
}

std::size_t window_begin(std::span<const double> times, std::size_t k, double omega, const ExpectationOptions& opts) {
  std::size_t l = k;
  while (l > 0 && in_window(times, l - 1, k, omega, opts)) --l;
  return l;
}

ConfigurationSet configurations(const Eigen::Ref<const Eigen::VectorXd>& probs, const ExpectationOptions& opts,
                                std::uint64_t stream) {
  const int h = static_cast<int>(probs.size());
  ConfigurationSet set;
  set.members = h;
  if (h <= opts.exact_config_limit && h <= kMaxExactBits) {
    set.exact = true;
    const Eigen::Index rows = Eigen::Index{1} << h;
    set.weights.resize(rows);
    set.weights(0) = 1.0;
    // Doubling construction: after step b the first 2^(b+1) entries hold the
    // joint probabilities of the first b+1 members.
    for (int b = 0; b < h; ++b) {
      const Eigen::Index half = Eigen::Index{1} << b;
      const double p = probs(b);
      for (Eigen::Index r = 0; r < half; ++r) {
        set.weights(r + half) = set.weights(r) * p;
        set.weights(r) *= 1.0 - p;
      }
    }
    return set;
  }
  set.exact = false;
  const int samples = std::max(1, opts.mc_samples);
  set.membership.resize(samples, h);
  // Counter-based draws: draw (s, b) of this stream is a hash of its index.
  const std::uint64_t base = split_seed(opts.seed, stream);
  for (int b = 0; b < h; ++b) {
    const double p = probs(b);
    for (int s = 0; s < samples; ++s) {
      const std::uint64_t bits = split_seed(base, static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(samples) +
                                                      static_cast<std::uint64_t>(s));
      set.membership(s, b) = static_cast<double>(bits >> 11) * 0x1.0p-53 < p ? 1.0 : 0.0;
    }
  }
  set.weights = Eigen::VectorXd::Constant(samples, 1.0 / samples);
  return set;
}

WindowMembers window_members(std::span<const double> times, const Responsibilities& phi, PairIndex a, std::size_t k,
                             double omega, const ExpectationOptions& opts, std::optional<std::size_t> exclude) {
  WindowMembers w;
  const std::size_t begin = window_begin(times, k, omega, opts);
  std::vector<double> probs;
  for (std::size_t l = begin; l < k; ++l) {
    if (exclude && *exclude == l) continue;
    const double p = phi(static_cast<Eigen::Index>(l), a);
    if (p <= 0.0) continue;
    const double lag = times[k] - times[l];
    if (p >= 1.0) {
      w.fixed_lags.push_back(lag);
    } else {
      w.hidden_lags.push_back(lag);
      w.hidden_events.push_back(l);
      probs.push_back(p);
    }
  }
  w.hidden_probs = Eigen::Map<const Eigen::VectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  return w;
}

std::uint64_t window_stream(std::size_t k, PairIndex a, std::optional<std::size_t> exclude) {
  const std::uint64_t ex = exclude ? static_cast<std::uint64_t>(*exclude) + 1 : 0;
  return split_seed(split_seed(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(a)), ex);
}

Eigen::VectorXd excitation_per_configuration(const WindowMembers& members, const ConfigurationSet& configs,
                                             const PairParams& params) {
  double fixed = 0.0;
  for (double lag : members.fixed_lags) fixed += excitation(params.beta, params.omega, lag);
  Eigen::VectorXd g(static_cast<Eigen::Index>(members.hidden_lags.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g(i) = excitation(params.beta, params.omega, members.hidden_lags[static_cast<std::size_t>(i)]);
  }
  return configs.sums(g, fixed);
}

double expected_log_intensity(std::span<const double> times, const Responsibilities& phi, PairIndex a,
                              std::size_t k, const PairParams& params, const ExpectationOptions& opts) {
  if (params.beta == 0.0) return std::log(params.mu);
  const WindowMembers members = window_members(times, phi, a, k, params.omega, opts);
  const ConfigurationSet configs = configurations(members.hidden_probs, opts, window_stream(k, a, std::nullopt));
  const Eigen::VectorXd excite = excitation_per_configuration(members, configs, params);
  return configs.weights.dot((excite.array() + params.mu).log().matrix());
}

}  // namespace lppm
