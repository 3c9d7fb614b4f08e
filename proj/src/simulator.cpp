#include "lppm/simulator.hpp"

#include "lppm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lppm {

std::vector<double> simulate_pair(const PairParams& params, double horizon, Rng& rng) {
  std::vector<double> times;
  if (!(horizon > 0.0)) return times;
  double t = 0.0;
  double excite = 0.0;  // excitation at t+
  for (;;) {
    const double bound = params.mu + excite;
    if (!(bound > 0.0)) break;
    const double next = t + exponential(rng, bound);
    if (next > horizon) break;
    excite *= std::exp(-params.omega * (next - t));
    t = next;
    if (uniform01(rng) * bound <= params.mu + excite) {
      times.push_back(t);
      excite += params.beta * params.omega;
    }
  }
  return times;
}

Vec2 sample_location(PairIndex a, const SpatialModel& spatial, Rng& rng) {
  const GaussianComponent* comp = nullptr;
  if (spatial.mode == SpatialMode::PerPairGaussian) {
    comp = &spatial.components.at(static_cast<std::size_t>(a));
  } else {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t c = 0;
    for (; c + 1 < spatial.components.size(); ++c) {
      acc += spatial.weights(a, static_cast<Eigen::Index>(c));
      if (u < acc) break;
    }
    comp = &spatial.components[c];
  }
  Eigen::LLT<Mat2> llt(comp->cov);
  if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
  Vec2 z;
  z(0) = standard_normal(rng);
  z(1) = standard_normal(rng);
  return comp->mean + llt.matrixL() * z;
}

EventLog simulate_network(const ModelState& state, const PairTable& pairs, double horizon, std::uint64_t seed) {
  if (state.pair_count() != pairs.size()) throw InputError("state and pair table disagree on the number of pairs");
  EventLog log;
  log.pairs = pairs;
  log.horizon = horizon;
  for (PairIndex a = 0; a < pairs.size(); ++a) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(a));
    const auto times = simulate_pair(state.pairs[static_cast<std::size_t>(a)], horizon, rng);
    for (double t : times) log.events.push_back({t, sample_location(a, state.spatial, rng), KnownPair{a}});
  }
  normalize_times(log);
  log.horizon = horizon;
  if (!log.events.empty()) log.horizon = std::max(horizon, log.events.back().t);
  return log;
}

EventLog simulate_event_count(const ModelState& state, const PairTable& pairs, std::size_t count,
                              std::uint64_t seed) {
  if (count == 0) throw InputError("event count must be positive");
  double stationary_rate = 0.0;
  for (const auto& p : state.pairs) {
    if (p.beta >= 1.0) throw InputError("supercritical pair cannot be simulated to a fixed count");
    stationary_rate += p.mu / (1.0 - p.beta);
  }
  if (!(stationary_rate > 0.0)) throw InputError("all background rates are zero");
  double horizon = 2.0 * static_cast<double>(count) / stationary_rate;
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt, horizon *= 2.0) {
    EventLog log = simulate_network(state, pairs, horizon, split_seed(seed, attempt));
    if (log.size() < count) continue;
    log.events.resize(count);
    const double t0 = log.events.front().t;
    for (auto& e : log.events) e.t -= t0;
    log.horizon = log.events.back().t;
    return log;
  }
  throw InputError("could not reach the requested event count");
}

MaskedLog mask_labels(const EventLog& log, const MaskSpec& spec) {
  const std::size_t n = log.size();
  std::size_t k = 0;
  switch (spec.mode) {
    case MaskSpec::Mode::Fraction:
    case MaskSpec::Mode::OneEndpoint:
      if (!(spec.rho >= 0.0 && spec.rho < 1.0)) throw InputError("mask fraction must lie in [0, 1)");
      k = static_cast<std::size_t>(std::lround(spec.rho * static_cast<double>(n)));
      break;
    case MaskSpec::Mode::Count:
      if (spec.count >= n && spec.count > 0) throw InputError("mask count must be smaller than the number of events");
      k = spec.count;
      break;
  }
  MaskedLog out{log, {}};
  if (k == 0) return out;

  Rng rng(split_seed(spec.seed, 0));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates with a portable index draw.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - i));
    std::swap(order[i], order[std::min(j, n - 1)]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());

  for (std::size_t idx : chosen) {
    Event& e = out.log.events[idx];
    const auto* known = std::get_if<KnownPair>(&e.label);
    if (!known) continue;  // already unlabeled
    out.truth.events.push_back(idx);
    out.truth.pairs.push_back(known->pair);
    if (spec.mode != MaskSpec::Mode::OneEndpoint) {
      e.label = UnknownPair{};
      continue;
    }
    const Endpoints ends = log.pairs.endpoints(known->pair);
    const int kept = uniform01(rng) < 0.5 ? ends.first : ends.second;
    auto cands = log.pairs.pairs_with(kept);
    if (static_cast<int>(cands.size()) >= log.pairs.size()) {
      e.label = UnknownPair{};
    } else {
      e.label = CandidateSet{std::move(cands)};
    }
  }
  return out;
}

}  // namespace lppm
