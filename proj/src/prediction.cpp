#include "lppm/prediction.hpp"

#include "lppm/errors.hpp"
#include "lppm/kernels.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lppm {

double IntensitySnapshot::total_rate(double s) const {
  return mu.sum() + (excitation.array() * (-omega.array() * s).exp()).sum();
}

double IntensitySnapshot::total_mass(double s) const {
  return mu.sum() * s + (excitation.array() * (-(-omega.array() * s).expm1()) / omega.array()).sum();
}

IntensitySnapshot snapshot(const ModelState& state, std::span<const AssignedEvent> history, double t_now) {
  const int m = state.pair_count();
  IntensitySnapshot snap;
  snap.mu.resize(m);
  snap.omega.resize(m);
  snap.excitation = Eigen::VectorXd::Zero(m);
  for (int a = 0; a < m; ++a) {
    snap.mu(a) = state.pairs[static_cast<std::size_t>(a)].mu;
    snap.omega(a) = state.pairs[static_cast<std::size_t>(a)].omega;
  }
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& h : history) {
    if (h.t < prev) throw InputError("history is not sorted by time");
    if (h.t > t_now) throw InputError("history contains events after t_now");
    if (h.pair < 0 || h.pair >= m) throw InputError("history references an unknown pair");
    prev = h.t;
    const auto& p = state.pairs[static_cast<std::size_t>(h.pair)];
    snap.excitation(h.pair) += excitation(p.beta, p.omega, t_now - h.t);
  }
  return snap;
}

IntensitySnapshot snapshot(const ModelState& state, const EventLog& log, const Responsibilities& phi,
                           std::size_t count, double t_now) {
  const int m = state.pair_count();
  IntensitySnapshot snap;
  snap.mu.resize(m);
  snap.omega.resize(m);
  snap.excitation = Eigen::VectorXd::Zero(m);
  for (int a = 0; a < m; ++a) {
    snap.mu(a) = state.pairs[static_cast<std::size_t>(a)].mu;
    snap.omega(a) = state.pairs[static_cast<std::size_t>(a)].omega;
  }
  count = std::min(count, log.size());
  for (std::size_t k = 0; k < count; ++k) {
    const double t = log.events[k].t;
    if (t > t_now) throw InputError("history contains events after t_now");
    for (int a = 0; a < m; ++a) {
      const double w = phi(static_cast<Eigen::Index>(k), a);
      if (w <= 0.0) continue;
      const auto& p = state.pairs[static_cast<std::size_t>(a)];
      snap.excitation(a) += w * excitation(p.beta, p.omega, t_now - t);
    }
  }
  return snap;
}

double expected_waiting_time(const IntensitySnapshot& snap, const WaitingTimeOptions& options) {
  const double rate0 = snap.total_rate(0.0);
  if (!(rate0 > 0.0) || !std::isfinite(rate0)) throw NumericError("total intensity must be positive and finite");
  const double background = snap.mu.sum();
  auto integrand = [&](double s) {
    const double v = s * snap.total_rate(s) * std::exp(-snap.total_mass(s));
    if (!std::isfinite(v)) throw NumericError("non-finite integrand in waiting-time integral");
    return v;
  };
  using Quadrature = boost::math::quadrature::gauss_kronrod<double, 61>;
  // Integrate over successive segments [a, 2a] so the range grows with the
  // scale of the answer.
  double lo = 0.0;
  double hi = 1.0 / rate0;
  double total = 0.0;
  for (int segment = 0; segment < 2000; ++segment) {
    total += Quadrature::integrate(integrand, lo, hi, 30, options.relative_tolerance);
    const double survival = std::exp(-snap.total_mass(hi));
    // For s >= hi the total rate is at least the background, so the tail of
    // the expectation is bounded by S(hi) (hi + 1 / background).
    const double tail = background > 0.0 ? survival * (hi + 1.0 / background) : hi * integrand(hi) * hi;
    if (tail <= options.tail_tolerance * std::max(total, 1e-300)) return total;
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) break;
  }
  throw NumericError("waiting-time integral did not converge");
}

std::vector<PairIndex> rank_next_pairs(const IntensitySnapshot& snap, int k) {
  const auto m = static_cast<int>(snap.pair_count());
  if (k < 0 || k > m) throw InputError("K must lie in [0, M]");
  std::vector<PairIndex> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd rate = snap.mu + snap.excitation;
  std::stable_sort(order.begin(), order.end(), [&](PairIndex a, PairIndex b) { return rate(a) > rate(b); });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

double mape(double actual, double predicted) {
  if (actual == 0.0) throw InputError("MAPE is undefined for a zero actual value");
  return std::abs(actual - predicted) / std::abs(actual);
}

MapeSummary mape(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw InputError("actual and predicted lengths differ");
  MapeSummary s;
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      ++s.skipped;
      continue;
    }
    sum += mape(actual[i], predicted[i]);
    ++s.scored;
  }
  s.mean = s.scored ? sum / static_cast<double>(s.scored) : 0.0;
  return s;
}

}  // namespace lppm
