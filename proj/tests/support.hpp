#pragma once

// Oracles and generators shared by the test binaries.

#include "lppm/model.hpp"
#include "lppm/rng.hpp"
#include "lppm/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace lppm::test {

/// Adaptive Gauss-Kronrod integral of f over [a, b], split at `breaks` so
/// the integrand is smooth on every piece.
inline double integrate(const std::function<double(double)>& f, double a, double b, std::vector<double> breaks = {}) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]);
    const double hi = std::min(b, breaks[i + 1]);
    if (!(hi > lo)) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-14);
  }
  return total;
}

/// Kolmogorov-Smirnov statistic of `xs` against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic p-value of the one-sample KS statistic with the Stephens
/// small-sample correction.
inline double ks_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// Random log over `pairs` (complete graph on enough agents) with
/// strictly increasing times in [0, horizon) and Gaussian locations.
inline EventLog random_log(Rng& rng, int agents, std::size_t events, double horizon) {
  EventLog log;
  log.pairs = PairTable::complete(agents);
  log.horizon = horizon;
  std::vector<double> times(events);
  for (auto& t : times) t = horizon * uniform01(rng);
  std::sort(times.begin(), times.end());
  for (double t : times) {
    Event e;
    e.t = t;
    e.x = Vec2(standard_normal(rng), standard_normal(rng));
    e.label = KnownPair{static_cast<PairIndex>(uniform01(rng) * log.pairs.size())};
    log.events.push_back(e);
  }
  normalize_times(log);
  return log;
}

inline ModelState random_state(Rng& rng, int pairs, double horizon) {
  ModelState s;
  s.horizon = horizon;
  std::vector<GaussianComponent> comps;
  for (int a = 0; a < pairs; ++a) {
    s.pairs.push_back({0.05 + 0.5 * uniform01(rng), 0.9 * uniform01(rng), 0.2 + 2.0 * uniform01(rng)});
    GaussianComponent c;
    c.mean = Vec2(standard_normal(rng), standard_normal(rng));
    c.cov = Mat2::Zero();
    c.cov(0, 0) = 0.5 + uniform01(rng);
    c.cov(1, 1) = 0.5 + uniform01(rng);
    comps.push_back(c);
  }
  s.spatial = SpatialModel::per_pair(comps);
  return s;
}

/// Hides `hidden` distinct events chosen at random.
inline std::vector<std::size_t> hide_random(EventLog& log, std::size_t hidden, Rng& rng) {
  std::vector<std::size_t> idx(log.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < hidden; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(hidden);
  std::sort(idx.begin(), idx.end());
  for (auto k : idx) log.events[k].label = UnknownPair{};
  return idx;
}

/// Strictly positive random rows on hidden events, indicators elsewhere.
inline Responsibilities random_phi(const EventLog& log, Rng& rng) {
  Responsibilities phi = initial_responsibilities(log);
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (is_known(log.events[k].label)) continue;
    Eigen::RowVectorXd row(phi.cols());
    for (Eigen::Index a = 0; a < row.size(); ++a) row(a) = 0.05 + uniform01(rng);
    phi.row(static_cast<Eigen::Index>(k)) = row / row.sum();
  }
  return phi;
}

/// Visits every completion of the hidden events' labels.
inline void for_each_assignment(const EventLog& log, const std::function<void(const Assignment&)>& visit) {
  Assignment z(log.size(), 0);
  std::vector<std::size_t> hidden;
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (const auto* kp = std::get_if<KnownPair>(&log.events[k].label)) z[k] = kp->pair;
    else hidden.push_back(k);
  }
  const int m = log.pairs.size();
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == hidden.size()) {
      visit(z);
      return;
    }
    for (int a = 0; a < m; ++a) {
      z[hidden[i]] = a;
      rec(i + 1);
    }
  };
  rec(0);
}

/// sum_z Q(z) [log p(z, Y) - log Q(z)] by enumeration.
inline double brute_force_elbo(const EventLog& log, const Responsibilities& phi, const ModelState& state,
                               ModelMode mode = ModelMode::Full) {
  double total = 0.0;
  for_each_assignment(log, [&](const Assignment& z) {
    double q = 1.0;
    for (std::size_t k = 0; k < z.size(); ++k) q *= phi(static_cast<Eigen::Index>(k), z[k]);
    if (q <= 0.0) return;
    total += q * (complete_data_log_likelihood(log, z, state, mode) - std::log(q));
  });
  return total;
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

inline double standard_error(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1) / v.size());
}

}  // namespace lppm::test
