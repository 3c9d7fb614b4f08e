#include "lppm/model.hpp"

#include "lppm/errors.hpp"
#include "lppm/kernels.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lppm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

const PairParams& params_of(const ModelState& state, PairIndex a) {
  if (a < 0 || a >= state.pair_count()) throw InputError("pair index " + std::to_string(a) + " out of range");
  return state.pairs[static_cast<std::size_t>(a)];
}

void check_history(std::span<const AssignedEvent> history) {
  for (std::size_t k = 1; k < history.size(); ++k) {
    if (history[k].t < history[k - 1].t) throw InputError("history is not sorted by time");
  }
}

}  // namespace

double temporal_intensity(PairIndex a, double t, std::span<const AssignedEvent> history, const ModelState& state) {
  if (!(t >= 0.0)) throw InputError("intensity requested at negative time");
  check_history(history);
  const PairParams& p = params_of(state, a);
  double rate = p.mu;
  for (const auto& h : history) {
    if (h.t > t) throw InputError("history contains events after the evaluation time");
    if (h.pair == a) rate += excitation(p.beta, p.omega, t - h.t);
  }
  return rate;
}

double compensator(PairIndex a, double upto, std::span<const AssignedEvent> history, const ModelState& state) {
  if (!(upto >= 0.0)) throw InputError("compensator requested over a negative horizon");
  check_history(history);
  const PairParams& p = params_of(state, a);
  double total = p.mu * upto;
  for (const auto& h : history) {
    if (h.pair == a && h.t < upto) total += excitation_mass(p.beta, p.omega, upto - h.t);
  }
  return total;
}

double spatial_log_density(PairIndex a, const Vec2& x, const SpatialModel& spatial) {
  if (spatial.mode == SpatialMode::PerPairGaussian) {
    const auto& c = spatial.components.at(static_cast<std::size_t>(a));
    const double v = gaussian_log_density(x, c.mean, c.cov);
    if (v == kNegInf) throw NumericError("singular covariance for pair " + std::to_string(a));
    return v;
  }
  const auto n = static_cast<Eigen::Index>(spatial.components.size());
  Eigen::VectorXd terms(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& comp = spatial.components[static_cast<std::size_t>(c)];
    const double lg = gaussian_log_density(x, comp.mean, comp.cov);
    if (lg == kNegInf) throw NumericError("singular covariance for component " + std::to_string(c));
    const double w = spatial.weights(a, c);
    terms(c) = w > 0.0 ? std::log(w) + lg : kNegInf;
  }
  return log_sum_exp(terms);
}

double spatial_density(PairIndex a, const Vec2& x, const SpatialModel& spatial) {
  return std::exp(spatial_log_density(a, x, spatial));
}

Eigen::MatrixXd spatial_log_densities(const EventLog& log, const SpatialModel& spatial) {
  const int m = log.pairs.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(log.size()), m);
  for (std::size_t k = 0; k < log.size(); ++k) {
    for (int a = 0; a < m; ++a) out(static_cast<Eigen::Index>(k), a) = spatial_log_density(a, log.events[k].x, spatial);
  }
  return out;
}

std::vector<double> event_times(const EventLog& log) {
  std::vector<double> t(log.size());
  for (std::size_t k = 0; k < log.size(); ++k) t[k] = log.events[k].t;
  return t;
}

double expected_compensator(std::span<const double> times, const Responsibilities& phi, PairIndex a,
                            const PairParams& params, double horizon) {
  double total = params.mu * horizon;
  if (params.beta == 0.0) return total;
  for (std::size_t l = 0; l < times.size(); ++l) {
    const double p = phi(static_cast<Eigen::Index>(l), a);
    if (p > 0.0 && times[l] < horizon) total += p * excitation_mass(params.beta, params.omega, horizon - times[l]);
  }
  return total;
}

double complete_data_log_likelihood(const EventLog& log, const Assignment& assignment, const ModelState& state,
                                    ModelMode mode) {
  if (assignment.size() != log.size()) throw InputError("assignment must cover every event");
  const int m = state.pair_count();
  double total = 0.0;
  if (uses_temporal(mode)) {
    // Recursive excitation per pair: A_a(t_k) = sum_{l<k, z_l=a} beta omega e^{-omega (t_k - t_l)}.
    std::vector<double> excite(static_cast<std::size_t>(m), 0.0);
    std::vector<double> last(static_cast<std::size_t>(m), 0.0);
    std::vector<AssignedEvent> history;
    for (std::size_t k = 0; k < log.size(); ++k) {
      const PairIndex a = assignment[k];
      if (a < 0 || a >= m) throw InputError("assignment references an unknown pair");
      const auto ua = static_cast<std::size_t>(a);
      const PairParams& p = state.pairs[ua];
      const double t = log.events[k].t;
      const double lambda = p.mu + excite[ua] * std::exp(-p.omega * (t - last[ua]));
      if (!(lambda > 0.0)) return kNegInf;
      total += std::log(lambda);
      excite[ua] = excite[ua] * std::exp(-p.omega * (t - last[ua])) + p.beta * p.omega;
      last[ua] = t;
      history.push_back({t, a});
    }
    for (int a = 0; a < m; ++a) total -= compensator(a, log.horizon, history, state);
  }
  if (uses_spatial(mode)) {
    for (std::size_t k = 0; k < log.size(); ++k) {
      const double lr = spatial_log_density(assignment[k], log.events[k].x, state.spatial);
      if (lr == kNegInf) return kNegInf;
      total += lr;
    }
  }
  return total;
}

ElboTerms elbo_terms(const EventLog& log, const Responsibilities& phi, const ModelState& state,
                     const ExpectationOptions& opts, ModelMode mode) {
  const int m = state.pair_count();
  const auto times = event_times(log);
  ElboTerms out;
  if (uses_temporal(mode)) {
    for (int a = 0; a < m; ++a) {
      const PairParams& p = state.pairs[static_cast<std::size_t>(a)];
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double w = phi(static_cast<Eigen::Index>(k), a);
        if (w <= 0.0) continue;
        out.temporal += w * expected_log_intensity(times, phi, a, k, p, opts);
      }
      out.temporal -= expected_compensator(times, phi, a, p, log.horizon);
    }
  }
  if (uses_spatial(mode)) {
    for (std::size_t k = 0; k < log.size(); ++k) {
      for (int a = 0; a < m; ++a) {
        const double w = phi(static_cast<Eigen::Index>(k), a);
        if (w > 0.0) out.spatial += w * spatial_log_density(a, log.events[k].x, state.spatial);
      }
    }
  }
  for (Eigen::Index k = 0; k < phi.rows(); ++k) {
    for (Eigen::Index a = 0; a < phi.cols(); ++a) {
      const double w = phi(k, a);
      if (w > 0.0) out.entropy -= w * std::log(w);
    }
  }
  return out;
}

}  // namespace lppm
