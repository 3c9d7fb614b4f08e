#include "lppm/variational_em.hpp"

#include "lppm/errors.hpp"
#include "lppm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace lppm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::Index idx(std::size_t k) { return static_cast<Eigen::Index>(k); }

// Concave per-pair temporal objective
//   F(mu, beta, omega) = sum_k phi_k sum_c w_c log(mu + beta K_kc(omega)) - mu T - beta C(omega)
// where K_kc is the unit-beta excitation of configuration c in event k's window.
// Windows and configurations are fixed at construction.
class PairObjective {
 public:
  PairObjective(std::span<const double> times, const Responsibilities& phi, PairIndex a, double horizon,
                double window_omega, const ExpectationOptions& opts)
      : horizon_(horizon) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double w = phi(idx(k), a);
      if (w <= 0.0) continue;
      mass_ += w;
      Entry e;
      e.weight = w;
      e.members = window_members(times, phi, a, k, window_omega, opts);
      e.configs = configurations(e.members.hidden_probs, opts, window_stream(k, a, std::nullopt));
      entries_.push_back(std::move(e));
      if (times[k] < horizon) {
        comp_phi_.push_back(w);
        comp_span_.push_back(horizon - times[k]);
      }
    }
  }

  double mass() const { return mass_; }
  double omega() const { return omega_; }

  // Sums another pair's objective into this one (parameters tied across pairs).
  void absorb(PairObjective&& other) {
    mass_ += other.mass_;
    pairs_ += other.pairs_;
    for (auto& e : other.entries_) entries_.push_back(std::move(e));
    comp_phi_.insert(comp_phi_.end(), other.comp_phi_.begin(), other.comp_phi_.end());
    comp_span_.insert(comp_span_.end(), other.comp_span_.begin(), other.comp_span_.end());
  }

  void set_omega(double omega) {
    omega_ = omega;
    coef_.clear();
    unit_.clear();
    lagged_.clear();
    for (const auto& e : entries_) {
      double fk = 0.0, fd = 0.0;
      for (double lag : e.members.fixed_lags) {
        const double u = omega * std::exp(-omega * lag);
        fk += u;
        fd += lag * u;
      }
      const auto h = static_cast<Eigen::Index>(e.members.hidden_lags.size());
      Eigen::VectorXd gk(h), gd(h);
      for (Eigen::Index i = 0; i < h; ++i) {
        const double lag = e.members.hidden_lags[static_cast<std::size_t>(i)];
        gk(i) = omega * std::exp(-omega * lag);
        gd(i) = lag * gk(i);
      }
      const Eigen::VectorXd ks = e.configs.sums(gk);
      const Eigen::VectorXd ds = e.configs.sums(gd);
      for (Eigen::Index c = 0; c < e.configs.size(); ++c) {
        coef_.push_back(e.weight * e.configs.weights(c));
        unit_.push_back(fk + ks(c));
        lagged_.push_back(fd + ds(c));
      }
    }
    comp_ = 0.0;
    comp_dw_ = 0.0;
    for (std::size_t l = 0; l < comp_phi_.size(); ++l) {
      comp_ += comp_phi_[l] * -std::expm1(-omega * comp_span_[l]);
      comp_dw_ += comp_phi_[l] * comp_span_[l] * std::exp(-omega * comp_span_[l]);
    }
  }

  double value(double mu, double beta) const {
    double v = 0.0;
    for (std::size_t i = 0; i < coef_.size(); ++i) {
      if (coef_[i] == 0.0) continue;
      const double lambda = mu + beta * unit_[i];
      if (!(lambda > 0.0)) return kNegInf;
      v += coef_[i] * std::log(lambda);
    }
    return v - mu * horizon_ * pairs_ - beta * comp_;
  }

  // Gradient and Hessian in (mu, beta).
  void derivatives(double mu, double beta, Eigen::Vector2d& g, Eigen::Matrix2d& h) const {
    g.setZero();
    h.setZero();
    for (std::size_t i = 0; i < coef_.size(); ++i) {
      const double inv = 1.0 / (mu + beta * unit_[i]);
      const double c = coef_[i];
      g(0) += c * inv;
      g(1) += c * unit_[i] * inv;
      h(0, 0) -= c * inv * inv;
      h(0, 1) -= c * unit_[i] * inv * inv;
      h(1, 1) -= c * unit_[i] * unit_[i] * inv * inv;
    }
    h(1, 0) = h(0, 1);
    g(0) -= horizon_ * pairs_;
    g(1) -= comp_;
  }

  // One application of the fixed-point updates obtained by nullifying the
  // mu and beta derivatives.
  std::pair<double, double> fixed_point(double mu, double beta) const {
    double num_mu = 0.0, num_beta = 0.0;
    for (std::size_t i = 0; i < coef_.size(); ++i) {
      const double lambda = mu + beta * unit_[i];
      num_mu += coef_[i] * mu / lambda;
      num_beta += coef_[i] * beta * unit_[i] / lambda;
    }
    const double new_beta = comp_ > 0.0 ? num_beta / comp_ : beta;
    return {num_mu / (horizon_ * pairs_), new_beta};
  }

  // dF/domega at the current omega.
  double omega_derivative(double mu, double beta) const {
    double d = 0.0;
    for (std::size_t i = 0; i < coef_.size(); ++i) {
      d += coef_[i] * beta * (unit_[i] / omega_ - lagged_[i]) / (mu + beta * unit_[i]);
    }
    return d - beta * comp_dw_;
  }

  // Ratio obtained by dropping the compensator term of the omega condition.
  double closed_form_omega(double mu, double beta) const {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < coef_.size(); ++i) {
      const double lambda = mu + beta * unit_[i];
      num += coef_[i] * beta * unit_[i] / lambda;
      den += coef_[i] * beta * lagged_[i] / lambda;
    }
    return den > 0.0 ? num / den : omega_;
  }

 private:
  struct Entry {
    double weight = 0.0;
    WindowMembers members;
    ConfigurationSet configs;
  };

  double horizon_;
  double pairs_ = 1.0;
  double mass_ = 0.0;
  double omega_ = 1.0;
  std::vector<Entry> entries_;
  std::vector<double> comp_phi_, comp_span_;
  std::vector<double> coef_, unit_, lagged_;
  double comp_ = 0.0, comp_dw_ = 0.0;
};

double clamp_beta(double b) { return std::clamp(b, 0.0, kBetaCeiling); }

// Maximizes the concave objective over mu >= floor, 0 <= beta <= ceiling.
void solve_mu_beta(const PairObjective& obj, double& mu, double& beta) {
  mu = std::max(mu, kMuFloor);
  beta = clamp_beta(beta);
  // A few passes of the fixed-point map; each one is a minorize-maximize step.
  for (int it = 0; it < 5; ++it) {
    auto [m, b] = obj.fixed_point(mu, beta);
    mu = std::max(m, kMuFloor);
    beta = clamp_beta(b);
  }
  double f = obj.value(mu, beta);
  for (int it = 0; it < 100; ++it) {
    Eigen::Vector2d g;
    Eigen::Matrix2d h;
    obj.derivatives(mu, beta, g, h);
    const bool mu_free = !(mu <= kMuFloor && g(0) < 0.0);
    const bool beta_free = !((beta <= 0.0 && g(1) < 0.0) || (beta >= kBetaCeiling && g(1) > 0.0));
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    if (mu_free && beta_free && h(0, 0) < 0.0 && h(0, 0) * h(1, 1) - h(0, 1) * h(0, 1) > 0.0) {
      d = -h.ldlt().solve(g);
    } else if (mu_free && h(0, 0) < 0.0) {
      d(0) = -g(0) / h(0, 0);
    } else if (beta_free && h(1, 1) < 0.0) {
      d(1) = -g(1) / h(1, 1);
    } else if (beta_free) {
      // objective linear in beta: move to the bound the gradient points at
      d(1) = g(1) > 0.0 ? kBetaCeiling - beta : -beta;
    }
    if (d.isZero(0.0)) break;
    double step = 1.0;
    bool accepted = false;
    double nm = mu, nb = beta, nf = f;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      nm = std::max(mu + step * d(0), kMuFloor);
      nb = clamp_beta(beta + step * d(1));
      nf = obj.value(nm, nb);
      if (nf >= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const bool tiny = std::abs(nm - mu) <= 1e-15 * std::max(mu, kMuFloor) && std::abs(nb - beta) <= 1e-15;
    mu = nm;
    beta = nb;
    f = nf;
    if (tiny) break;
  }
}

// Safeguarded Newton on dF/d(log omega) = 0. Returns nullopt when no sign
// change from ascent to descent can be bracketed.
std::optional<double> newton_omega(PairObjective& obj, double mu, double beta, double omega0) {
  auto deriv = [&](double u) {
    obj.set_omega(std::exp(u));
    return obj.omega_derivative(mu, beta) * std::exp(u);  // dF/du
  };
  double u0 = std::log(omega0);
  double h0 = deriv(u0);
  if (h0 == 0.0) return omega0;
  const double dir = h0 > 0.0 ? 1.0 : -1.0;
  double lo = u0, hlo = h0, hi = u0, hhi = h0;
  bool bracketed = false;
  for (int s = 0; s < 60; ++s) {
    const double u = u0 + dir * std::log(2.0) * (s + 1);
    if (u > std::log(1e10) || u < std::log(1e-10)) break;
    const double hv = deriv(u);
    if ((hv > 0.0) != (h0 > 0.0)) {
      hi = u;
      hhi = hv;
      bracketed = true;
      break;
    }
    lo = u;
    hlo = hv;
  }
  if (!bracketed) return std::nullopt;
  // Invariant: sign(h(lo)) == sign(h0), sign(h(hi)) != sign(h0).
  double u = 0.5 * (lo + hi);
  for (int it = 0; it < 50; ++it) {
    const double hv = deriv(u);
    if (hv == 0.0) break;
    if ((hv > 0.0) == (hlo > 0.0)) {
      lo = u;
      hlo = hv;
    } else {
      hi = u;
      hhi = hv;
    }
    const double eps = 1e-6;
    const double slope = (deriv(u + eps) - deriv(u - eps)) / (2.0 * eps);
    double next = slope != 0.0 ? u - hv / slope : 0.5 * (lo + hi);
    const double a = std::min(lo, hi), b = std::max(lo, hi);
    if (!(next > a && next < b)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) < 1e-12 || std::abs(hi - lo) < 1e-12) {
      u = next;
      break;
    }
    u = next;
  }
  (void)hhi;
  return std::exp(u);
}

std::vector<std::size_t> unlabeled_events(const EventLog& log) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (!is_known(log.events[k].label)) out.push_back(k);
  }
  return out;
}

// k-means with farthest-point seeding; deterministic.
std::vector<Vec2> kmeans(const std::vector<Vec2>& points, int clusters) {
  std::vector<Vec2> centers;
  if (points.empty()) return std::vector<Vec2>(static_cast<std::size_t>(clusters), Vec2::Zero());
  centers.push_back(points.front());
  while (static_cast<int>(centers.size()) < clusters) {
    double best = -1.0;
    Vec2 pick = points.front();
    for (const auto& p : points) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d = std::min(d, (p - c).squaredNorm());
      if (d > best) {
        best = d;
        pick = p;
      }
    }
    centers.push_back(pick);
  }
  std::vector<int> assign(points.size(), 0);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < clusters; ++c) {
        const double d = (points[i] - centers[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      changed |= assign[i] != arg;
      assign[i] = arg;
    }
    std::vector<Vec2> sum(static_cast<std::size_t>(clusters), Vec2::Zero());
    std::vector<int> count(static_cast<std::size_t>(clusters), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sum[static_cast<std::size_t>(assign[i])] += points[i];
      ++count[static_cast<std::size_t>(assign[i])];
    }
    for (int c = 0; c < clusters; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) {
        centers[static_cast<std::size_t>(c)] = sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)];
      }
    }
    if (!changed && it > 0) break;
  }
  return centers;
}

double relative_change(double now, double before, double scale) {
  return std::abs(now - before) / std::max(std::abs(before), scale);
}

double state_change(const ModelState& now, const ModelState& before) {
  double worst = 0.0;
  for (std::size_t a = 0; a < now.pairs.size(); ++a) {
    worst = std::max(worst, relative_change(now.pairs[a].mu, before.pairs[a].mu, kMuFloor));
    worst = std::max(worst, relative_change(now.pairs[a].beta, before.pairs[a].beta, 1e-3));
    worst = std::max(worst, relative_change(now.pairs[a].omega, before.pairs[a].omega, kOmegaFloor));
  }
  for (std::size_t c = 0; c < now.spatial.components.size(); ++c) {
    const auto& x = now.spatial.components[c];
    const auto& y = before.spatial.components[c];
    for (int i = 0; i < 2; ++i) {
      worst = std::max(worst, relative_change(x.mean(i), y.mean(i), 1.0));
      for (int j = 0; j < 2; ++j) worst = std::max(worst, relative_change(x.cov(i, j), y.cov(i, j), 1e-6));
    }
  }
  if (now.spatial.weights.size() == before.spatial.weights.size() && now.spatial.weights.size() > 0) {
    worst = std::max(worst, (now.spatial.weights - before.spatial.weights).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

void validate(const FitConfig& c) {
  if (c.window < 0) throw InputError("window must be non-negative (0 selects the adaptive window)");
  if (c.max_outer_iters < 1 || c.max_estep_sweeps < 1 || c.exact_config_limit < 0 || c.mc_samples < 1) {
    throw InputError("iteration and sample counts must be positive");
  }
  if (!(c.tol_phi > 0.0 && c.tol_phi < 1.0) || !(c.tol_params > 0.0 && c.tol_params < 1.0)) {
    throw InputError("tolerances must lie in (0, 1)");
  }
  if (!(c.min_variance > 0.0)) throw InputError("min_variance must be positive");
}

namespace {

LogIntensityTerms log_intensity_terms(std::span<const double> times, double horizon, std::size_t p, PairIndex a,
                                      const Responsibilities& phi, const ModelState& state,
                                      const ExpectationOptions& opts) {
  const PairParams& params = state.pairs.at(static_cast<std::size_t>(a));
  LogIntensityTerms out;
  out.self_term = expected_log_intensity(times, phi, a, p, params, opts);
  if (params.beta > 0.0) {
    for (std::size_t k = p + 1; k < times.size() && in_window(times, p, k, params.omega, opts); ++k) {
      const double w = phi(idx(k), a);
      if (w <= 0.0) continue;
      const WindowMembers members = window_members(times, phi, a, k, params.omega, opts, p);
      const ConfigurationSet configs = configurations(members.hidden_probs, opts, window_stream(k, a, p));
      const Eigen::VectorXd base = excitation_per_configuration(members, configs, params).array() + params.mu;
      const double gp = excitation(params.beta, params.omega, times[k] - times[p]);
      double e = 0.0;
      for (Eigen::Index c = 0; c < configs.size(); ++c) e += configs.weights(c) * std::log1p(gp / base(c));
      out.future_terms += w * e;
    }
    out.compensator_term = -excitation_mass(params.beta, params.omega, horizon - times[p]);
  }
  return out;
}

}  // namespace

LogIntensityTerms expected_log_intensity_terms(const EventLog& log, std::size_t p, PairIndex a,
                                               const Responsibilities& phi, const ModelState& state,
                                               const FitConfig& config) {
  if (p >= log.size()) throw InputError("event index out of range");
  const auto times = event_times(log);
  return log_intensity_terms(times, log.horizon, p, a, phi, state, config.expectation());
}

namespace {

Eigen::RowVectorXd update_row(const EventLog& log, std::span<const double> times, std::size_t p,
                              const Responsibilities& phi, const ModelState& state, const FitConfig& config,
                              const Eigen::MatrixXd* log_r) {
  const int m = state.pair_count();
  const auto allowed = admissible_pairs(log.events.at(p).label, m);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m);
  if (allowed.size() == 1) {
    row(allowed.front()) = 1.0;
    return row;
  }
  Eigen::VectorXd score(static_cast<Eigen::Index>(allowed.size()));
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    const PairIndex a = allowed[i];
    double s = 0.0;
    if (uses_temporal(config.mode)) s += log_intensity_terms(times, log.horizon, p, a, phi, state, config.expectation()).total();
    if (uses_spatial(config.mode)) {
      s += log_r ? (*log_r)(idx(p), a) : spatial_log_density(a, log.events[p].x, state.spatial);
    }
    score(static_cast<Eigen::Index>(i)) = std::isnan(s) ? kNegInf : s;
  }
  const double top = score.maxCoeff();
  if (top == kNegInf) throw NumericError("event " + std::to_string(p) + " has zero likelihood under every admissible pair");
  const Eigen::VectorXd w = (score.array() - top).exp();
  const double total = w.sum();
  for (std::size_t i = 0; i < allowed.size(); ++i) row(allowed[i]) = w(static_cast<Eigen::Index>(i)) / total;
  return row;
}

}  // namespace

Eigen::RowVectorXd estep_update_phi(const EventLog& log, std::size_t p, const Responsibilities& phi,
                                    const ModelState& state, const FitConfig& config, const Eigen::MatrixXd* log_r) {
  if (p >= log.size()) throw InputError("event index out of range");
  const auto times = event_times(log);
  return update_row(log, times, p, phi, state, config, log_r);
}

SweepResult estep_sweep(const EventLog& log, Responsibilities& phi, const ModelState& state, const FitConfig& config) {
  SweepResult result;
  auto order = unlabeled_events(log);
  if (order.empty()) return result;
  if (config.sweep_order == SweepOrder::Reverse) std::reverse(order.begin(), order.end());
  Eigen::MatrixXd log_r;
  if (uses_spatial(config.mode)) log_r = spatial_log_densities(log, state.spatial);
  const Eigen::MatrixXd* lr = uses_spatial(config.mode) ? &log_r : nullptr;
  const auto times = event_times(log);
  result.converged = false;
  for (int sweep = 0; sweep < config.max_estep_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t p : order) {
      const Eigen::RowVectorXd row = update_row(log, times, p, phi, state, config, lr);
      change = std::max(change, (row - phi.row(idx(p))).cwiseAbs().maxCoeff());
      phi.row(idx(p)) = row;
    }
    result.sweeps = sweep + 1;
    result.change = change;
    if (change < config.tol_phi) {
      result.converged = true;
      break;
    }
  }
  return result;
}

SpatialUpdate mstep_spatial(const EventLog& log, const Responsibilities& phi, const SpatialModel& previous,
                            const FitConfig& config) {
  SpatialUpdate out{previous, {}};
  const int m = log.pairs.size();
  const auto n = idx(log.size());
  if (previous.mode == SpatialMode::PerPairGaussian) {
    for (int a = 0; a < m; ++a) {
      const double mass = phi.col(a).sum();
      if (!(mass > 1e-12)) {
        out.frozen.push_back(a);
        continue;
      }
      Vec2 mean = Vec2::Zero();
      for (Eigen::Index k = 0; k < n; ++k) mean += phi(k, a) * log.events[static_cast<std::size_t>(k)].x;
      mean /= mass;
      Vec2 var = Vec2::Zero();
      for (Eigen::Index k = 0; k < n; ++k) {
        var += phi(k, a) * (log.events[static_cast<std::size_t>(k)].x - mean).cwiseAbs2();
      }
      var /= mass;
      auto& comp = out.model.components[static_cast<std::size_t>(a)];
      comp.mean = mean;
      comp.cov = var.cwiseMax(config.min_variance).asDiagonal();
    }
    return out;
  }
  const auto comps = static_cast<Eigen::Index>(previous.components.size());
  // ratio(k, c) = N(x_k; c) / sum_c' N(x_k; c')
  Eigen::MatrixXd ratio(n, comps);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXd lg(comps);
    for (Eigen::Index c = 0; c < comps; ++c) {
      const auto& comp = previous.components[static_cast<std::size_t>(c)];
      lg(c) = gaussian_log_density(log.events[static_cast<std::size_t>(k)].x, comp.mean, comp.cov);
    }
    const double norm = log_sum_exp(lg);
    ratio.row(k) = (lg.array() - norm).exp().matrix().transpose();
  }
  for (int a = 0; a < m; ++a) {
    const double mass = phi.col(a).sum();
    if (!(mass > 1e-12)) {
      out.frozen.push_back(a);
      continue;
    }
    out.model.weights.row(a) = (phi.col(a).transpose() * ratio) / mass;
  }
  return out;
}

namespace {

// Maximizes the pair objective over (mu, beta) and then omega; omega moves
// only when the objective does not decrease.
template <typename OnFallback>
void maximize_pair(PairObjective& obj, PairParams& p, const FitConfig& config, OnFallback on_fallback) {
  obj.set_omega(p.omega);
  solve_mu_beta(obj, p.mu, p.beta);
  if (!(p.beta > 0.0)) return;
  const double before = obj.value(p.mu, p.beta);
  const double old_omega = p.omega;
  std::optional<double> proposal;
  if (config.omega_solver == OmegaSolver::Newton) {
    proposal = newton_omega(obj, p.mu, p.beta, old_omega);
    if (!proposal) on_fallback();
  }
  if (!proposal) {
    obj.set_omega(old_omega);
    proposal = obj.closed_form_omega(p.mu, p.beta);
  }
  const double candidate = std::max(*proposal, kOmegaFloor);
  obj.set_omega(candidate);
  if (std::isfinite(candidate) && obj.value(p.mu, p.beta) >= before) {
    p.omega = candidate;
  } else {
    obj.set_omega(old_omega);
  }
  solve_mu_beta(obj, p.mu, p.beta);
}

}  // namespace

TemporalUpdate mstep_temporal(const EventLog& log, const Responsibilities& phi, const ModelState& state,
                              const FitConfig& config) {
  TemporalUpdate out;
  out.params = state.pairs;
  const auto times = event_times(log);
  const ExpectationOptions opts = config.expectation();
  const double horizon = log.horizon;
  if (!(horizon > 0.0)) throw InputError("horizon must be positive to estimate rates");
  for (int a = 0; a < state.pair_count(); ++a) {
    PairParams& p = out.params[static_cast<std::size_t>(a)];
    if (!config.learn_excitation) {
      // Homogeneous Poisson: the mu fixed point is sum_k phi_ka / T exactly.
      p.beta = 0.0;
      const double mass = config.tie_temporal ? phi.sum() / state.pair_count() : phi.col(a).sum();
      p.mu = std::max(mass / horizon, kMuFloor);
      if (!(mass > 0.0)) out.frozen.push_back(a);
      continue;
    }
    PairObjective obj(times, phi, a, horizon, p.omega, opts);
    if (config.tie_temporal) {
      for (PairIndex b = a + 1; b < state.pair_count(); ++b) obj.absorb(PairObjective(times, phi, b, horizon, p.omega, opts));
    }
    if (!(obj.mass() > 0.0)) {
      p.mu = kMuFloor;
      out.frozen.push_back(a);
      continue;
    }
    maximize_pair(obj, p, config, [&] { out.omega_fallback.push_back(a); });
    if (config.tie_temporal) {
      std::fill(out.params.begin(), out.params.end(), p);
      break;
    }
  }
  return out;
}

ModelState initial_state(const EventLog& log, const FitConfig& config) {
  const int m = log.pairs.size();
  const auto n = log.size();
  ModelState state;
  state.horizon = log.horizon;
  const double horizon = log.horizon > 0.0 ? log.horizon : 1.0;
  double omega = 1.0;
  if (n >= 2) {
    const double span = log.events.back().t - log.events.front().t;
    if (span > 0.0) omega = 2.0 / (span / static_cast<double>(n - 1));
  }
  PairParams init;
  init.mu = std::max(static_cast<double>(n) / (static_cast<double>(m) * horizon), kMuFloor);
  init.beta = config.learn_excitation ? 0.5 : 0.0;
  init.omega = omega;
  state.pairs.assign(static_cast<std::size_t>(m), init);

  // Spatial initialization from labeled means and pooled within-pair spread.
  std::vector<Vec2> sum(static_cast<std::size_t>(m), Vec2::Zero());
  std::vector<int> count(static_cast<std::size_t>(m), 0);
  Vec2 all_mean = Vec2::Zero();
  std::vector<Vec2> all_points;
  for (const auto& e : log.events) {
    all_mean += e.x;
    all_points.push_back(e.x);
    if (const auto* k = std::get_if<KnownPair>(&e.label)) {
      sum[static_cast<std::size_t>(k->pair)] += e.x;
      ++count[static_cast<std::size_t>(k->pair)];
    }
  }
  if (n > 0) all_mean /= static_cast<double>(n);
  Vec2 all_var = Vec2::Zero();
  for (const auto& e : log.events) all_var += (e.x - all_mean).cwiseAbs2();
  if (n > 1) all_var /= static_cast<double>(n);

  std::vector<Vec2> means(static_cast<std::size_t>(m), all_mean);
  const bool any_labeled = std::any_of(count.begin(), count.end(), [](int c) { return c > 0; });
  if (any_labeled) {
    for (int a = 0; a < m; ++a) {
      if (count[static_cast<std::size_t>(a)] > 0) means[static_cast<std::size_t>(a)] = sum[static_cast<std::size_t>(a)] / count[static_cast<std::size_t>(a)];
    }
  } else {
    means = kmeans(all_points, m);
  }
  Vec2 pooled = Vec2::Zero();
  int pooled_n = 0;
  std::vector<Vec2> var(static_cast<std::size_t>(m), Vec2::Zero());
  for (const auto& e : log.events) {
    if (const auto* k = std::get_if<KnownPair>(&e.label)) {
      const Vec2 d = (e.x - means[static_cast<std::size_t>(k->pair)]).cwiseAbs2();
      var[static_cast<std::size_t>(k->pair)] += d;
      pooled += d;
      ++pooled_n;
    }
  }
  const int groups = static_cast<int>(std::count_if(count.begin(), count.end(), [](int c) { return c > 0; }));
  if (pooled_n - groups > 0) {
    pooled /= static_cast<double>(pooled_n - groups);
  } else {
    pooled = all_var;
  }
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    Vec2 v = count[ua] >= 2 ? Vec2(var[ua] / count[ua]) : pooled;
    v = v.cwiseMax(config.min_variance);
    comps[ua].mean = means[ua];
    comps[ua].cov = v.asDiagonal();
  }
  state.spatial = SpatialModel::per_pair(std::move(comps));
  return state;
}

FitReport fit(const EventLog& log, const FitConfig& config, std::optional<ModelState> initial) {
  if (log.empty()) throw InputError("cannot fit an empty event log");
  validate(log);
  validate(config);
  FitReport report;
  report.state = initial ? std::move(*initial) : initial_state(log, config);
  if (report.state.pair_count() != log.pairs.size()) throw InputError("initial state has the wrong number of pairs");
  report.state.horizon = log.horizon;
  if (!config.learn_excitation) {
    for (auto& p : report.state.pairs) p.beta = 0.0;
  }
  const ExpectationOptions opts = config.expectation();
  const Responsibilities uniform = initial_responsibilities(log);
  report.phi = uniform;
  const auto hidden = unlabeled_events(log);

  for (int it = 0; it < config.max_outer_iters; ++it) {
    const Responsibilities warm = report.phi;
    if (config.reinit_hidden && it > 0) {
      for (std::size_t k : hidden) report.phi.row(idx(k)) = uniform.row(idx(k));
    }
    const SweepResult sweep = estep_sweep(log, report.phi, report.state, config);
    report.estep_sweeps += sweep.sweeps;
    report.estep_converged = sweep.converged;
    if (config.reinit_hidden && it > 0 && !hidden.empty()) {
      // A restart may land in a worse local optimum than the warm rows.
      if (elbo(log, report.phi, report.state, opts, config.mode) < elbo(log, warm, report.state, opts, config.mode)) {
        report.phi = warm;
      }
    }
    const ModelState before = report.state;
    std::set<PairIndex> frozen;
    if (uses_spatial(config.mode)) {
      auto update = mstep_spatial(log, report.phi, report.state.spatial, config);
      report.state.spatial = std::move(update.model);
      frozen.insert(update.frozen.begin(), update.frozen.end());
    }
    if (uses_temporal(config.mode)) {
      auto update = mstep_temporal(log, report.phi, report.state, config);
      report.state.pairs = std::move(update.params);
      frozen.insert(update.frozen.begin(), update.frozen.end());
      report.omega_fallbacks += static_cast<int>(update.omega_fallback.size());
    }
    report.frozen_pairs.assign(frozen.begin(), frozen.end());
    report.elbo_trace.push_back(elbo(log, report.phi, report.state, opts, config.mode));
    report.outer_iters = it + 1;
    if (state_change(report.state, before) < config.tol_params) {
      report.params_converged = true;
      break;
    }
  }
  return report;
}

}  // namespace lppm
