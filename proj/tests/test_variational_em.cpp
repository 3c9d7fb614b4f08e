#include "doctest.h"

#include "lppm/baselines.hpp"
#include "lppm/errors.hpp"
#include "lppm/kernels.hpp"
#include "lppm/run_config.hpp"
#include "lppm/simulator.hpp"
#include "lppm/variational_em.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace lppm;

namespace {

FitConfig wide_window() {
  FitConfig c;
  c.window = 100;
  return c;
}

EventLog two_pair_log(std::vector<double> times, std::vector<Label> labels, double horizon) {
  EventLog log;
  log.pairs = PairTable(3, {{0, 1}, {0, 2}});
  log.horizon = horizon;
  for (std::size_t k = 0; k < times.size(); ++k) log.events.push_back({times[k], Vec2::Zero(), labels[k]});
  return log;
}

ModelState twin_state(double mu, double beta, double omega) {
  ModelState s;
  s.pairs = {{mu, beta, omega}, {mu, beta, omega}};
  s.spatial = SpatialModel::per_pair({GaussianComponent{}, GaussianComponent{}});
  return s;
}

double finite_difference(const std::function<double(double)>& f, double x) {
  const double h = 1e-6 * std::max(std::abs(x), 1e-3);
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

EventLog table1_log(std::uint64_t seed, std::size_t hidden) {
  RunConfig c;
  c.model.layout = "origin";
  const EventLog full = simulate_event_count(build_state(c.model, 0.0), build_pairs(c.model), 40, seed);
  return mask_labels(full, MaskSpec::exact_count(hidden, seed + 1)).log;
}

}  // namespace

TEST_CASE("self term with every label known is the direct log intensity") {
  const EventLog log = two_pair_log({0.0, 1.0, 2.5, 3.0}, {KnownPair{0}, KnownPair{1}, KnownPair{0}, UnknownPair{}}, 5.0);
  ModelState s = twin_state(0.2, 0.6, 0.8);
  s.pairs[1] = {0.1, 0.3, 2.0};
  const Responsibilities phi = initial_responsibilities(log);
  for (PairIndex a = 0; a < 2; ++a) {
    std::vector<AssignedEvent> h{{0.0, 0}, {1.0, 1}, {2.5, 0}};
    const auto t = expected_log_intensity_terms(log, 3, a, phi, s, wide_window());
    CHECK(t.self_term == doctest::Approx(std::log(temporal_intensity(a, 3.0, h, s))).epsilon(1e-14));
  }
}

TEST_CASE("one hidden predecessor expands to two configurations") {
  const EventLog log = two_pair_log({0.0, 1.0, 2.0}, {KnownPair{0}, UnknownPair{}, UnknownPair{}}, 4.0);
  ModelState s = twin_state(0.2, 0.6, 0.8);
  Responsibilities phi = initial_responsibilities(log);
  phi.row(1) << 0.7, 0.3;
  phi.row(2) << 0.4, 0.6;
  const PairParams& p = s.pairs[0];
  const double g0 = excitation(p.beta, p.omega, 2.0);
  const double g1 = excitation(p.beta, p.omega, 1.0);
  const auto self = expected_log_intensity_terms(log, 2, 0, phi, s, wide_window());
  CHECK(self.self_term == doctest::Approx(0.7 * std::log(p.mu + g0 + g1) + 0.3 * std::log(p.mu + g0)).epsilon(1e-14));

  // event 1 as the subject: event 2 is its only successor, event 0 fixed in its window
  const auto t = expected_log_intensity_terms(log, 1, 0, phi, s, wide_window());
  const double base = p.mu + excitation(p.beta, p.omega, 2.0);
  CHECK(t.future_terms == doctest::Approx(0.4 * std::log((base + g1) / base)).epsilon(1e-14));
  CHECK(t.compensator_term == doctest::Approx(-p.beta * (1.0 - std::exp(-p.omega * 3.0))).epsilon(1e-14));
}

TEST_CASE("zero excitation leaves only the background in the row scores") {
  const EventLog log = two_pair_log({0.0, 1.0, 2.0}, {KnownPair{0}, UnknownPair{}, UnknownPair{}}, 4.0);
  const ModelState s = twin_state(0.2, 0.0, 0.8);
  const Responsibilities phi = initial_responsibilities(log);
  const auto t = expected_log_intensity_terms(log, 1, 1, phi, s, wide_window());
  CHECK(t.future_terms == 0.0);
  CHECK(t.compensator_term == 0.0);
  CHECK(t.self_term == doctest::Approx(std::log(0.2)).epsilon(1e-15));
}

TEST_CASE("row update for symmetric pairs is uniform") {
  const EventLog log = two_pair_log({0.0, 1.0}, {UnknownPair{}, UnknownPair{}}, 3.0);
  const ModelState s = twin_state(0.2, 0.5, 1.0);
  const auto row = estep_update_phi(log, 0, initial_responsibilities(log), s, wide_window());
  CHECK(row(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(row(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("row update with a 3:1 spatial density ratio") {
  EventLog log = two_pair_log({1.0}, {UnknownPair{}}, 3.0);
  ModelState s = twin_state(0.2, 0.5, 1.0);
  GaussianComponent wide;
  wide.cov = Mat2::Identity() * 3.0;
  s.spatial = SpatialModel::per_pair({GaussianComponent{}, wide});
  // at the shared mean the densities are 1/(2pi) and 1/(2pi*3)
  const auto row = estep_update_phi(log, 0, initial_responsibilities(log), s, wide_window());
  CHECK(row(0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(row(1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("row update with no admissible explanation is a numeric error") {
  const EventLog log = two_pair_log({1.0}, {UnknownPair{}}, 3.0);
  FitConfig c = wide_window();
  c.mode = ModelMode::TemporalOnly;
  CHECK_THROWS_AS(estep_update_phi(log, 0, initial_responsibilities(log), twin_state(0.0, 0.5, 1.0), c), NumericError);
}

TEST_CASE("sweep leaves known rows alone and keeps rows normalized") {
  Rng rng = make_rng(21, 0);
  for (int trial = 0; trial < 20; ++trial) {
    EventLog log = test::random_log(rng, 3, 15, 20.0);
    const auto hidden = test::hide_random(log, 5, rng);
    log.events[hidden[0]].label = CandidateSet{{0, 2}};
    const ModelState s = test::random_state(rng, 3, 20.0);
    Responsibilities phi = initial_responsibilities(log);
    const Responsibilities before = phi;
    estep_sweep(log, phi, s, FitConfig{});
    for (Eigen::Index k = 0; k < phi.rows(); ++k) {
      CHECK(std::abs(phi.row(k).sum() - 1.0) <= 1e-9);
      if (is_known(log.events[static_cast<std::size_t>(k)].label)) CHECK(phi.row(k) == before.row(k));
    }
    CHECK(phi(static_cast<Eigen::Index>(hidden[0]), 1) == 0.0);
  }
}

TEST_CASE("sweep edge cases") {
  const ModelState s = twin_state(0.2, 0.5, 1.0);
  EventLog known = two_pair_log({0.0, 1.0}, {KnownPair{0}, KnownPair{1}}, 3.0);
  Responsibilities phi = initial_responsibilities(known);
  const SweepResult none = estep_sweep(known, phi, s, FitConfig{});
  CHECK(none.sweeps == 0);
  CHECK(none.change == 0.0);

  EventLog single = two_pair_log({0.0, 1.0}, {KnownPair{0}, UnknownPair{}}, 3.0);
  phi = initial_responsibilities(single);
  const SweepResult one = estep_sweep(single, phi, s, FitConfig{});
  CHECK(one.converged);
  // the first sweep reaches the fixed point, the second confirms it
  CHECK(one.sweeps <= 2);
  Responsibilities again = phi;
  FitConfig once;
  once.max_estep_sweeps = 1;
  estep_sweep(single, again, s, once);
  CHECK(again == phi);
}

TEST_CASE("window depth is irrelevant once the kernel has decayed between events") {
  Rng rng = make_rng(29, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const ModelState s = test::random_state(rng, 3, 0.0);
    double slowest = s.pairs[0].omega;
    for (const auto& p : s.pairs) slowest = std::min(slowest, p.omega);
    EventLog log = test::random_log(rng, 3, 12, 1.0);
    double t = 0.0;
    for (auto& e : log.events) {
      e.t = t;
      t += (10.0 + 5.0 * uniform01(rng)) / slowest;
    }
    log.horizon = t;
    test::hide_random(log, 5, rng);
    ModelState st = s;
    st.horizon = log.horizon;
    FitConfig shallow, deep;
    shallow.window = 1;
    deep.window = static_cast<int>(log.size());
    Responsibilities a = initial_responsibilities(log), b = a;
    estep_sweep(log, a, st, shallow);
    estep_sweep(log, b, st, deep);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  MESSAGE("largest responsibility difference " << worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("sweeps on the 40-event, 4-hidden setting converge quickly") {
  RunConfig c;
  c.model.layout = "origin";
  const ModelState truth = build_state(c.model, 0.0);
  FitConfig f;
  f.mode = ModelMode::TemporalOnly;
  double total = 0.0;
  const int runs = 50;
  for (int r = 0; r < runs; ++r) {
    const EventLog log = table1_log(500 + r, 4);
    ModelState s = truth;
    s.horizon = log.horizon;
    Responsibilities phi = initial_responsibilities(log);
    total += estep_sweep(log, phi, s, f).sweeps;
  }
  MESSAGE("mean sweeps: " << total / runs);
  CHECK(total / runs < 50.0);
}

TEST_CASE("spatial step on fully labeled data gives sample moments") {
  Rng rng = make_rng(22, 0);
  EventLog log = test::random_log(rng, 2, 30, 10.0);
  const Responsibilities phi = initial_responsibilities(log);
  const SpatialUpdate u = mstep_spatial(log, phi, SpatialModel::per_pair({GaussianComponent{}}), FitConfig{});
  Vec2 mean = Vec2::Zero();
  for (auto& e : log.events) mean += e.x;
  mean /= 30.0;
  Vec2 var = Vec2::Zero();
  for (auto& e : log.events) var += (e.x - mean).cwiseAbs2();
  var /= 30.0;
  CHECK((u.model.components[0].mean - mean).norm() <= 1e-14);
  CHECK(u.model.components[0].cov(0, 0) == doctest::Approx(var(0)).epsilon(1e-13));
  CHECK(u.model.components[0].cov(1, 1) == doctest::Approx(var(1)).epsilon(1e-13));
  CHECK(u.model.components[0].cov(0, 1) == 0.0);
}

TEST_CASE("spatial step with uniform rows treats pairs alike") {
  Rng rng = make_rng(23, 0);
  EventLog log = test::random_log(rng, 3, 12, 10.0);
  log.pairs = PairTable(3, {{0, 1}, {1, 2}});
  for (auto& e : log.events) e.label = UnknownPair{};
  const Responsibilities phi = initial_responsibilities(log);
  SpatialModel prev = SpatialModel::per_pair({GaussianComponent{}, GaussianComponent{}});
  prev.components[1].mean = Vec2(3.0, 3.0);
  const SpatialUpdate u = mstep_spatial(log, phi, prev, FitConfig{});
  CHECK(u.model.components[0].mean == u.model.components[1].mean);
  CHECK(u.model.components[0].cov == u.model.components[1].cov);
}

TEST_CASE("single-component mixture weight stays one") {
  Rng rng = make_rng(24, 0);
  EventLog log = test::random_log(rng, 3, 12, 10.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(3, 1);
  const SpatialUpdate u =
      mstep_spatial(log, initial_responsibilities(log), SpatialModel::shared_mixture({GaussianComponent{}}, w), FitConfig{});
  for (Eigen::Index a = 0; a < 3; ++a) {
    if (std::find(u.frozen.begin(), u.frozen.end(), a) != u.frozen.end()) continue;
    CHECK(u.model.weights(a, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("mixture weights are a responsibility-weighted average of component ratios") {
  Rng rng = make_rng(25, 0);
  EventLog log = test::random_log(rng, 3, 20, 10.0);
  test::hide_random(log, 6, rng);
  const Responsibilities phi = test::random_phi(log, rng);
  GaussianComponent c0, c1;
  c1.mean = Vec2(1.0, -0.5);
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(3, 2, 0.5);
  const SpatialUpdate u = mstep_spatial(log, phi, SpatialModel::shared_mixture({c0, c1}, w), FitConfig{});
  for (Eigen::Index a = 0; a < 3; ++a) {
    if (!(phi.col(a).sum() > 0.0)) continue;
    double num = 0.0;
    for (std::size_t k = 0; k < log.size(); ++k) {
      const double n0 = std::exp(gaussian_log_density(log.events[k].x, c0.mean, c0.cov));
      const double n1 = std::exp(gaussian_log_density(log.events[k].x, c1.mean, c1.cov));
      num += phi(static_cast<Eigen::Index>(k), a) * n0 / (n0 + n1);
    }
    CHECK(u.model.weights(a, 0) == doctest::Approx(num / phi.col(a).sum()).epsilon(1e-12));
    CHECK(u.model.weights.row(a).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("background rate fixed point on fully labeled data is count over horizon") {
  Rng rng = make_rng(26, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const EventLog log = test::random_log(rng, 4, 60, 37.5);
    ModelState s = test::random_state(rng, 6, 37.5);
    for (auto& p : s.pairs) p.beta = 0.0;
    FitConfig c;
    c.learn_excitation = false;
    const Responsibilities phi = initial_responsibilities(log);
    const TemporalUpdate u = mstep_temporal(log, phi, s, c);
    // the beta-free pair objective solved by Newton must agree too
    FitConfig newton;
    const TemporalUpdate v = mstep_temporal(log, phi, s, newton);
    for (int a = 0; a < 6; ++a) {
      const double n = phi.col(a).sum();
      if (n == 0.0) continue;
      CHECK(std::abs(u.params[static_cast<std::size_t>(a)].mu - n / 37.5) <= 1e-10 * n / 37.5);
      if (v.params[static_cast<std::size_t>(a)].beta == 0.0) {
        CHECK(std::abs(v.params[static_cast<std::size_t>(a)].mu - n / 37.5) <= 1e-10 * n / 37.5);
      }
    }
  }
}

TEST_CASE("pairs without events are floored and flagged") {
  const EventLog log = two_pair_log({0.0, 1.0}, {KnownPair{0}, KnownPair{0}}, 3.0);
  const ModelState s = twin_state(0.2, 0.5, 1.3);
  const TemporalUpdate u = mstep_temporal(log, initial_responsibilities(log), s, FitConfig{});
  CHECK(u.params[1].mu == kMuFloor);
  CHECK(u.params[1].beta == 0.5);
  CHECK(u.params[1].omega == 1.3);
  CHECK(u.frozen == std::vector<PairIndex>{1});
}

TEST_CASE("fully labeled single-pair Hawkes parameters are recovered") {
  const PairParams truth{0.01, 0.5, 0.1};
  std::vector<double> mu, beta, omega;
  for (int r = 0; r < 20; ++r) {
    ModelState s;
    s.pairs = {truth};
    s.spatial = SpatialModel::per_pair({GaussianComponent{}});
    const EventLog log = simulate_event_count(s, PairTable::complete(2), 500, split_seed(900, r));
    FitConfig c;
    c.mode = ModelMode::TemporalOnly;
    const FitReport rep = fit(log, c);
    mu.push_back(std::abs(rep.state.pairs[0].mu / truth.mu - 1.0));
    beta.push_back(std::abs(rep.state.pairs[0].beta / truth.beta - 1.0));
    omega.push_back(std::abs(rep.state.pairs[0].omega / truth.omega - 1.0));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  MESSAGE("median relative errors mu " << median(mu) << " beta " << median(beta) << " omega " << median(omega));
  CHECK(median(mu) < 0.2);
  CHECK(median(beta) < 0.2);
  CHECK(median(omega) < 0.2);
}

TEST_CASE("temporal step is stationary in mu and beta at interior solutions") {
  Rng rng = make_rng(27, 0);
  FitConfig c = wide_window();
  c.mode = ModelMode::TemporalOnly;
  const ExpectationOptions opts = c.expectation();
  int interior = 0;
  for (int trial = 0; trial < 30; ++trial) {
    ModelState truth = test::random_state(rng, 3, 0.0);
    for (auto& p : truth.pairs) p = {0.05, 0.6, 1.0};
    EventLog log = simulate_event_count(truth, PairTable::complete(3), 30, split_seed(27, trial));
    test::hide_random(log, 6, rng);
    const Responsibilities phi = test::random_phi(log, rng);
    ModelState s = truth;
    s.horizon = log.horizon;
    s.pairs = mstep_temporal(log, phi, s, c).params;
    for (std::size_t a = 0; a < 3; ++a) {
      const PairParams p = s.pairs[a];
      if (!(p.beta > 1e-6 && p.beta < kBetaCeiling - 1e-6 && p.mu > 1e-8)) continue;
      ++interior;
      auto along = [&](double PairParams::*field) {
        return finite_difference(
            [&](double v) {
              ModelState t = s;
              t.pairs[a].*field = v;
              return elbo(log, phi, t, opts, c.mode);
            },
            p.*field);
      };
      CHECK(std::abs(along(&PairParams::mu)) <= 1e-5);
      CHECK(std::abs(along(&PairParams::beta)) <= 1e-5);
    }
  }
  MESSAGE("interior pairs checked: " << interior);
  CHECK(interior > 20);
}

TEST_CASE("tied temporal step is stationary in the shared parameters") {
  Rng rng = make_rng(28, 0);
  FitConfig c = wide_window();
  c.mode = ModelMode::TemporalOnly;
  c.tie_temporal = true;
  const ExpectationOptions opts = c.expectation();
  for (int trial = 0; trial < 10; ++trial) {
    ModelState truth = test::random_state(rng, 3, 0.0);
    for (auto& p : truth.pairs) p = {0.05, 0.6, 1.0};
    EventLog log = simulate_event_count(truth, PairTable::complete(3), 30, split_seed(28, trial));
    test::hide_random(log, 6, rng);
    const Responsibilities phi = test::random_phi(log, rng);
    ModelState s = truth;
    s.horizon = log.horizon;
    s.pairs = mstep_temporal(log, phi, s, c).params;
    CHECK(s.pairs[0].mu == s.pairs[2].mu);
    CHECK(s.pairs[0].omega == s.pairs[1].omega);
    const PairParams p = s.pairs[0];
    if (!(p.beta > 1e-6 && p.beta < kBetaCeiling - 1e-6)) continue;
    auto along = [&](double PairParams::*field) {
      return finite_difference(
          [&](double v) {
            ModelState t = s;
            for (auto& q : t.pairs) q.*field = v;
            return elbo(log, phi, t, opts, c.mode);
          },
          p.*field);
    };
    CHECK(std::abs(along(&PairParams::mu)) <= 1e-5);
    CHECK(std::abs(along(&PairParams::beta)) <= 1e-5);
  }
}

TEST_CASE("bound is non-decreasing across outer iterations") {
  for (bool tie : {false, true}) {
    for (ModelMode mode : {ModelMode::Full, ModelMode::TemporalOnly}) {
      for (int r = 0; r < 15; ++r) {
        RunConfig cfg;
        cfg.model.sigma = 1.0;
        const EventLog full =
            simulate_event_count(build_state(cfg.model, 0.0), build_pairs(cfg.model), 40, split_seed(31, r));
        const EventLog log = mask_labels(full, MaskSpec::fraction(0.2, split_seed(32, r))).log;
        FitConfig c;
        c.mode = mode;
        c.tie_temporal = tie;
        c.window = 6;  // keeps every window within exact enumeration
        const FitReport rep = fit(log, c);
        for (std::size_t i = 1; i < rep.elbo_trace.size(); ++i) {
          CHECK(rep.elbo_trace[i] >= rep.elbo_trace[i - 1] - 1e-6);
        }
      }
    }
  }
}

TEST_CASE("fit on a fully labeled log reduces to maximum likelihood") {
  RunConfig cfg;
  const EventLog log = simulate_event_count(build_state(cfg.model, 0.0), build_pairs(cfg.model), 60, 41);
  FitConfig c;
  c.window = 100;
  const FitReport rep = fit(log, c);
  Assignment z;
  for (auto& e : log.events) z.push_back(std::get<KnownPair>(e.label).pair);
  CHECK(rep.estep_sweeps == 0);
  CHECK(rep.elbo_trace.back() == doctest::Approx(complete_data_log_likelihood(log, z, rep.state)).epsilon(1e-10));
  for (std::size_t i = 1; i < rep.elbo_trace.size(); ++i) CHECK(rep.elbo_trace[i] >= rep.elbo_trace[i - 1] - 1e-6);
}

TEST_CASE("fit rejects an empty log") {
  EventLog log;
  log.pairs = PairTable::complete(3);
  log.horizon = 1.0;
  CHECK_THROWS_AS(fit(log, FitConfig{}), InputError);
}

TEST_CASE("fitted responsibilities agree with the exact posterior on tiny instances") {
  Rng rng = make_rng(29, 0);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelState truth;
    truth.pairs = {{0.3, 0.6, 1.0}, {0.15, 0.3, 0.5}};
    GaussianComponent g0, g1;
    g1.mean = Vec2(1.5, 0.0);
    truth.spatial = SpatialModel::per_pair({g0, g1});
    EventLog log = simulate_event_count(truth, PairTable(3, {{0, 1}, {0, 2}}), 6, split_seed(29, trial));
    test::hide_random(log, 2, rng);
    FitConfig c;
    c.window = 100;
    const FitReport rep = fit(log, c);
    const ExactPosterior post = exact_ml_enumerate(log, rep.state);
    for (std::size_t i = 0; i < post.hidden.size(); ++i) {
      Eigen::Index vem = 0, exact = 0;
      rep.phi.row(static_cast<Eigen::Index>(post.hidden[i])).maxCoeff(&vem);
      post.marginals.row(static_cast<Eigen::Index>(i)).maxCoeff(&exact);
      agree += vem == exact;
      ++total;
    }
  }
  MESSAGE("argmax agreement " << agree << "/" << total);
  CHECK(agree >= 0.9 * total);
}

TEST_CASE("configuration validation") {
  FitConfig c;
  c.tol_phi = 0.0;
  CHECK_THROWS_AS(validate(c), InputError);
  c = FitConfig{};
  c.mc_samples = 0;
  CHECK_THROWS_AS(validate(c), InputError);
}
