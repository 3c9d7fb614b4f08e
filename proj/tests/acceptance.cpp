// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "lppm/baselines.hpp"
#include "lppm/errors.hpp"
#include "lppm/experiments.hpp"
#include "lppm/prediction.hpp"
#include "lppm/run_config.hpp"
#include "lppm/simulator.hpp"
#include "lppm/variational_em.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace lppm;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

ExperimentResult run(const std::string& name, const nlohmann::json& overrides = nlohmann::json::object()) {
  return run_experiment(experiment_config(name, overrides));
}

double mean_of(const ExperimentResult& r, double value, const std::string& method, const std::string& metric) {
  return r.find(value, method, metric).mean;
}

void table1(Outcome& o) {
  const ExperimentResult r = run("table1");
  const double vem = mean_of(r, 0.0, "lppm", "accuracy");
  const double exact = mean_of(r, 0.0, "exact_ml", "accuracy");
  const double per_pair = mean_of(r, 0.0, "lppm_per_pair", "accuracy");
  o.detail << r.seeds.size() << " replicates, variational " << vem << ", exact ML " << exact << ", untied variational "
           << per_pair;
  o.require(r.seeds.size() >= 500, "at least 500 replicates");
  o.require(vem >= 0.43 && vem <= 0.51, "variational accuracy in [0.43, 0.51]");
  o.require(exact >= 0.43 && exact <= 0.51, "exact ML accuracy in [0.43, 0.51]");
  o.require(vem >= 2.0 / 6.0 && exact >= 2.0 / 6.0, "both at least twice random");
}

void fig2a(Outcome& o) {
  const ExperimentResult r = run("fig2a_sigma_sweep");
  o.require(r.seeds.size() >= 100, "100 replicates");
  for (double sigma : r.config.experiment.values) {
    const double sp = mean_of(r, sigma, "spatial_only", "accuracy");
    const double tp = mean_of(r, sigma, "temporal_only", "accuracy");
    const double co = mean_of(r, sigma, "combined", "accuracy");
    o.detail << " sigma " << sigma << ": spatial " << sp << " temporal " << tp << " combined " << co << ";";
    o.require(co >= std::max(sp, tp) - 0.02, "combined within 0.02 of the best at sigma " + std::to_string(sigma));
  }
  const double tight = mean_of(r, 0.2, "spatial_only", "accuracy");
  const double wide = mean_of(r, 4.0, "spatial_only", "accuracy");
  o.require(tight >= 0.95, "spatial-only at sigma 0.2 >= 0.95");
  o.require(std::abs(wide - 1.0 / 6.0) <= 0.05, "spatial-only at sigma 4 within 1/6 +- 0.05");
}

void fig2b(Outcome& o) {
  const ExperimentResult r = run("fig2b_missing_sweep");
  o.require(r.seeds.size() >= 20, "20 replicates");
  auto gap = [&](double rho) { return mean_of(r, rho, "lppm", "accuracy") - mean_of(r, rho, "b1", "accuracy"); };
  for (double rho : r.config.experiment.values) {
    o.detail << " " << rho << ": lppm " << mean_of(r, rho, "lppm", "accuracy") << " b1 " << mean_of(r, rho, "b1", "accuracy")
             << " b2 " << mean_of(r, rho, "b2", "accuracy") << ";";
  }
  for (double rho : {0.5, 0.7}) {
    const double l = mean_of(r, rho, "lppm", "accuracy");
    o.require(l > mean_of(r, rho, "b1", "accuracy"), "lppm > b1 at " + std::to_string(rho));
    o.require(l > mean_of(r, rho, "b2", "accuracy"), "lppm > b2 at " + std::to_string(rho));
  }
  o.require(gap(0.7) > gap(0.1), "lppm-b1 gap grows from 10% to 70%");
}

void oracles(Outcome& o) {
  Rng rng = make_rng(401, 0);
  double comp = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double T = 5.0 + 100.0 * uniform01(rng);
    const ModelState s = test::random_state(rng, 3, T);
    const int n = 1 + static_cast<int>(20 * uniform01(rng));
    std::vector<AssignedEvent> h;
    std::vector<double> breaks;
    for (int i = 0; i < n; ++i) h.push_back({T * uniform01(rng), static_cast<PairIndex>(3 * uniform01(rng))});
    std::sort(h.begin(), h.end(), [](auto& x, auto& y) { return x.t < y.t; });
    for (auto& e : h) breaks.push_back(e.t);
    for (PairIndex a = 0; a < 3; ++a) {
      const double quad = test::integrate(
          [&](double t) {
            std::vector<AssignedEvent> past;
            for (auto& e : h)
              if (e.t <= t) past.push_back(e);
            return temporal_intensity(a, t, past, s);
          },
          0.0, T, breaks);
      comp = std::max(comp, std::abs(compensator(a, T, h, s) - quad));
    }
  }
  o.detail << "compensator vs quadrature " << comp;
  o.require(comp <= 1e-8, "compensator within 1e-8");

  ExpectationOptions opts;
  opts.window = 100;
  double bound = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const int agents = uniform01(rng) < 0.5 ? 2 : 3;
    const int m = agents * (agents - 1) / 2;
    const auto n = static_cast<std::size_t>(2 + 7 * uniform01(rng));
    EventLog log = test::random_log(rng, agents, n, 6.0);
    test::hide_random(log, std::min<std::size_t>(n, 1 + static_cast<std::size_t>(3 * uniform01(rng))), rng);
    const ModelState s = test::random_state(rng, m, 6.0);
    const Responsibilities phi = test::random_phi(log, rng);
    for (ModelMode mode : {ModelMode::Full, ModelMode::TemporalOnly, ModelMode::SpatialOnly}) {
      bound = std::max(bound, std::abs(elbo(log, phi, s, opts, mode) - test::brute_force_elbo(log, phi, s, mode)));
    }
  }
  o.detail << ", bound vs enumeration " << bound;
  o.require(bound <= 1e-8, "bound within 1e-8 of enumeration");

  bool b2_exact = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelSpec spec;
    const EventLog full = simulate_event_count(build_state(spec, 0.0), build_pairs(spec), 60, split_seed(402, seed));
    const EventLog log = mask_labels(full, MaskSpec::fraction(0.3, split_seed(403, seed))).log;
    FitConfig c;
    c.seed = seed;
    FitConfig clamped = c;
    clamped.learn_excitation = false;
    const FitReport b2 = fit_b2(log, c);
    const FitReport zero = fit(log, clamped);
    b2_exact = b2_exact && b2.phi == zero.phi && b2.elbo_trace == zero.elbo_trace;
    for (std::size_t a = 0; a < b2.state.pairs.size(); ++a) {
      b2_exact = b2_exact && b2.state.pairs[a].mu == zero.state.pairs[a].mu && b2.state.pairs[a].beta == 0.0;
    }
  }
  o.detail << ", B2 bit-exact " << (b2_exact ? "yes" : "no");
  o.require(b2_exact, "B2 equals the zero-excitation fit bit for bit");

  double fixed = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const EventLog log = test::random_log(rng, 4, 60, 37.5);
    ModelState s = test::random_state(rng, 6, 37.5);
    for (auto& p : s.pairs) p.beta = 0.0;
    FitConfig c;
    c.learn_excitation = false;
    const Responsibilities phi = initial_responsibilities(log);
    const TemporalUpdate u = mstep_temporal(log, phi, s, c);
    for (int a = 0; a < 6; ++a) {
      const double n = phi.col(a).sum();
      if (n == 0.0) continue;
      fixed = std::max(fixed, std::abs(u.params[static_cast<std::size_t>(a)].mu / (n / 37.5) - 1.0));
    }
  }
  o.detail << ", mu fixed point relative error " << fixed;
  o.require(fixed <= 1e-10, "mu fixed point within 1e-10 relative");
}

double finite_difference(const std::function<double(double)>& f, double x) {
  const double h = 1e-6 * std::max(std::abs(x), 1e-3);
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

void stationarity(Outcome& o) {
  Rng rng = make_rng(501, 0);
  double worst = 0.0;
  int interior = 0;
  for (bool tie : {false, true}) {
    FitConfig c;
    c.window = 100;
    c.mode = ModelMode::TemporalOnly;
    c.tie_temporal = tie;
    const ExpectationOptions opts = c.expectation();
    for (int trial = 0; trial < 30; ++trial) {
      ModelState truth = test::random_state(rng, 3, 0.0);
      for (auto& p : truth.pairs) p = {0.05, 0.6, 1.0};
      EventLog log = simulate_event_count(truth, PairTable::complete(3), 30, split_seed(502 + tie, trial));
      test::hide_random(log, 6, rng);
      const Responsibilities phi = test::random_phi(log, rng);
      ModelState s = truth;
      s.horizon = log.horizon;
      s.pairs = mstep_temporal(log, phi, s, c).params;
      for (std::size_t a = 0; a < (tie ? 1u : 3u); ++a) {
        const PairParams p = s.pairs[a];
        if (!(p.beta > 1e-6 && p.beta < kBetaCeiling - 1e-6 && p.mu > 1e-8)) continue;
        ++interior;
        for (double PairParams::*field : {&PairParams::mu, &PairParams::beta}) {
          const double g = finite_difference(
              [&](double v) {
                ModelState t = s;
                if (tie) {
                  for (auto& q : t.pairs) q.*field = v;
                } else {
                  t.pairs[a].*field = v;
                }
                return elbo(log, phi, t, opts, c.mode);
              },
              p.*field);
          worst = std::max(worst, std::abs(g));
        }
      }
    }
  }
  o.detail << interior << " interior solutions, largest gradient " << worst;
  o.require(interior > 0 && worst <= 1e-5, "gradient within 1e-5");

  double drop = 0.0;
  for (bool tie : {false, true}) {
    for (ModelMode mode : {ModelMode::Full, ModelMode::TemporalOnly}) {
      for (int r = 0; r < 15; ++r) {
        RunConfig cfg;
        const EventLog full =
            simulate_event_count(build_state(cfg.model, 0.0), build_pairs(cfg.model), 40, split_seed(503, r));
        const EventLog log = mask_labels(full, MaskSpec::fraction(0.2, split_seed(504, r))).log;
        FitConfig c;
        c.mode = mode;
        c.tie_temporal = tie;
        c.window = 6;
        const FitReport rep = fit(log, c);
        for (std::size_t i = 1; i < rep.elbo_trace.size(); ++i) {
          drop = std::max(drop, rep.elbo_trace[i - 1] - rep.elbo_trace[i]);
        }
      }
    }
  }
  o.detail << ", largest bound decrease " << drop;
  o.require(drop <= 1e-6, "bound non-decreasing within 1e-6");
}

void simulator(Outcome& o) {
  Rng rng = make_rng(601, 0);
  std::vector<double> pois, hawkes;
  for (int r = 0; r < 1000; ++r) {
    pois.push_back(static_cast<double>(simulate_pair({0.05, 0.0, 1.0}, 1000.0, rng).size()));
    hawkes.push_back(static_cast<double>(simulate_pair({0.01, 0.5, 0.1}, 2000.0, rng).size()));
  }
  const double zp = (test::mean(pois) - 50.0) / test::standard_error(pois);
  const double zh = (test::mean(hawkes) - 40.0) / test::standard_error(hawkes);
  o.detail << "Poisson mean " << test::mean(pois) << " (z " << zp << "), Hawkes mean " << test::mean(hawkes) << " (z " << zh
           << ")";
  o.require(std::abs(zp) <= 3.0, "Poisson mean within 3 SE");
  o.require(std::abs(zh) <= 3.0, "Hawkes mean within 3 SE");

  const PairParams p{0.05, 0.6, 0.5};
  const auto times = simulate_pair(p, 8000.0, rng);
  ModelState s;
  s.pairs = {p};
  std::vector<AssignedEvent> h;
  for (double t : times) h.push_back({t, 0});
  std::vector<double> gaps;
  double prev = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double c = compensator(0, times[k], std::span<const AssignedEvent>(h.data(), k), s);
    gaps.push_back(c - prev);
    prev = c;
  }
  const double pv = test::ks_p_value(test::ks_statistic(gaps, [](double x) { return -std::expm1(-x); }), gaps.size());
  o.detail << ", KS p " << pv << " on " << gaps.size() << " events";
  o.require(pv > 0.01, "KS p > 0.01");
}

ModelState pairs_state(std::vector<PairParams> params) {
  ModelState s;
  s.pairs = std::move(params);
  s.spatial = SpatialModel::per_pair(std::vector<GaussianComponent>(s.pairs.size()));
  return s;
}

void prediction(Outcome& o) {
  Rng rng = make_rng(701, 0);
  const std::vector<std::pair<ModelState, std::vector<AssignedEvent>>> cases{
      {pairs_state({{0.01, 0.5, 0.1}}), {{0.0, 0}}},
      {pairs_state({{0.01, 0.8, 1.0}, {0.02, 0.3, 0.2}}), {{1.0, 0}, {3.0, 1}, {3.5, 0}}},
      {pairs_state({{0.5, 0.9, 5.0}, {0.1, 0.1, 0.05}, {0.2, 0.0, 1.0}}), {{0.0, 1}, {0.2, 0}}},
  };
  for (const auto& [state, history] : cases) {
    const IntensitySnapshot snap = snapshot(state, history, history.back().t + 0.1);
    const double w = expected_waiting_time(snap);
    std::vector<double> draws(100000);
    for (auto& d : draws) {
      double s = 0.0;
      for (;;) {
        const double bound = snap.total_rate(s);
        s += exponential(rng, bound);
        if (uniform01(rng) * bound <= snap.total_rate(s)) break;
      }
      d = s;
    }
    const double z = (w - test::mean(draws)) / test::standard_error(draws);
    o.detail << "wait " << w << " vs MC " << test::mean(draws) << " (z " << z << "); ";
    o.require(std::abs(z) <= 2.0, "waiting time within 2 SE of Monte Carlo");
  }
  double flat = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double rate = std::exp(-8.0 + 14.0 * uniform01(rng));
    const ModelState s = pairs_state({{rate * 0.25, 0.0, 1.0}, {rate * 0.75, 0.0, 2.0}});
    flat = std::max(flat, std::abs(expected_waiting_time(s, {}, 0.0) * rate - 1.0));
  }
  o.detail << "constant-intensity relative error " << flat << "; ";
  o.require(flat <= 1e-6, "constant intensity gives 1/lambda");

  const ExperimentResult t = run("timing_mape");
  const double lm = mean_of(t, 0.0, "lppm", "mape"), bm = mean_of(t, 0.0, "b2", "mape");
  o.detail << "MAPE lppm " << lm << " b2 " << bm << "; ";
  o.require(t.seeds.size() >= 20, "20 timing replicates");
  o.require(lm < bm, "lppm MAPE below b2");

  const ExperimentResult k = run("topk");
  const double h1 = mean_of(k, 0.0, "lppm", "hit@1"), h2 = mean_of(k, 0.0, "lppm", "hit@2"),
               h3 = mean_of(k, 0.0, "lppm", "hit@3"), b3 = mean_of(k, 0.0, "b3", "hit@1");
  o.detail << "hit@1/2/3 " << h1 << " " << h2 << " " << h3 << ", b3 hit@1 " << b3;
  o.require(h1 <= h2 && h2 <= h3, "hit@K monotone");
  o.require(h1 >= b3, "lppm hit@1 at least b3");
}

void determinism(Outcome& o) {
  for (const auto& name : experiment_names()) {
    std::string first_csv, first_manifest;
    for (int workers : {1, 2}) {
      setenv("LPPM_WORKERS", std::to_string(workers).c_str(), 1);
      const ExperimentResult r = run(name, {{"seed", 77}, {"experiment", {{"replicates", 2}}}});
      std::ostringstream csv;
      write_results_csv(r, csv);
      const std::string m = manifest(r).dump();
      if (first_csv.empty()) {
        first_csv = csv.str();
        first_manifest = m;
      } else {
        o.require(csv.str() == first_csv && m == first_manifest, name + " rerun differs");
      }
    }
  }
  unsetenv("LPPM_WORKERS");
  o.detail << experiment_names().size() << " experiments rerun with 1 and 2 workers";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"table1 accuracy", table1},
      {"fig2a sigma sweep", fig2a},
      {"fig2b missing-label ordering", fig2b},
      {"oracle equivalences", oracles},
      {"M-step stationarity and monotone bound", stationarity},
      {"simulator statistics", simulator},
      {"prediction", prediction},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " " << criteria[i].first << " (" << secs
              << " s): " << o.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
