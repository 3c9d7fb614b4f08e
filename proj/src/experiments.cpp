#include "lppm/experiments.hpp"

#include "lppm/baselines.hpp"
#include "lppm/errors.hpp"
#include "lppm/io.hpp"
#include "lppm/label_inference.hpp"
#include "lppm/prediction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <ostream>
#include <thread>

namespace lppm {

namespace {

using nlohmann::json;

struct Sample {
  std::string method;
  std::string metric;
  double value;
};

using Samples = std::vector<Sample>;

json temporal_model(double mu, double beta, double omega, const std::string& layout, double sigma) {
  return {{"agents", 4},
          {"mu", mu},
          {"beta", beta},
          {"omega", omega},
          {"spatial", {{"layout", layout}, {"sigma", sigma}, {"side", 1.0}}}};
}

std::uint64_t replicate_seed(const RunConfig& c, std::size_t r) { return split_seed(c.seed, r); }

MaskSpec mask_for(const RunConfig& c, std::uint64_t rep_seed) {
  MaskSpec m = c.mask;
  m.seed = split_seed(rep_seed, 1);
  return m;
}

FitConfig fit_for(const RunConfig& c, std::uint64_t rep_seed, ModelMode mode) {
  FitConfig f = c.fit;
  f.seed = split_seed(rep_seed, 2);
  f.mode = mode;
  return f;
}

EventLog simulate(const RunConfig& c, const ModelSpec& model, std::uint64_t rep_seed) {
  const PairTable pairs = build_pairs(model);
  if (c.simulate.events) {
    return simulate_event_count(build_state(model, 0.0), pairs, *c.simulate.events, split_seed(rep_seed, 0));
  }
  return simulate_network(build_state(model, *c.simulate.horizon), pairs, *c.simulate.horizon,
                          split_seed(rep_seed, 0));
}

double lppm_accuracy(const MaskedLog& m, const FitConfig& f) {
  const FitReport report = fit(m.log, f);
  return accuracy(infer_labels(report.phi, m.log), m.truth);
}

Samples table1_replicate(const RunConfig& c, double, std::uint64_t seed) {
  const EventLog log = simulate(c, c.model, seed);
  const MaskedLog m = mask_labels(log, mask_for(c, seed));
  const FitConfig f = fit_for(c, seed, c.fit.mode);
  const FitReport report = fit(m.log, f);
  Samples out;
  out.push_back({"lppm", "accuracy", accuracy(infer_labels(report.phi, m.log), m.truth)});
  if (f.tie_temporal) {
    FitConfig untied = f;
    untied.tie_temporal = false;
    out.push_back({"lppm_per_pair", "accuracy", lppm_accuracy(m, untied)});
  }
  if (c.experiment.exact_ml != ExactMlParams::Off) {
    ModelState state = c.experiment.exact_ml == ExactMlParams::True ? build_state(c.model, log.horizon) : report.state;
    state.horizon = m.log.horizon;
    const ExactPosterior post = exact_ml_enumerate(m.log, state, f.mode);
    out.push_back({"exact_ml", "accuracy", accuracy(exact_map_inference(post, m.log), m.truth)});
  }
  out.push_back({"random", "accuracy", 1.0 / static_cast<double>(log.pairs.size())});
  return out;
}

Samples fig2a_replicate(const RunConfig& c, double sigma, std::uint64_t seed) {
  ModelSpec model = c.model;
  model.sigma = sigma;
  const EventLog log = simulate(c, model, seed);
  const MaskedLog m = mask_labels(log, mask_for(c, seed));
  Samples out;
  out.push_back({"spatial_only", "accuracy", accuracy(spatial_only_infer(m.log, c.fit.min_variance).inference, m.truth)});
  out.push_back({"temporal_only", "accuracy", lppm_accuracy(m, fit_for(c, seed, ModelMode::TemporalOnly))});
  out.push_back({"combined", "accuracy", lppm_accuracy(m, fit_for(c, seed, ModelMode::Full))});
  return out;
}

Samples fig2b_replicate(const RunConfig& c, double rho, std::uint64_t seed) {
  const EventLog log = simulate(c, c.model, seed);
  MaskSpec spec = mask_for(c, seed);
  spec.mode = MaskSpec::Mode::Fraction;
  spec.rho = rho;
  const MaskedLog m = mask_labels(log, spec);
  const FitConfig f = fit_for(c, seed, c.fit.mode);
  Samples out;
  out.push_back({"lppm", "accuracy", lppm_accuracy(m, f)});
  out.push_back({"b1", "accuracy", accuracy(infer_labels(fit_b1(m.log, f).phi, m.log), m.truth)});
  out.push_back({"b2", "accuracy", accuracy(infer_labels(fit_b2(m.log, f).phi, m.log), m.truth)});
  out.push_back({"spatial_only", "accuracy", accuracy(spatial_only_infer(m.log, c.fit.min_variance).inference, m.truth)});
  return out;
}

struct PredictionSetup {
  EventLog log;        // full simulated log, labels intact
  EventLog train;      // prefix with masked labels
  std::size_t split = 0;
  FitReport lppm;
  FitReport b2;
  Responsibilities lppm_phi;  // all events: fitted rows for the prefix, indicators afterwards
  Responsibilities b2_phi;
};

PredictionSetup prepare_prediction(const RunConfig& c, std::uint64_t seed) {
  PredictionSetup s;
  s.log = simulate(c, c.model, seed);
  s.split = c.experiment.train_events;
  if (s.split < 2 || s.split >= s.log.size()) throw InputError("train_events must lie in [2, events)");
  EventLog prefix;
  prefix.pairs = s.log.pairs;
  prefix.events.assign(s.log.events.begin(), s.log.events.begin() + static_cast<std::ptrdiff_t>(s.split));
  prefix.horizon = prefix.events.back().t;
  s.train = mask_labels(prefix, mask_for(c, seed)).log;
  const FitConfig f = fit_for(c, seed, c.fit.mode);
  s.lppm = fit(s.train, f);
  s.b2 = fit_b2(s.train, f);
  const auto n = static_cast<Eigen::Index>(s.log.size());
  const Eigen::Index m = s.log.pairs.size();
  s.lppm_phi = Responsibilities::Zero(n, m);
  s.lppm_phi.topRows(static_cast<Eigen::Index>(s.split)) = s.lppm.phi;
  for (Eigen::Index k = static_cast<Eigen::Index>(s.split); k < n; ++k) {
    s.lppm_phi(k, std::get<KnownPair>(s.log.events[static_cast<std::size_t>(k)].label).pair) = 1.0;
  }
  return s;
}

Samples timing_replicate(const RunConfig& c, double, std::uint64_t seed) {
  const PredictionSetup s = prepare_prediction(c, seed);
  double b2_rate = 0.0;
  for (const auto& p : s.b2.state.pairs) b2_rate += p.mu;
  std::vector<double> actual, lppm_pred, b2_pred;
  for (std::size_t k = s.split; k < s.log.size(); ++k) {
    const double t_now = s.log.events[k - 1].t;
    actual.push_back(s.log.events[k].t - t_now);
    lppm_pred.push_back(expected_waiting_time(snapshot(s.lppm.state, s.log, s.lppm_phi, k, t_now)));
    b2_pred.push_back(1.0 / b2_rate);
  }
  return {{"lppm", "mape", mape(actual, lppm_pred).mean}, {"b2", "mape", mape(actual, b2_pred).mean}};
}

Samples topk_replicate(const RunConfig& c, double, std::uint64_t seed) {
  const PredictionSetup s = prepare_prediction(c, seed);
  const int m = s.log.pairs.size();
  const int kmax = std::min(c.experiment.top_k, m);
  std::vector<PairIndex> by_rate(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) by_rate[static_cast<std::size_t>(a)] = a;
  std::stable_sort(by_rate.begin(), by_rate.end(), [&](PairIndex x, PairIndex y) {
    return s.b2.state.pairs[static_cast<std::size_t>(x)].mu > s.b2.state.pairs[static_cast<std::size_t>(y)].mu;
  });
  std::vector<AssignedEvent> observed;
  for (std::size_t k = 0; k < s.split; ++k) {
    if (const auto* known = std::get_if<KnownPair>(&s.train.events[k].label)) {
      observed.push_back({s.train.events[k].t, known->pair});
    }
  }
  std::vector<double> hits_lppm(static_cast<std::size_t>(kmax), 0.0), hits_b2 = hits_lppm, hits_b3 = hits_lppm;
  std::size_t steps = 0;
  for (std::size_t k = s.split; k < s.log.size(); ++k, ++steps) {
    const double t_now = s.log.events[k - 1].t;
    const PairIndex truth = std::get<KnownPair>(s.log.events[k].label).pair;
    const auto lppm_top = rank_next_pairs(snapshot(s.lppm.state, s.log, s.lppm_phi, k, t_now), kmax);
    const auto b3_top = observed.empty() ? std::vector<PairIndex>{} : predict_b3_top(observed, kmax);
    for (int K = 1; K <= kmax; ++K) {
      auto hit = [&](const std::vector<PairIndex>& ranked) {
        const auto end = ranked.begin() + std::min<std::ptrdiff_t>(K, static_cast<std::ptrdiff_t>(ranked.size()));
        return std::find(ranked.begin(), end, truth) != end ? 1.0 : 0.0;
      };
      hits_lppm[static_cast<std::size_t>(K - 1)] += hit(lppm_top);
      hits_b2[static_cast<std::size_t>(K - 1)] += hit(by_rate);
      hits_b3[static_cast<std::size_t>(K - 1)] += hit(b3_top);
    }
    observed.push_back({s.log.events[k].t, truth});
  }
  Samples out;
  for (const auto& [name, hits] : {std::pair{"lppm", &hits_lppm}, std::pair{"b2", &hits_b2}, std::pair{"b3", &hits_b3}}) {
    for (int K = 1; K <= kmax; ++K) {
      out.push_back({name, "hit@" + std::to_string(K), (*hits)[static_cast<std::size_t>(K - 1)] / static_cast<double>(steps)});
    }
  }
  return out;
}

using ReplicateFn = Samples (*)(const RunConfig&, double, std::uint64_t);

struct Protocol {
  const char* condition;
  ReplicateFn fn;
};

const std::map<std::string, Protocol>& protocols() {
  static const std::map<std::string, Protocol> p{
      {"table1", {"none", table1_replicate}},
      {"fig2a_sigma_sweep", {"sigma", fig2a_replicate}},
      {"fig2b_missing_sweep", {"missing_fraction", fig2b_replicate}},
      {"timing_mape", {"none", timing_replicate}},
      {"topk", {"none", topk_replicate}},
  };
  return p;
}

const Protocol& protocol(const std::string& name) {
  const auto& p = protocols();
  auto it = p.find(name);
  if (it == p.end()) throw InputError("unknown experiment '" + name + "'");
  return it->second;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"table1", "fig2a_sigma_sweep", "fig2b_missing_sweep", "timing_mape",
                                              "topk"};
  return names;
}

json default_experiment_json(const std::string& name) {
  protocol(name);
  json j;
  j["seed"] = 1;
  j["fit"] = json::object();
  if (name == "table1") {
    j["model"] = temporal_model(0.01, 0.5, 0.1, "origin", 1.0);
    j["simulate"] = {{"events", 40}};
    j["mask"] = {{"mode", "count"}, {"count", 4}};
    j["fit"] = {{"mode", "temporal"}, {"tie_temporal", true}};
    j["experiment"] = {{"replicates", 500}, {"exact_ml", "true"}};
  } else if (name == "fig2a_sigma_sweep") {
    j["model"] = temporal_model(0.01, 0.5, 0.1, "polygon", 1.0);
    j["simulate"] = {{"events", 100}};
    j["mask"] = {{"mode", "fraction"}, {"rho", 0.3}};
    j["experiment"] = {{"replicates", 100}, {"values", {0.2, 0.5, 1.0, 2.0, 4.0}}};
  } else if (name == "fig2b_missing_sweep") {
    j["model"] = temporal_model(0.01, 0.5, 0.1, "polygon", 1.0);
    j["simulate"] = {{"events", 100}};
    j["mask"] = {{"mode", "fraction"}, {"rho", 0.1}};
    j["experiment"] = {{"replicates", 20}, {"values", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}}};
  } else {
    j["model"] = temporal_model(0.01, 0.95, 0.1, "polygon", 1.0);
    j["simulate"] = {{"events", 200}};
    j["mask"] = {{"mode", "fraction"}, {"rho", 0.3}};
    j["fit"] = {{"mode", "temporal"}, {"tie_temporal", true}};
    j["experiment"] = {{"replicates", 20}, {"train_events", 150}, {"top_k", 3}};
  }
  j["experiment"]["name"] = name;
  return j;
}

RunConfig experiment_config(const std::string& name, const json& overrides) {
  std::string chosen = name;
  if (chosen.empty() && overrides.contains("experiment") && overrides["experiment"].contains("name")) {
    chosen = overrides["experiment"]["name"].get<std::string>();
  }
  json j = default_experiment_json(chosen);
  j.merge_patch(overrides);
  j["experiment"]["name"] = chosen;
  return parse_run_config(j);
}

const ResultRow& ExperimentResult::find(double value, const std::string& method, const std::string& metric) const {
  for (const auto& r : rows) {
    if (r.value == value && r.method == method && r.metric == metric) return r;
  }
  throw InputError("no result row for " + method + "/" + metric);
}

int worker_count() {
  if (const char* env = std::getenv("LPPM_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(count)));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ExperimentResult run_experiment(const RunConfig& config) {
  const Protocol& proto = protocol(config.experiment.name);
  if (config.experiment.replicates < 1) throw InputError("experiment needs at least one replicate");
  ExperimentResult result;
  result.name = config.experiment.name;
  result.config = config;
  const auto reps = static_cast<std::size_t>(config.experiment.replicates);
  for (std::size_t r = 0; r < reps; ++r) result.seeds.push_back(replicate_seed(config, r));

  std::vector<double> values = config.experiment.values;
  if (values.empty()) values.push_back(0.0);
  const int workers = worker_count();
  for (double value : values) {
    std::vector<Samples> samples(reps);
    parallel_for(reps, workers, [&](std::size_t r) { samples[r] = proto.fn(config, value, result.seeds[r]); });
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& s : samples.front()) keys.emplace_back(s.method, s.metric);
    for (const auto& [method, metric] : keys) {
      std::vector<double> xs;
      for (const auto& rep : samples) {
        for (const auto& s : rep) {
          if (s.method == method && s.metric == metric && std::isfinite(s.value)) xs.push_back(s.value);
        }
      }
      ResultRow row{proto.condition, value, method, metric, 0.0, 0.0, xs.size()};
      if (!xs.empty()) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        row.mean = sum / static_cast<double>(xs.size());
        if (xs.size() > 1) {
          double ss = 0.0;
          for (double x : xs) ss += (x - row.mean) * (x - row.mean);
          row.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
        }
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

void write_results_csv(const ExperimentResult& result, std::ostream& out) {
  out << "experiment,condition,value,method,metric,mean,stderr,replicates\n";
  for (const auto& r : result.rows) {
    out << result.name << ',' << r.condition << ',' << format_decimal(r.value) << ',' << r.method << ',' << r.metric
        << ',' << format_decimal(r.mean) << ',' << format_decimal(r.stderr_) << ',' << r.replicates << '\n';
  }
}

json manifest(const ExperimentResult& result) {
  json seeds = json::array();
  for (auto s : result.seeds) seeds.push_back(hex64(s));
  return {{"experiment", result.name},
          {"config_hash", hex64(config_hash(result.config))},
          {"config", to_json(result.config)},
          {"replicate_seeds", seeds}};
}

}  // namespace lppm
