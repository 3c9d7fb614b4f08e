#include "lppm/run_config.hpp"

#include "lppm/errors.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

namespace lppm {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw InputError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("bad value for '" + std::string(key) + "' in " + where);
  }
}

PairParams parse_params(const json& j, const std::string& where, PairParams base) {
  check_keys(j, where, {"mu", "beta", "omega"});
  read(j, "mu", base.mu, where);
  read(j, "beta", base.beta, where);
  read(j, "omega", base.omega, where);
  if (!(base.mu >= 0.0) || !(base.beta >= 0.0) || !(base.omega > 0.0)) {
    throw InputError("parameters in " + where + " need mu >= 0, beta >= 0, omega > 0");
  }
  return base;
}

json params_json(const PairParams& p) { return {{"mu", p.mu}, {"beta", p.beta}, {"omega", p.omega}}; }

}  // namespace

ModelMode parse_mode(const std::string& s) {
  if (s == "full") return ModelMode::Full;
  if (s == "temporal") return ModelMode::TemporalOnly;
  if (s == "spatial") return ModelMode::SpatialOnly;
  throw InputError("mode must be full, temporal or spatial (got '" + s + "')");
}

std::string to_string(ModelMode mode) {
  switch (mode) {
    case ModelMode::Full: return "full";
    case ModelMode::TemporalOnly: return "temporal";
    case ModelMode::SpatialOnly: return "spatial";
  }
  return "full";
}

FitConfig parse_fit_config(const json& j, FitConfig c) {
  const std::string where = "fit";
  check_keys(j, where,
             {"window", "max_outer_iters", "max_estep_sweeps", "tol_phi", "tol_params", "exact_config_limit",
              "mc_samples", "omega_solver", "mode", "learn_excitation", "tie_temporal", "sweep_order",
              "reinit_hidden", "min_variance"});
  read(j, "window", c.window, where);
  read(j, "max_outer_iters", c.max_outer_iters, where);
  read(j, "max_estep_sweeps", c.max_estep_sweeps, where);
  read(j, "tol_phi", c.tol_phi, where);
  read(j, "tol_params", c.tol_params, where);
  read(j, "exact_config_limit", c.exact_config_limit, where);
  read(j, "mc_samples", c.mc_samples, where);
  read(j, "learn_excitation", c.learn_excitation, where);
  read(j, "tie_temporal", c.tie_temporal, where);
  read(j, "reinit_hidden", c.reinit_hidden, where);
  read(j, "min_variance", c.min_variance, where);
  std::string s;
  if (j.contains("omega_solver")) {
    read(j, "omega_solver", s, where);
    if (s == "newton") c.omega_solver = OmegaSolver::Newton;
    else if (s == "closed_form") c.omega_solver = OmegaSolver::ClosedForm;
    else throw InputError("omega_solver must be newton or closed_form");
  }
  if (j.contains("mode")) {
    read(j, "mode", s, where);
    c.mode = parse_mode(s);
  }
  if (j.contains("sweep_order")) {
    read(j, "sweep_order", s, where);
    if (s == "forward") c.sweep_order = SweepOrder::Forward;
    else if (s == "reverse") c.sweep_order = SweepOrder::Reverse;
    else throw InputError("sweep_order must be forward or reverse");
  }
  validate(c);
  return c;
}

json to_json(const FitConfig& c) {
  return {{"window", c.window},
          {"max_outer_iters", c.max_outer_iters},
          {"max_estep_sweeps", c.max_estep_sweeps},
          {"tol_phi", c.tol_phi},
          {"tol_params", c.tol_params},
          {"exact_config_limit", c.exact_config_limit},
          {"mc_samples", c.mc_samples},
          {"omega_solver", c.omega_solver == OmegaSolver::Newton ? "newton" : "closed_form"},
          {"mode", to_string(c.mode)},
          {"learn_excitation", c.learn_excitation},
          {"tie_temporal", c.tie_temporal},
          {"sweep_order", c.sweep_order == SweepOrder::Forward ? "forward" : "reverse"},
          {"reinit_hidden", c.reinit_hidden},
          {"min_variance", c.min_variance}};
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  check_keys(j, "config", {"seed", "model", "simulate", "mask", "fit", "experiment", "output"});
  read(j, "seed", c.seed, "config");

  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model", {"agents", "mu", "beta", "omega", "pairs", "spatial"});
    read(m, "agents", c.model.agents, "model");
    if (c.model.agents < 2) throw InputError("model.agents must be at least 2");
    json base = json::object();
    for (const char* k : {"mu", "beta", "omega"}) {
      if (m.contains(k)) base[k] = m[k];
    }
    c.model.defaults = parse_params(base, "model", c.model.defaults);
    if (m.contains("pairs")) {
      if (!m["pairs"].is_array()) throw InputError("model.pairs must be an array");
      for (const auto& p : m["pairs"]) c.model.pairs.push_back(parse_params(p, "model.pairs", c.model.defaults));
      const int expected = c.model.agents * (c.model.agents - 1) / 2;
      if (static_cast<int>(c.model.pairs.size()) != expected) {
        throw InputError("model.pairs needs " + std::to_string(expected) + " entries");
      }
    }
    if (m.contains("spatial")) {
      const json& s = m["spatial"];
      check_keys(s, "model.spatial", {"layout", "sigma", "side"});
      read(s, "layout", c.model.layout, "model.spatial");
      read(s, "sigma", c.model.sigma, "model.spatial");
      read(s, "side", c.model.side, "model.spatial");
      if (c.model.layout != "polygon" && c.model.layout != "origin") {
        throw InputError("model.spatial.layout must be polygon or origin");
      }
      if (!(c.model.sigma > 0.0) || !(c.model.side > 0.0)) throw InputError("sigma and side must be positive");
    }
  }

  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    check_keys(s, "simulate", {"events", "horizon"});
    if (s.contains("events") == s.contains("horizon")) {
      throw InputError("simulate needs exactly one of events or horizon");
    }
    c.simulate = {};
    c.simulate.events.reset();
    if (s.contains("events")) {
      std::size_t n = 0;
      read(s, "events", n, "simulate");
      if (n == 0) throw InputError("simulate.events must be positive");
      c.simulate.events = n;
    } else {
      double h = 0.0;
      read(s, "horizon", h, "simulate");
      if (!(h > 0.0)) throw InputError("simulate.horizon must be positive");
      c.simulate.horizon = h;
    }
  }

  if (j.contains("mask")) {
    const json& s = j["mask"];
    check_keys(s, "mask", {"mode", "rho", "count"});
    std::string mode = "fraction";
    read(s, "mode", mode, "mask");
    if (mode == "fraction") c.mask.mode = MaskSpec::Mode::Fraction;
    else if (mode == "count") c.mask.mode = MaskSpec::Mode::Count;
    else if (mode == "one_endpoint") c.mask.mode = MaskSpec::Mode::OneEndpoint;
    else throw InputError("mask.mode must be fraction, count or one_endpoint");
    read(s, "rho", c.mask.rho, "mask");
    read(s, "count", c.mask.count, "mask");
    if (!(c.mask.rho >= 0.0 && c.mask.rho <= 1.0)) throw InputError("mask.rho must lie in [0, 1]");
  }

  if (j.contains("fit")) c.fit = parse_fit_config(j["fit"], c.fit);
  c.fit.seed = c.seed;

  if (j.contains("experiment")) {
    const json& e = j["experiment"];
    check_keys(e, "experiment", {"name", "replicates", "values", "train_events", "exact_ml", "top_k"});
    read(e, "name", c.experiment.name, "experiment");
    read(e, "replicates", c.experiment.replicates, "experiment");
    read(e, "values", c.experiment.values, "experiment");
    read(e, "train_events", c.experiment.train_events, "experiment");
    read(e, "top_k", c.experiment.top_k, "experiment");
    if (e.contains("exact_ml")) {
      std::string s;
      read(e, "exact_ml", s, "experiment");
      if (s == "true") c.experiment.exact_ml = ExactMlParams::True;
      else if (s == "fitted") c.experiment.exact_ml = ExactMlParams::Fitted;
      else if (s == "off") c.experiment.exact_ml = ExactMlParams::Off;
      else throw InputError("experiment.exact_ml must be true, fitted or off");
    }
    if (c.experiment.replicates < 0) throw InputError("experiment.replicates must be non-negative");
    if (c.experiment.top_k < 1) throw InputError("experiment.top_k must be positive");
  }

  if (j.contains("output")) {
    check_keys(j["output"], "output", {"dir"});
    read(j["output"], "dir", c.output_dir, "output");
  }
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  json model = {{"agents", c.model.agents},
                {"mu", c.model.defaults.mu},
                {"beta", c.model.defaults.beta},
                {"omega", c.model.defaults.omega},
                {"spatial", {{"layout", c.model.layout}, {"sigma", c.model.sigma}, {"side", c.model.side}}}};
  if (!c.model.pairs.empty()) {
    model["pairs"] = json::array();
    for (const auto& p : c.model.pairs) model["pairs"].push_back(params_json(p));
  }
  j["model"] = model;
  if (c.simulate.events) j["simulate"] = {{"events", *c.simulate.events}};
  else if (c.simulate.horizon) j["simulate"] = {{"horizon", *c.simulate.horizon}};
  const char* mode = c.mask.mode == MaskSpec::Mode::Fraction ? "fraction"
                     : c.mask.mode == MaskSpec::Mode::Count  ? "count"
                                                             : "one_endpoint";
  j["mask"] = {{"mode", mode}, {"rho", c.mask.rho}, {"count", c.mask.count}};
  j["fit"] = to_json(c.fit);
  const char* exact = c.experiment.exact_ml == ExactMlParams::True     ? "true"
                      : c.experiment.exact_ml == ExactMlParams::Fitted ? "fitted"
                                                                       : "off";
  j["experiment"] = {{"name", c.experiment.name},
                     {"replicates", c.experiment.replicates},
                     {"values", c.experiment.values},
                     {"train_events", c.experiment.train_events},
                     {"exact_ml", exact},
                     {"top_k", c.experiment.top_k}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

PairTable build_pairs(const ModelSpec& spec) { return PairTable::complete(spec.agents); }

ModelState build_state(const ModelSpec& spec, double horizon) {
  const PairTable pairs = build_pairs(spec);
  const int m = pairs.size();
  ModelState s;
  s.horizon = horizon;
  s.pairs = spec.pairs.empty() ? std::vector<PairParams>(static_cast<std::size_t>(m), spec.defaults) : spec.pairs;
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(m));
  // Circumradius of a regular m-gon with the given side.
  const double radius = m > 1 ? spec.side / (2.0 * std::sin(std::numbers::pi / m)) : 0.0;
  for (int a = 0; a < m; ++a) {
    auto& c = comps[static_cast<std::size_t>(a)];
    if (spec.layout == "polygon") {
      const double angle = 2.0 * std::numbers::pi * a / m;
      c.mean = Vec2(radius * std::cos(angle), radius * std::sin(angle));
    }
    c.cov = Mat2::Identity() * spec.sigma * spec.sigma;
  }
  s.spatial = SpatialModel::per_pair(std::move(comps));
  return s;
}

std::uint64_t config_hash(const RunConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace lppm
