#pragma once

// Run configuration shared by the CLI subcommands and the experiment
// harness. JSON keys are checked strictly: unknown keys are errors.
//
// {
//   "seed": 1,
//   "model":      {"agents": 4, "mu": 0.01, "beta": 0.5, "omega": 0.1,
//                  "pairs": [{"mu": .., "beta": .., "omega": ..}, ...],
//                  "spatial": {"layout": "polygon" | "origin", "sigma": 1.0, "side": 1.0}},
//   "simulate":   {"events": 40} | {"horizon": 1000.0},
//   "mask":       {"mode": "fraction" | "count" | "one_endpoint", "rho": 0.1, "count": 4},
//   "fit":        {FitConfig fields, "mode": "full" | "temporal" | "spatial", ...},
//   "experiment": {"name": "table1", "replicates": 500, "values": [..], ...},
//   "output":     {"dir": "results"}
// }

#include "lppm/simulator.hpp"
#include "lppm/variational_em.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lppm {

struct ModelSpec {
  int agents = 4;
  PairParams defaults{0.01, 0.5, 0.1};
  std::vector<PairParams> pairs;  // per-pair override; empty: defaults for every pair
  /// polygon: pair a's Gaussian sits on vertex a of a regular M-gon with the
  /// given side length; origin: every pair centered at the origin.
  std::string layout = "polygon";
  double sigma = 1.0;
  double side = 1.0;
};

struct SimulateSpec {
  std::optional<std::size_t> events = 40;
  std::optional<double> horizon;
};

enum class ExactMlParams { True, Fitted, Off };

struct ExperimentSpec {
  std::string name;
  int replicates = 0;
  std::vector<double> values;  // swept condition values
  std::size_t train_events = 0;  // prediction experiments: fit on this prefix
  ExactMlParams exact_ml = ExactMlParams::True;
  int top_k = 3;
};

struct RunConfig {
  std::uint64_t seed = 1;
  ModelSpec model;
  SimulateSpec simulate;
  MaskSpec mask = MaskSpec::fraction(0.1, 0);
  FitConfig fit;
  ExperimentSpec experiment;
  std::string output_dir = "results";
};

/// Strict parse; missing keys keep their defaults.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const FitConfig& config);
FitConfig parse_fit_config(const nlohmann::json& j, FitConfig base = {});

ModelMode parse_mode(const std::string& s);
std::string to_string(ModelMode mode);

/// Pair table and true model described by a ModelSpec.
PairTable build_pairs(const ModelSpec& spec);
ModelState build_state(const ModelSpec& spec, double horizon);

/// FNV-1a 64 of the canonical JSON dump.
std::uint64_t config_hash(const RunConfig& config);
std::string hex64(std::uint64_t v);

}  // namespace lppm
