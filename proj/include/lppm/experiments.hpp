#pragma once

// Synthetic study protocols: table1, fig2a_sigma_sweep, fig2b_missing_sweep,
// timing_mape and topk. Each replicate is single-threaded and seeded from
// the run seed; replicates may run on several worker threads, and results
// are aggregated in replicate order, so outputs do not depend on the
// number of workers.

#include "lppm/run_config.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace lppm {

const std::vector<std::string>& experiment_names();

/// Protocol defaults for `name`; throws InputError for unknown names.
nlohmann::json default_experiment_json(const std::string& name);

/// Defaults for the experiment named in `overrides` (or `name` when given),
/// with `overrides` merged on top.
RunConfig experiment_config(const std::string& name, const nlohmann::json& overrides = nlohmann::json::object());

struct ResultRow {
  std::string condition;  // swept quantity, e.g. "sigma"
  double value = 0.0;
  std::string method;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t replicates = 0;
};

struct ExperimentResult {
  std::string name;
  std::vector<ResultRow> rows;
  std::vector<std::uint64_t> seeds;  // one per replicate
  RunConfig config;

  /// First row matching (value, method, metric); throws if absent.
  const ResultRow& find(double value, const std::string& method, const std::string& metric) const;
};

ExperimentResult run_experiment(const RunConfig& config);

void write_results_csv(const ExperimentResult& result, std::ostream& out);
nlohmann::json manifest(const ExperimentResult& result);

/// Worker threads for replicates: LPPM_WORKERS if set, else the hardware
/// concurrency.
int worker_count();

/// Calls fn(r) for r in [0, count) on `workers` threads. The first
/// exception (by replicate index) is rethrown after all workers finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace lppm
