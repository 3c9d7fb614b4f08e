#include "lppm/baselines.hpp"
#include "lppm/errors.hpp"
#include "lppm/experiments.hpp"
#include "lppm/io.hpp"
#include "lppm/label_inference.hpp"
#include "lppm/prediction.hpp"
#include "lppm/run_config.hpp"
#include "lppm/simulator.hpp"
#include "lppm/variational_em.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kOther = 1, kInput = 2, kNumeric = 3, kConvergence = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::string out;
  std::string mask;
  std::string mode;
  std::string baseline;
};

json load_json(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(lppm::read_text(path));
  } catch (const json::parse_error& e) {
    throw lppm::InputError(path + ": " + e.what());
  }
}

lppm::MaskSpec parse_mask(const std::string& text, lppm::MaskSpec base) {
  const auto colon = text.find(':');
  const std::string kind = colon == std::string::npos ? "fraction" : text.substr(0, colon);
  const std::string value = colon == std::string::npos ? text : text.substr(colon + 1);
  try {
    if (kind == "fraction") {
      base.mode = lppm::MaskSpec::Mode::Fraction;
      base.rho = std::stod(value);
    } else if (kind == "count") {
      base.mode = lppm::MaskSpec::Mode::Count;
      base.count = std::stoul(value);
    } else if (kind == "one_endpoint") {
      base.mode = lppm::MaskSpec::Mode::OneEndpoint;
      base.rho = std::stod(value);
    } else {
      throw lppm::InputError("");
    }
  } catch (const std::exception&) {
    throw lppm::InputError("--mask expects RHO, fraction:RHO, count:K or one_endpoint:RHO");
  }
  if (!(base.rho >= 0.0 && base.rho <= 1.0)) throw lppm::InputError("mask fraction must lie in [0, 1]");
  return base;
}

lppm::RunConfig load_config(const Common& c) {
  lppm::RunConfig cfg = lppm::parse_run_config(load_json(c.config));
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.fit.seed = *c.seed;
  }
  if (c.replicates) cfg.experiment.replicates = *c.replicates;
  if (!c.mask.empty()) cfg.mask = parse_mask(c.mask, cfg.mask);
  if (!c.mode.empty()) cfg.fit.mode = lppm::parse_mode(c.mode);
  return cfg;
}

void emit(const json& summary) { std::cout << summary.dump() << std::endl; }

fs::path out_dir(const Common& c, const lppm::RunConfig& cfg) { return c.out.empty() ? fs::path(cfg.output_dir) : fs::path(c.out); }

int cmd_simulate(const Common& c) {
  const auto cfg = load_config(c);
  const auto pairs = lppm::build_pairs(cfg.model);
  lppm::EventLog log;
  if (cfg.simulate.events) {
    log = lppm::simulate_event_count(lppm::build_state(cfg.model, 0.0), pairs, *cfg.simulate.events, cfg.seed);
  } else {
    log = lppm::simulate_network(lppm::build_state(cfg.model, *cfg.simulate.horizon), pairs, *cfg.simulate.horizon,
                                 cfg.seed);
  }
  lppm::MaskSpec mask = cfg.mask;
  mask.seed = lppm::split_seed(cfg.seed, 1);
  const auto masked = lppm::mask_labels(log, mask);
  const fs::path dir = out_dir(c, cfg);
  lppm::write_log(masked.log, dir / "events.csv");
  lppm::write_truth(masked.truth, dir / "truth.csv");
  lppm::write_model(lppm::build_state(cfg.model, log.horizon), nullptr, dir / "true_model.json");
  emit({{"command", "simulate"},
        {"events", log.size()},
        {"pairs", log.pairs.size()},
        {"hidden", masked.truth.events.size()},
        {"horizon", log.horizon},
        {"seed", cfg.seed},
        {"out", dir.string()}});
  return kOk;
}

int cmd_fit(const Common& c, const std::string& log_path, bool require_convergence) {
  const auto cfg = load_config(c);
  const auto log = lppm::read_log(fs::path(log_path));
  lppm::FitReport report;
  if (c.baseline.empty()) report = lppm::fit(log, cfg.fit);
  else if (c.baseline == "b1") report = lppm::fit_b1(log, cfg.fit);
  else if (c.baseline == "b2") report = lppm::fit_b2(log, cfg.fit);
  else throw lppm::InputError("fit supports --baseline b1 or b2");
  const fs::path out = c.out.empty() ? fs::path(cfg.output_dir) / "model.json" : fs::path(c.out);
  lppm::write_model(report.state, &report.phi, out);
  emit({{"command", "fit"},
        {"method", c.baseline.empty() ? "lppm" : c.baseline},
        {"mode", lppm::to_string(cfg.fit.mode)},
        {"outer_iters", report.outer_iters},
        {"estep_sweeps", report.estep_sweeps},
        {"converged", report.params_converged},
        {"elbo", report.elbo_trace.empty() ? 0.0 : report.elbo_trace.back()},
        {"omega_fallbacks", report.omega_fallbacks},
        {"frozen_pairs", report.frozen_pairs},
        {"out", out.string()}});
  if (require_convergence && !report.params_converged) {
    throw lppm::ConvergenceError("fit did not converge within max_outer_iters");
  }
  return kOk;
}

int cmd_infer(const Common& c, const std::string& log_path, const std::string& model_path,
              const std::string& truth_path) {
  const auto cfg = load_config(c);
  const auto log = lppm::read_log(fs::path(log_path));
  lppm::InferenceResult result;
  std::string method = c.baseline.empty() ? "lppm" : c.baseline;
  if (c.baseline == "spatial") {
    result = lppm::spatial_only_infer(log, cfg.fit.min_variance).inference;
  } else {
    if (model_path.empty()) throw lppm::InputError("infer needs --model unless --baseline spatial");
    auto saved = lppm::read_model(fs::path(model_path));
    if (c.baseline == "exact") {
      saved.state.horizon = log.horizon;
      result = lppm::exact_map_inference(lppm::exact_ml_enumerate(log, saved.state, cfg.fit.mode), log);
    } else if (c.baseline.empty()) {
      lppm::Responsibilities phi;
      if (saved.phi && saved.phi->rows() == static_cast<Eigen::Index>(log.size()) &&
          saved.phi->cols() == log.pairs.size()) {
        phi = *saved.phi;
      } else {
        phi = lppm::initial_responsibilities(log);
        saved.state.horizon = log.horizon;
        lppm::estep_sweep(log, phi, saved.state, cfg.fit);
      }
      result = lppm::infer_labels(phi, log);
    } else {
      throw lppm::InputError("infer supports --baseline spatial or exact");
    }
  }
  const fs::path out = c.out.empty() ? fs::path(cfg.output_dir) / "inference.csv" : fs::path(c.out);
  std::ostringstream ss;
  lppm::write_inference(result, ss);
  lppm::write_text(out, ss.str());
  json summary = {{"command", "infer"}, {"method", method}, {"hidden", result.events.size()}, {"out", out.string()}};
  if (!truth_path.empty()) {
    const auto truth = lppm::read_truth(fs::path(truth_path));
    summary["accuracy"] = lppm::accuracy(result, truth);
    summary["endpoint_recall"] = lppm::endpoint_recall(result, truth, log.pairs);
  }
  emit(summary);
  return kOk;
}

int cmd_predict(const Common& c, const std::string& log_path, const std::string& model_path, std::size_t from,
                int top_k) {
  const auto cfg = load_config(c);
  const auto log = lppm::read_log(fs::path(log_path));
  if (from < 1 || from >= log.size()) throw lppm::InputError("--from must lie in [1, events)");
  const int m = log.pairs.size();
  if (top_k < 1 || top_k > m) throw lppm::InputError("--top-k must lie in [1, M]");
  if (model_path.empty()) throw lppm::InputError("predict needs --model");
  auto saved = lppm::read_model(fs::path(model_path));
  if (saved.state.pair_count() != m) throw lppm::InputError("model and log disagree on the number of pairs");
  const std::string method = c.baseline.empty() ? "lppm" : c.baseline;
  if (method != "lppm" && method != "b2" && method != "b3") throw lppm::InputError("predict supports --baseline b2 or b3");

  // Events the model was fitted on keep their responsibilities; later
  // events enter the history through their labels (uniform over the
  // admissible set when unlabeled).
  lppm::Responsibilities phi = lppm::initial_responsibilities(log);
  if (saved.phi && saved.phi->cols() == m) {
    const auto rows = std::min<Eigen::Index>(saved.phi->rows(), static_cast<Eigen::Index>(log.size()));
    phi.topRows(rows) = saved.phi->topRows(rows);
  }
  double rate = 0.0;
  std::vector<lppm::PairIndex> by_rate(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    rate += saved.state.pairs[static_cast<std::size_t>(a)].mu;
    by_rate[static_cast<std::size_t>(a)] = a;
  }
  std::stable_sort(by_rate.begin(), by_rate.end(), [&](int x, int y) {
    return saved.state.pairs[static_cast<std::size_t>(x)].mu > saved.state.pairs[static_cast<std::size_t>(y)].mu;
  });

  std::ostringstream csv;
  csv << "id,t_now,actual_wait,predicted_wait,actual_pair";
  for (int k = 1; k <= top_k; ++k) csv << ",top" << k;
  csv << '\n';
  std::vector<double> actual, predicted;
  std::vector<double> hits(static_cast<std::size_t>(top_k), 0.0);
  std::size_t labeled_steps = 0;
  for (std::size_t k = from; k < log.size(); ++k) {
    const double t_now = log.events[k - 1].t;
    std::vector<lppm::PairIndex> ranked;
    double wait = 0.0;
    if (method == "lppm") {
      const auto snap = lppm::snapshot(saved.state, log, phi, k, t_now);
      wait = lppm::expected_waiting_time(snap);
      ranked = lppm::rank_next_pairs(snap, top_k);
    } else if (method == "b2") {
      wait = 1.0 / rate;
      ranked.assign(by_rate.begin(), by_rate.begin() + top_k);
    } else {
      std::vector<lppm::AssignedEvent> history;
      for (std::size_t i = 0; i < k; ++i) {
        if (const auto* known = std::get_if<lppm::KnownPair>(&log.events[i].label)) {
          history.push_back({log.events[i].t, known->pair});
        }
      }
      if (history.empty()) throw lppm::InputError("baseline III needs a labeled event before --from");
      ranked = lppm::predict_b3_top(history, top_k);
      wait = 1.0 / rate;
    }
    const double gap = log.events[k].t - t_now;
    actual.push_back(gap);
    predicted.push_back(wait);
    const auto* truth = std::get_if<lppm::KnownPair>(&log.events[k].label);
    csv << k << ',' << lppm::format_decimal(t_now) << ',' << lppm::format_decimal(gap) << ','
        << lppm::format_decimal(wait) << ',' << (truth ? std::to_string(truth->pair) : std::string("?"));
    for (int i = 0; i < top_k; ++i) {
      csv << ',' << (i < static_cast<int>(ranked.size()) ? std::to_string(ranked[static_cast<std::size_t>(i)]) : "");
    }
    csv << '\n';
    if (truth) {
      ++labeled_steps;
      for (int K = 1; K <= top_k; ++K) {
        const auto end = ranked.begin() + std::min<std::ptrdiff_t>(K, static_cast<std::ptrdiff_t>(ranked.size()));
        if (std::find(ranked.begin(), end, truth->pair) != end) hits[static_cast<std::size_t>(K - 1)] += 1.0;
      }
    }
  }
  const fs::path out = c.out.empty() ? fs::path(cfg.output_dir) / "predictions.csv" : fs::path(c.out);
  lppm::write_text(out, csv.str());
  const auto score = lppm::mape(actual, predicted);
  json summary = {{"command", "predict"},
                  {"method", method},
                  {"steps", actual.size()},
                  {"mape", score.mean},
                  {"mape_skipped", score.skipped},
                  {"out", out.string()}};
  for (int K = 1; K <= top_k; ++K) {
    summary["hit@" + std::to_string(K)] =
        labeled_steps ? hits[static_cast<std::size_t>(K - 1)] / static_cast<double>(labeled_steps) : 0.0;
  }
  emit(summary);
  return kOk;
}

int cmd_evaluate(const std::string& inference_path, const std::string& truth_path, const std::string& log_path) {
  const auto result = lppm::read_inference(fs::path(inference_path));
  const auto truth = lppm::read_truth(fs::path(truth_path));
  json summary = {{"command", "evaluate"}, {"hidden", truth.events.size()}, {"accuracy", lppm::accuracy(result, truth)}};
  if (!log_path.empty()) {
    const auto log = lppm::read_log(fs::path(log_path));
    summary["endpoint_recall"] = lppm::endpoint_recall(result, truth, log.pairs);
  }
  emit(summary);
  return kOk;
}

int cmd_experiment(const Common& c, const std::string& name) {
  lppm::RunConfig cfg = lppm::experiment_config(name, load_json(c.config));
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.fit.seed = *c.seed;
  }
  if (c.replicates) cfg.experiment.replicates = *c.replicates;
  if (!c.mask.empty()) cfg.mask = parse_mask(c.mask, cfg.mask);
  if (!c.mode.empty()) cfg.fit.mode = lppm::parse_mode(c.mode);
  const auto result = lppm::run_experiment(cfg);
  const fs::path dir = out_dir(c, cfg);
  std::ostringstream csv;
  lppm::write_results_csv(result, csv);
  lppm::write_text(dir / (name + ".csv"), csv.str());
  lppm::write_text(dir / (name + "_manifest.json"), lppm::manifest(result).dump(2) + "\n");
  for (const auto& r : result.rows) {
    emit({{"command", "experiment"},
          {"experiment", name},
          {r.condition, r.value},
          {"method", r.method},
          {"metric", r.metric},
          {"mean", r.mean},
          {"stderr", r.stderr_},
          {"replicates", r.replicates}});
  }
  return kOk;
}

void add_common(CLI::App* sub, Common& c, bool with_baseline) {
  sub->add_option("--config", c.config, "run configuration JSON");
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--replicates", c.replicates, "replicate count");
  sub->add_option("--out", c.out, "output file or directory");
  sub->add_option("--mask", c.mask, "RHO | fraction:RHO | count:K | one_endpoint:RHO");
  sub->add_option("--mode", c.mode, "full | temporal | spatial")->check(CLI::IsMember({"full", "temporal", "spatial"}));
  if (with_baseline) {
    sub->add_option("--baseline", c.baseline, "b1 | b2 | b3 | spatial | exact")
        ->check(CLI::IsMember({"b1", "b2", "b3", "spatial", "exact"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent point process model: simulation, fitting, label inference and prediction"};
  app.require_subcommand(1);
  Common c;
  std::string log_path, model_path, truth_path, inference_path, experiment;
  bool require_convergence = false;
  std::size_t from = 0;
  int top_k = 3;

  auto* sim = app.add_subcommand("simulate", "simulate a labeled log and mask it");
  add_common(sim, c, false);

  auto* fit = app.add_subcommand("fit", "fit the model to an event log");
  add_common(fit, c, true);
  fit->add_option("--log", log_path, "event log")->required();
  fit->add_flag("--require-convergence", require_convergence, "exit with the convergence code if not converged");

  auto* infer = app.add_subcommand("infer", "infer hidden labels");
  add_common(infer, c, true);
  infer->add_option("--log", log_path, "event log")->required();
  infer->add_option("--model", model_path, "fitted model JSON");
  infer->add_option("--truth", truth_path, "ground-truth sidecar for scoring");

  auto* predict = app.add_subcommand("predict", "predict waiting times and next pairs");
  add_common(predict, c, true);
  predict->add_option("--log", log_path, "event log")->required();
  predict->add_option("--model", model_path, "fitted model JSON")->required();
  predict->add_option("--from", from, "first event index to predict")->required();
  predict->add_option("--top-k", top_k, "number of ranked pairs");

  auto* evaluate = app.add_subcommand("evaluate", "score an inference CSV against ground truth");
  evaluate->add_option("--inference", inference_path, "inference CSV")->required();
  evaluate->add_option("--truth", truth_path, "ground-truth sidecar")->required();
  evaluate->add_option("--log", log_path, "event log (adds endpoint recall)");

  auto* exp = app.add_subcommand("experiment", "run a synthetic study");
  add_common(exp, c, false);
  exp->add_option("name", experiment, "experiment name")->required()->check(CLI::IsMember(lppm::experiment_names()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*sim) return cmd_simulate(c);
    if (*fit) return cmd_fit(c, log_path, require_convergence);
    if (*infer) return cmd_infer(c, log_path, model_path, truth_path);
    if (*predict) return cmd_predict(c, log_path, model_path, from, top_k);
    if (*evaluate) return cmd_evaluate(inference_path, truth_path, log_path);
    if (*exp) return cmd_experiment(c, experiment);
  } catch (const lppm::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const lppm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const lppm::ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << '\n';
    return kConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
