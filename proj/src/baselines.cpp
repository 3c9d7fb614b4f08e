#include "lppm/baselines.hpp"

#include "lppm/errors.hpp"
#include "lppm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lppm {

EventLog labeled_only(const EventLog& log) {
  EventLog out;
  out.pairs = log.pairs;
  out.horizon = log.horizon;
  for (const auto& e : log.events) {
    if (is_known(e.label)) out.events.push_back(e);
  }
  return out;
}

FitReport fit_b1(const EventLog& log, const FitConfig& config) {
  const EventLog train = labeled_only(log);
  if (train.empty()) throw InputError("baseline I needs at least one labeled event");
  FitReport report = fit(train, config);
  FitConfig pass = config;
  pass.max_estep_sweeps = 1;
  report.phi = initial_responsibilities(log);
  estep_sweep(log, report.phi, report.state, pass);
  return report;
}

FitReport fit_b2(const EventLog& log, const FitConfig& config) {
  FitConfig c = config;
  c.learn_excitation = false;
  return fit(log, c);
}

PairIndex predict_b3(std::span<const AssignedEvent> history) {
  if (history.empty()) throw InputError("baseline III needs a non-empty history");
  return history.back().pair;
}

std::vector<PairIndex> predict_b3_top(std::span<const AssignedEvent> history, int k) {
  if (history.empty()) throw InputError("baseline III needs a non-empty history");
  std::vector<PairIndex> out;
  for (auto it = history.rbegin(); it != history.rend() && static_cast<int>(out.size()) < k; ++it) {
    if (std::find(out.begin(), out.end(), it->pair) == out.end()) out.push_back(it->pair);
  }
  return out;
}

SpatialOnlyResult spatial_only_infer(const EventLog& log, double min_variance) {
  const int m = log.pairs.size();
  std::vector<Vec2> sum(static_cast<std::size_t>(m), Vec2::Zero());
  std::vector<Vec2> sq(static_cast<std::size_t>(m), Vec2::Zero());
  std::vector<int> count(static_cast<std::size_t>(m), 0);
  for (const auto& e : log.events) {
    if (const auto* k = std::get_if<KnownPair>(&e.label)) {
      sum[static_cast<std::size_t>(k->pair)] += e.x;
      ++count[static_cast<std::size_t>(k->pair)];
    }
  }
  SpatialOnlyResult out;
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (count[ua] > 0) comps[ua].mean = sum[ua] / count[ua];
    else out.excluded.push_back(a);
  }
  Vec2 pooled = Vec2::Zero();
  int pooled_n = 0, groups = 0;
  for (const auto& e : log.events) {
    if (const auto* k = std::get_if<KnownPair>(&e.label)) {
      const Vec2 d = (e.x - comps[static_cast<std::size_t>(k->pair)].mean).cwiseAbs2();
      sq[static_cast<std::size_t>(k->pair)] += d;
      pooled += d;
      ++pooled_n;
    }
  }
  for (int c : count) groups += c > 0;
  if (pooled_n - groups > 0) pooled /= static_cast<double>(pooled_n - groups);
  else pooled = Vec2::Ones();
  for (int a = 0; a < m; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    Vec2 v = count[ua] >= 2 ? Vec2(sq[ua] / count[ua]) : pooled;
    comps[ua].cov = v.cwiseMax(min_variance).asDiagonal();
  }
  out.model = SpatialModel::per_pair(std::move(comps));

  for (std::size_t k = 0; k < log.size(); ++k) {
    const Label& label = log.events[k].label;
    if (is_known(label)) continue;
    std::vector<PairIndex> allowed;
    for (PairIndex a : admissible_pairs(label, m)) {
      if (count[static_cast<std::size_t>(a)] > 0) allowed.push_back(a);
    }
    if (allowed.empty()) allowed = admissible_pairs(label, m);  // nothing fitted: fall back to uniform
    Eigen::VectorXd lr(static_cast<Eigen::Index>(allowed.size()));
    for (std::size_t i = 0; i < allowed.size(); ++i) {
      lr(static_cast<Eigen::Index>(i)) = count[static_cast<std::size_t>(allowed[i])] > 0
                                             ? spatial_log_density(allowed[i], log.events[k].x, out.model)
                                             : 0.0;
    }
    const double norm = log_sum_exp(lr);
    InferredEvent ev;
    ev.event = k;
    for (std::size_t i = 0; i < allowed.size(); ++i) {
      ev.ranking.push_back({allowed[i], std::exp(lr(static_cast<Eigen::Index>(i)) - norm)});
    }
    std::stable_sort(ev.ranking.begin(), ev.ranking.end(),
                     [](const RankedPair& x, const RankedPair& y) { return x.probability > y.probability; });
    out.inference.events.push_back(std::move(ev));
  }
  return out;
}

ExactPosterior exact_ml_enumerate(const EventLog& log, const ModelState& state, ModelMode mode) {
  const int m = state.pair_count();
  ExactPosterior post;
  Assignment base(log.size(), 0);
  std::vector<std::vector<PairIndex>> choices;
  double configs = 1.0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    const Label& label = log.events[k].label;
    if (const auto* known = std::get_if<KnownPair>(&label)) {
      base[k] = known->pair;
      continue;
    }
    post.hidden.push_back(k);
    choices.push_back(admissible_pairs(label, m));
    configs *= static_cast<double>(choices.back().size());
  }
  if (post.hidden.size() > kExactHiddenLimit || configs > kExactConfigurationLimit) {
    throw InputError("exact enumeration supports at most " + std::to_string(kExactHiddenLimit) +
                     " hidden events and " + std::to_string(static_cast<long long>(kExactConfigurationLimit)) +
                     " configurations; got " + std::to_string(post.hidden.size()) + " hidden events");
  }
  const std::size_t h = post.hidden.size();
  post.marginals = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h), m);
  std::vector<std::size_t> digit(h, 0);
  Assignment current = base;
  for (std::size_t i = 0; i < h; ++i) current[post.hidden[i]] = choices[i][0];

  // Streaming log-sum-exp over configurations, with marginals rescaled as the running max moves.
  double running_max = -std::numeric_limits<double>::infinity();
  double scaled_total = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  Assignment best_assignment = current;
  for (;;) {
    const double ll = complete_data_log_likelihood(log, current, state, mode);
    if (ll > best) {
      best = ll;
      best_assignment = current;
    }
    if (ll > -std::numeric_limits<double>::infinity()) {
      if (ll > running_max) {
        const double rescale = std::exp(running_max - ll);
        scaled_total *= rescale;
        post.marginals *= rescale;
        running_max = ll;
      }
      const double w = std::exp(ll - running_max);
      scaled_total += w;
      for (std::size_t i = 0; i < h; ++i) post.marginals(static_cast<Eigen::Index>(i), current[post.hidden[i]]) += w;
    }
    std::size_t i = 0;
    for (; i < h; ++i) {
      if (++digit[i] < choices[i].size()) {
        current[post.hidden[i]] = choices[i][digit[i]];
        break;
      }
      digit[i] = 0;
      current[post.hidden[i]] = choices[i][0];
    }
    if (i == h) break;
  }
  if (!(scaled_total > 0.0)) throw NumericError("every configuration has zero likelihood");
  post.marginals /= scaled_total;
  post.log_evidence = running_max + std::log(scaled_total);
  post.map = std::move(best_assignment);
  return post;
}

InferenceResult exact_map_inference(const ExactPosterior& posterior, const EventLog& log) {
  InferenceResult result;
  for (std::size_t i = 0; i < posterior.hidden.size(); ++i) {
    const std::size_t k = posterior.hidden[i];
    InferredEvent ev;
    ev.event = k;
    const PairIndex chosen = posterior.map[k];
    ev.ranking.push_back({chosen, posterior.marginals(static_cast<Eigen::Index>(i), chosen)});
    for (PairIndex a : admissible_pairs(log.events[k].label, log.pairs.size())) {
      if (a != chosen) ev.ranking.push_back({a, posterior.marginals(static_cast<Eigen::Index>(i), a)});
    }
    std::stable_sort(ev.ranking.begin() + 1, ev.ranking.end(),
                     [](const RankedPair& x, const RankedPair& y) { return x.probability > y.probability; });
    result.events.push_back(std::move(ev));
  }
  return result;
}

}  // namespace lppm
