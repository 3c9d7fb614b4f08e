#include "lppm/types.hpp"

#include "lppm/errors.hpp"

#include <algorithm>
#include <string>

namespace lppm {

PairTable::PairTable(int agents, std::vector<Endpoints> pairs) : agents_(agents), pairs_(std::move(pairs)) {
  if (agents < 0) throw InputError("agent count must be non-negative");
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    auto& p = pairs_[k];
    if (p.first > p.second) std::swap(p.first, p.second);
    if (p.first == p.second || p.first < 0 || p.second >= agents) {
      throw InputError("pair " + std::to_string(k) + " has invalid endpoints (" + std::to_string(p.first) + ", " +
                       std::to_string(p.second) + ")");
    }
    if (!lookup_.emplace(std::pair{p.first, p.second}, static_cast<PairIndex>(k)).second) {
      throw InputError("pair " + std::to_string(k) + " duplicates an earlier pair");
    }
  }
}

PairTable PairTable::complete(int agents) {
  std::vector<Endpoints> pairs;
  for (int i = 0; i < agents; ++i) {
    for (int j = i + 1; j < agents; ++j) pairs.push_back({i, j});
  }
  return PairTable(agents, std::move(pairs));
}

std::optional<PairIndex> PairTable::index_of(int a, int b) const {
  if (a > b) std::swap(a, b);
  auto it = lookup_.find({a, b});
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<PairIndex> PairTable::pairs_with(int agent) const {
  std::vector<PairIndex> out;
  for (PairIndex k = 0; k < size(); ++k) {
    const auto& p = pairs_[static_cast<std::size_t>(k)];
    if (p.first == agent || p.second == agent) out.push_back(k);
  }
  return out;
}

std::vector<PairIndex> admissible_pairs(const Label& label, int pair_count) {
  if (const auto* known = std::get_if<KnownPair>(&label)) return {known->pair};
  if (const auto* cand = std::get_if<CandidateSet>(&label)) return cand->pairs;
  std::vector<PairIndex> all(static_cast<std::size_t>(pair_count));
  for (int a = 0; a < pair_count; ++a) all[static_cast<std::size_t>(a)] = a;
  return all;
}

void normalize_times(EventLog& log) {
  std::stable_sort(log.events.begin(), log.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  for (std::size_t k = 1; k < log.events.size(); ++k) {
    if (log.events[k].t <= log.events[k - 1].t) log.events[k].t = log.events[k - 1].t + 1e-9;
  }
  if (!log.events.empty()) log.horizon = std::max(log.horizon, log.events.back().t);
}

void validate(const EventLog& log) {
  const int m = log.pairs.size();
  for (std::size_t k = 0; k < log.events.size(); ++k) {
    const Event& e = log.events[k];
    const std::string where = "event " + std::to_string(k);
    if (!(e.t >= 0.0) || !std::isfinite(e.t)) throw InputError(where + ": time must be finite and non-negative");
    if (!e.x.allFinite()) throw InputError(where + ": location must be finite");
    if (k > 0 && !(e.t > log.events[k - 1].t)) throw InputError(where + ": times must be strictly increasing");
    if (const auto* known = std::get_if<KnownPair>(&e.label)) {
      if (known->pair < 0 || known->pair >= m) throw InputError(where + ": unknown pair index");
    } else if (const auto* cand = std::get_if<CandidateSet>(&e.label)) {
      if (cand->pairs.empty()) throw InputError(where + ": empty candidate set");
      if (static_cast<int>(cand->pairs.size()) >= m) throw InputError(where + ": candidate set must be a strict subset");
      for (std::size_t c = 0; c < cand->pairs.size(); ++c) {
        if (cand->pairs[c] < 0 || cand->pairs[c] >= m) throw InputError(where + ": unknown candidate pair index");
        if (c > 0 && cand->pairs[c] <= cand->pairs[c - 1]) {
          throw InputError(where + ": candidate set must be sorted and unique");
        }
      }
    }
  }
  if (!log.events.empty() && log.horizon < log.events.back().t) {
    throw InputError("horizon precedes the last event");
  }
}

SpatialModel SpatialModel::per_pair(std::vector<GaussianComponent> components) {
  SpatialModel s;
  s.mode = SpatialMode::PerPairGaussian;
  s.components = std::move(components);
  return s;
}

SpatialModel SpatialModel::shared_mixture(std::vector<GaussianComponent> components, Eigen::MatrixXd weights) {
  SpatialModel s;
  s.mode = SpatialMode::SharedMixture;
  s.components = std::move(components);
  s.weights = std::move(weights);
  return s;
}

void validate(const ModelState& state) {
  const int m = state.pair_count();
  for (int a = 0; a < m; ++a) {
    const auto& p = state.pairs[static_cast<std::size_t>(a)];
    if (!(p.mu >= 0.0) || !(p.beta >= 0.0) || !(p.beta < 1.0) || !(p.omega > 0.0)) {
      throw InputError("pair " + std::to_string(a) + ": parameters violate mu >= 0, 0 <= beta < 1, omega > 0");
    }
  }
  const auto& s = state.spatial;
  if (s.mode == SpatialMode::PerPairGaussian) {
    if (static_cast<int>(s.components.size()) != m) throw InputError("per-pair spatial model needs one Gaussian per pair");
  } else {
    if (s.weights.rows() != m || s.weights.cols() != static_cast<Eigen::Index>(s.components.size())) {
      throw InputError("mixture weight matrix must be pairs x components");
    }
    for (int a = 0; a < m; ++a) {
      if ((s.weights.row(a).array() < 0.0).any() || std::abs(s.weights.row(a).sum() - 1.0) > 1e-9) {
        throw InputError("mixture weights of pair " + std::to_string(a) + " must be a distribution");
      }
    }
  }
}

Responsibilities initial_responsibilities(const EventLog& log) {
  const int m = log.pairs.size();
  Responsibilities phi = Responsibilities::Zero(static_cast<Eigen::Index>(log.size()), m);
  for (std::size_t k = 0; k < log.size(); ++k) {
    const auto allowed = admissible_pairs(log.events[k].label, m);
    for (PairIndex a : allowed) phi(static_cast<Eigen::Index>(k), a) = 1.0 / static_cast<double>(allowed.size());
  }
  return phi;
}

}  // namespace lppm
