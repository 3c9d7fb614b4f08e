#include "lppm/label_inference.hpp"

#include "lppm/errors.hpp"

#include <algorithm>
#include <numeric>

namespace lppm {

InferenceResult infer_labels(const Responsibilities& phi, const EventLog& log) {
  if (phi.rows() != static_cast<Eigen::Index>(log.size()) || phi.cols() != log.pairs.size()) {
    throw InputError("responsibility matrix does not match the log");
  }
  InferenceResult result;
  for (std::size_t k = 0; k < log.size(); ++k) {
    const Label& label = log.events[k].label;
    if (is_known(label)) continue;
    InferredEvent ev;
    ev.event = k;
    for (PairIndex a : admissible_pairs(label, log.pairs.size())) {
      ev.ranking.push_back({a, phi(static_cast<Eigen::Index>(k), a)});
    }
    std::stable_sort(ev.ranking.begin(), ev.ranking.end(),
                     [](const RankedPair& x, const RankedPair& y) { return x.probability > y.probability; });
    result.events.push_back(std::move(ev));
  }
  return result;
}

namespace {

void check_alignment(const InferenceResult& result, const GroundTruth& truth) {
  if (truth.events.size() != truth.pairs.size()) throw InputError("ground truth is malformed");
  if (result.events.size() != truth.events.size()) throw InputError("result and ground truth cover different events");
  for (std::size_t i = 0; i < truth.events.size(); ++i) {
    if (result.events[i].event != truth.events[i]) throw InputError("result and ground truth cover different events");
  }
}

}  // namespace

double accuracy(const InferenceResult& result, const GroundTruth& truth) {
  check_alignment(result, truth);
  if (truth.events.empty()) return 1.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.events.size(); ++i) correct += result.events[i].estimate() == truth.pairs[i];
  return static_cast<double>(correct) / static_cast<double>(truth.events.size());
}

double endpoint_recall(const InferenceResult& result, const GroundTruth& truth, const PairTable& pairs) {
  check_alignment(result, truth);
  if (truth.events.empty()) return 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < truth.events.size(); ++i) {
    const Endpoints t = pairs.endpoints(truth.pairs[i]);
    const Endpoints e = pairs.endpoints(result.events[i].estimate());
    int hit = 0;
    hit += (e.first == t.first || e.first == t.second);
    hit += (e.second == t.first || e.second == t.second);
    total += hit / 2.0;
  }
  return total / static_cast<double>(truth.events.size());
}

double homogeneous_identifiability_bound(std::span<const double> rates) {
  if (rates.empty()) throw InputError("at least one rate is required");
  for (double r : rates) {
    if (!(r > 0.0)) throw InputError("rates must be positive");
  }
  return *std::max_element(rates.begin(), rates.end()) / std::accumulate(rates.begin(), rates.end(), 0.0);
}

}  // namespace lppm
