#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace lppm {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Index of an unordered agent pair inside a PairTable.
using PairIndex = int;

struct Endpoints {
  int first;   // smaller agent index
  int second;  // larger agent index

  friend bool operator==(const Endpoints&, const Endpoints&) = default;
};

/// Bijection between pair indices [0, M) and unordered agent pairs (i < j)
/// drawn from N agents.
class PairTable {
 public:
  PairTable() = default;
  PairTable(int agents, std::vector<Endpoints> pairs);

  /// All N(N-1)/2 pairs in lexicographic order.
  static PairTable complete(int agents);

  int agents() const { return agents_; }
  int size() const { return static_cast<int>(pairs_.size()); }
  const Endpoints& endpoints(PairIndex index) const { return pairs_.at(static_cast<std::size_t>(index)); }
  std::optional<PairIndex> index_of(int a, int b) const;
  /// Pairs with `agent` as one endpoint, ascending.
  std::vector<PairIndex> pairs_with(int agent) const;

  friend bool operator==(const PairTable& a, const PairTable& b) {
    return a.agents_ == b.agents_ && a.pairs_ == b.pairs_;
  }

 private:
  int agents_ = 0;
  std::vector<Endpoints> pairs_;
  std::map<std::pair<int, int>, PairIndex> lookup_;
};

struct KnownPair {
  PairIndex pair;
  friend bool operator==(const KnownPair&, const KnownPair&) = default;
};

/// Partial label: the event belongs to one of these pairs (sorted, unique).
struct CandidateSet {
  std::vector<PairIndex> pairs;
  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

struct UnknownPair {
  friend bool operator==(const UnknownPair&, const UnknownPair&) = default;
};

using Label = std::variant<KnownPair, CandidateSet, UnknownPair>;

inline bool is_known(const Label& label) { return std::holds_alternative<KnownPair>(label); }

/// Pairs an event may belong to under its label.
std::vector<PairIndex> admissible_pairs(const Label& label, int pair_count);

struct Event {
  double t = 0.0;  // days
  Vec2 x = Vec2::Zero();
  Label label = UnknownPair{};
};

/// A time-ordered stream of events over [0, horizon].
struct EventLog {
  PairTable pairs;
  double horizon = 0.0;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

/// Sorts stably by time and breaks ties by nudging later duplicates forward
/// by 1e-9 day steps so that times are strictly increasing.
void normalize_times(EventLog& log);

/// Throws InputError when times are unsorted, labels reference unknown
/// pairs, or a candidate set is empty or covers every pair.
void validate(const EventLog& log);

/// Per-pair temporal parameters of the exponential Hawkes intensity
/// mu + sum beta * omega * exp(-omega * (t - t_p)).
struct PairParams {
  double mu = 0.0;     // events / day
  double beta = 0.0;   // branching ratio
  double omega = 1.0;  // 1 / day
};

inline constexpr double kMuFloor = 1e-12;
inline constexpr double kOmegaFloor = 1e-12;
inline constexpr double kBetaCeiling = 0.999;

enum class SpatialMode { PerPairGaussian, SharedMixture };

struct GaussianComponent {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
};

/// PerPairGaussian: components[a] is pair a's (diagonal) Gaussian and
/// weights is unused. SharedMixture: components are shared and
/// weights(a, c) is pair a's mixing weight on component c.
struct SpatialModel {
  SpatialMode mode = SpatialMode::PerPairGaussian;
  std::vector<GaussianComponent> components;
  Eigen::MatrixXd weights;

  static SpatialModel per_pair(std::vector<GaussianComponent> components);
  static SpatialModel shared_mixture(std::vector<GaussianComponent> components, Eigen::MatrixXd weights);
};

struct ModelState {
  std::vector<PairParams> pairs;
  SpatialModel spatial;
  double horizon = 0.0;

  int pair_count() const { return static_cast<int>(pairs.size()); }
};

void validate(const ModelState& state);

/// Variational responsibilities: row k is a distribution over pairs for event k.
using Responsibilities = Eigen::MatrixXd;

/// Known rows are indicators, Candidates rows uniform on the set, Unknown
/// rows uniform on all pairs.
Responsibilities initial_responsibilities(const EventLog& log);

/// Hard assignment of every event to one pair.
using Assignment = std::vector<PairIndex>;

/// True pairs of masked events, in event order.
struct GroundTruth {
  std::vector<std::size_t> events;
  std::vector<PairIndex> pairs;
};

}  // namespace lppm
