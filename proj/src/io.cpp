#include "lppm/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace lppm {

ParseError::ParseError(std::string source, std::size_t line, std::size_t column, const std::string& what)
    : InputError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::string format_decimal(double v) {
  if (!std::isfinite(v)) throw InputError("cannot format a non-finite value");
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (ec != std::errc()) throw InputError("value does not fit the decimal format");
  std::string s(buf, end);
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    s += '.';
    dot = s.size() - 1;
  }
  const std::size_t frac = s.size() - dot - 1;
  if (frac < 6) s.append(6 - frac, '0');
  return s;
}

namespace {

constexpr std::string_view kMagic = "# lppm-events v1";

struct Field {
  std::string_view text;
  std::size_t column;  // 1-based
};

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next() {
    if (!std::getline(in_, line_)) return false;
    ++number_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    return true;
  }

  const std::string& line() const { return line_; }
  std::size_t number() const { return number_; }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    throw ParseError(source_, number_, column, what);
  }

  [[noreturn]] void fail_eof(const std::string& what) const { throw ParseError(source_, number_ + 1, 1, what); }

  std::vector<Field> fields() const {
    std::vector<Field> out;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line_.find(',', start);
      const std::size_t stop = comma == std::string::npos ? line_.size() : comma;
      out.push_back({std::string_view(line_).substr(start, stop - start), start + 1});
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  std::size_t number_ = 0;
};

template <typename T>
T parse_number(const LineReader& r, const Field& f, const char* what) {
  T value{};
  const char* first = f.text.data();
  const char* last = first + f.text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (f.text.empty() || ec != std::errc() || ptr != last) {
    r.fail(f.column, std::string("expected ") + what + ", got '" + std::string(f.text) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) r.fail(f.column, std::string(what) + " must be finite");
  }
  return value;
}

std::vector<Field> expect_key(LineReader& r, std::string_view key, std::size_t arity) {
  if (!r.next()) r.fail_eof("missing '" + std::string(key) + "' line");
  auto f = r.fields();
  if (f[0].text != key) r.fail(1, "expected '" + std::string(key) + "'");
  if (f.size() != arity + 1) {
    r.fail(1, "'" + std::string(key) + "' takes " + std::to_string(arity) + " value(s)");
  }
  return f;
}

Label parse_label(const LineReader& r, const Field& f, int pair_count) {
  auto check = [&](PairIndex a, std::size_t column) {
    if (a < 0 || a >= pair_count) r.fail(column, "unknown pair index " + std::to_string(a));
    return a;
  };
  if (f.text == "?") return UnknownPair{};
  if (f.text.find('|') == std::string_view::npos) {
    return KnownPair{check(parse_number<int>(r, f, "pair index"), f.column)};
  }
  CandidateSet set;
  std::size_t start = 0;
  for (;;) {
    const std::size_t bar = f.text.find('|', start);
    const std::size_t stop = bar == std::string_view::npos ? f.text.size() : bar;
    const Field part{f.text.substr(start, stop - start), f.column + start};
    set.pairs.push_back(check(parse_number<int>(r, part, "pair index"), part.column));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  std::sort(set.pairs.begin(), set.pairs.end());
  if (std::adjacent_find(set.pairs.begin(), set.pairs.end()) != set.pairs.end()) {
    r.fail(f.column, "candidate set repeats a pair");
  }
  if (static_cast<int>(set.pairs.size()) == pair_count) return UnknownPair{};
  return set;
}

std::string format_label(const Label& label) {
  if (const auto* k = std::get_if<KnownPair>(&label)) return std::to_string(k->pair);
  if (const auto* c = std::get_if<CandidateSet>(&label)) {
    std::string s;
    for (std::size_t i = 0; i < c->pairs.size(); ++i) {
      if (i) s += '|';
      s += std::to_string(c->pairs[i]);
    }
    return s;
  }
  return "?";
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

}  // namespace

EventLog read_log(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  if (!r.next()) r.fail_eof("empty input");
  if (r.line() != kMagic) r.fail(1, "expected header '" + std::string(kMagic) + "'");
  const int agents = parse_number<int>(r, expect_key(r, "agents", 1)[1], "agent count");
  if (agents < 2) r.fail(8, "at least two agents are required");
  const int m = parse_number<int>(r, expect_key(r, "pairs", 1)[1], "pair count");
  if (m < 1) r.fail(7, "at least one pair is required");
  std::vector<Endpoints> table;
  for (int a = 0; a < m; ++a) {
    auto f = expect_key(r, "pair", 3);
    if (parse_number<int>(r, f[1], "pair index") != a) r.fail(f[1].column, "pair lines must be numbered 0..M-1");
    const int i = parse_number<int>(r, f[2], "agent index");
    const int j = parse_number<int>(r, f[3], "agent index");
    if (i < 0 || i >= agents) r.fail(f[2].column, "agent index out of range");
    if (j <= i || j >= agents) r.fail(f[3].column, "second agent must exceed the first and be in range");
    table.push_back({i, j});
  }
  EventLog log;
  try {
    log.pairs = PairTable(agents, std::move(table));
  } catch (const InputError& e) {
    r.fail(1, e.what());
  }
  {
    auto f = expect_key(r, "horizon", 1);
    log.horizon = parse_number<double>(r, f[1], "horizon");
    if (!(log.horizon > 0.0)) r.fail(f[1].column, "horizon must be positive");
  }
  if (!r.next()) r.fail_eof("missing column header");
  if (r.line() != "id,t,x_lat,x_long,label") r.fail(1, "expected column header 'id,t,x_lat,x_long,label'");
  double prev = -std::numeric_limits<double>::infinity();
  while (r.next()) {
    if (r.line().empty()) r.fail(1, "blank line");
    auto f = r.fields();
    if (f.size() != 5) r.fail(1, "expected 5 fields, got " + std::to_string(f.size()));
    const auto id = parse_number<long long>(r, f[0], "event id");
    if (id != static_cast<long long>(log.size())) r.fail(f[0].column, "event ids must be 0, 1, 2, ...");
    Event e;
    e.t = parse_number<double>(r, f[1], "time");
    if (e.t < 0.0 || e.t > log.horizon) r.fail(f[1].column, "time outside [0, horizon]");
    if (e.t < prev) r.fail(f[1].column, "times are not sorted");
    prev = e.t;
    e.x = Vec2(parse_number<double>(r, f[2], "x_lat"), parse_number<double>(r, f[3], "x_long"));
    e.label = parse_label(r, f[4], m);
    log.events.push_back(std::move(e));
  }
  return log;
}

EventLog read_log(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_log(in, path.string());
}

void write_log(const EventLog& log, std::ostream& out) {
  validate(log);
  out << kMagic << '\n';
  out << "agents," << log.pairs.agents() << '\n';
  out << "pairs," << log.pairs.size() << '\n';
  for (int a = 0; a < log.pairs.size(); ++a) {
    const auto& e = log.pairs.endpoints(a);
    out << "pair," << a << ',' << e.first << ',' << e.second << '\n';
  }
  out << "horizon," << format_decimal(log.horizon) << '\n';
  out << "id,t,x_lat,x_long,label\n";
  for (std::size_t k = 0; k < log.size(); ++k) {
    const Event& e = log.events[k];
    out << k << ',' << format_decimal(e.t) << ',' << format_decimal(e.x(0)) << ',' << format_decimal(e.x(1)) << ','
        << format_label(e.label) << '\n';
  }
}

void write_log(const EventLog& log, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_log(log, out);
}

GroundTruth read_truth(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  if (!r.next() || r.line() != "id,true_pair") r.fail(1, "expected header 'id,true_pair'");
  GroundTruth truth;
  while (r.next()) {
    auto f = r.fields();
    if (f.size() != 2) r.fail(1, "expected 2 fields");
    const auto id = parse_number<std::size_t>(r, f[0], "event id");
    if (!truth.events.empty() && id <= truth.events.back()) r.fail(f[0].column, "event ids must increase");
    truth.events.push_back(id);
    truth.pairs.push_back(parse_number<int>(r, f[1], "pair index"));
  }
  return truth;
}

GroundTruth read_truth(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_truth(in, path.string());
}

void write_truth(const GroundTruth& truth, std::ostream& out) {
  out << "id,true_pair\n";
  for (std::size_t i = 0; i < truth.events.size(); ++i) out << truth.events[i] << ',' << truth.pairs[i] << '\n';
}

void write_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_truth(truth, out);
}

nlohmann::json to_json(const ModelState& state) {
  nlohmann::json j;
  j["horizon"] = state.horizon;
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : state.pairs) j["pairs"].push_back({{"mu", p.mu}, {"beta", p.beta}, {"omega", p.omega}});
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : state.spatial.components) {
    comps.push_back({{"mean", {c.mean(0), c.mean(1)}},
                     {"cov", {{c.cov(0, 0), c.cov(0, 1)}, {c.cov(1, 0), c.cov(1, 1)}}}});
  }
  j["spatial"]["mode"] = state.spatial.mode == SpatialMode::PerPairGaussian ? "per_pair" : "shared_mixture";
  j["spatial"]["components"] = comps;
  if (state.spatial.mode == SpatialMode::SharedMixture) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index a = 0; a < state.spatial.weights.rows(); ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < state.spatial.weights.cols(); ++c) row.push_back(state.spatial.weights(a, c));
      w.push_back(row);
    }
    j["spatial"]["weights"] = w;
  }
  return j;
}

ModelState model_from_json(const nlohmann::json& j) {
  try {
    ModelState s;
    s.horizon = j.at("horizon").get<double>();
    for (const auto& p : j.at("pairs")) {
      s.pairs.push_back({p.at("mu").get<double>(), p.at("beta").get<double>(), p.at("omega").get<double>()});
    }
    const auto& sp = j.at("spatial");
    std::vector<GaussianComponent> comps;
    for (const auto& c : sp.at("components")) {
      GaussianComponent g;
      g.mean = Vec2(c.at("mean").at(0).get<double>(), c.at("mean").at(1).get<double>());
      for (int r = 0; r < 2; ++r) {
        for (int q = 0; q < 2; ++q) g.cov(r, q) = c.at("cov").at(r).at(q).get<double>();
      }
      comps.push_back(g);
    }
    const auto mode = sp.at("mode").get<std::string>();
    if (mode == "per_pair") {
      s.spatial = SpatialModel::per_pair(std::move(comps));
    } else if (mode == "shared_mixture") {
      const auto& w = sp.at("weights");
      Eigen::MatrixXd weights(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(comps.size()));
      for (std::size_t a = 0; a < w.size(); ++a) {
        if (w[a].size() != comps.size()) throw InputError("mixture weight row has the wrong length");
        for (std::size_t c = 0; c < comps.size(); ++c) {
          weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = w[a][c].get<double>();
        }
      }
      s.spatial = SpatialModel::shared_mixture(std::move(comps), std::move(weights));
    } else {
      throw InputError("unknown spatial mode '" + mode + "'");
    }
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model: ") + e.what());
  }
}

nlohmann::json to_json(const Responsibilities& phi) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index k = 0; k < phi.rows(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index a = 0; a < phi.cols(); ++a) row.push_back(phi(k, a));
    rows.push_back(row);
  }
  return rows;
}

Responsibilities responsibilities_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_array()) throw InputError("responsibilities must be an array of rows");
    const auto n = static_cast<Eigen::Index>(j.size());
    const auto m = n ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Responsibilities phi(n, m);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& row = j[static_cast<std::size_t>(k)];
      if (static_cast<Eigen::Index>(row.size()) != m) throw InputError("ragged responsibility matrix");
      for (Eigen::Index a = 0; a < m; ++a) phi(k, a) = row[static_cast<std::size_t>(a)].get<double>();
    }
    return phi;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed responsibilities: ") + e.what());
  }
}

void write_model(const ModelState& state, const Responsibilities* phi, const std::filesystem::path& path) {
  nlohmann::json j = to_json(state);
  if (phi) j["phi"] = to_json(*phi);
  write_text(path, j.dump(2) + "\n");
}

SavedModel read_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  SavedModel saved{model_from_json(j), std::nullopt};
  if (j.contains("phi")) saved.phi = responsibilities_from_json(j["phi"]);
  return saved;
}

void write_inference(const InferenceResult& result, std::ostream& out) {
  out << "id,estimate,probability,ranking\n";
  for (const auto& ev : result.events) {
    out << ev.event << ',' << ev.estimate() << ',' << format_decimal(ev.probability()) << ',';
    for (std::size_t i = 0; i < ev.ranking.size(); ++i) {
      if (i) out << '|';
      out << ev.ranking[i].pair << ':' << format_decimal(ev.ranking[i].probability);
    }
    out << '\n';
  }
}

InferenceResult read_inference(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  if (!r.next() || r.line() != "id,estimate,probability,ranking") {
    r.fail(1, "expected header 'id,estimate,probability,ranking'");
  }
  InferenceResult result;
  while (r.next()) {
    auto f = r.fields();
    if (f.size() != 4) r.fail(1, "expected 4 fields");
    InferredEvent ev;
    ev.event = parse_number<std::size_t>(r, f[0], "event id");
    std::size_t start = 0;
    const std::string_view text = f[3].text;
    for (;;) {
      const std::size_t bar = text.find('|', start);
      const std::size_t stop = bar == std::string_view::npos ? text.size() : bar;
      const std::string_view item = text.substr(start, stop - start);
      const std::size_t colon = item.find(':');
      if (colon == std::string_view::npos) r.fail(f[3].column + start, "ranking entries look like pair:probability");
      const Field pair{item.substr(0, colon), f[3].column + start};
      const Field prob{item.substr(colon + 1), f[3].column + start + colon + 1};
      ev.ranking.push_back({parse_number<int>(r, pair, "pair index"), parse_number<double>(r, prob, "probability")});
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
    if (ev.estimate() != parse_number<int>(r, f[1], "pair index")) r.fail(f[1].column, "estimate differs from ranking");
    result.events.push_back(std::move(ev));
  }
  return result;
}

InferenceResult read_inference(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_inference(in, path.string());
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace lppm
