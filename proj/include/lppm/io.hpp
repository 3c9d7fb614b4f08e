#pragma once

// Text formats: event logs (header + CSV body), ground-truth sidecars,
// model JSON and result CSVs.
//
// Event log layout:
//   # lppm-events v1
//   agents,<N>
//   pairs,<M>
//   pair,<index>,<i>,<j>        (M lines, index ascending)
//   horizon,<T>
//   id,t,x_lat,x_long,label
//   <id>,<t>,<x_lat>,<x_long>,<label>
// where label is a pair index, a candidate list "3|7|9", or "?".

#include "lppm/errors.hpp"
#include "lppm/label_inference.hpp"
#include "lppm/types.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace lppm {

class ParseError : public InputError {
 public:
  ParseError(std::string source, std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Shortest fixed-notation text that parses back to exactly `v`, with at
/// least six fractional digits.
std::string format_decimal(double v);

EventLog read_log(std::istream& in, const std::string& source = "<stream>");
EventLog read_log(const std::filesystem::path& path);
void write_log(const EventLog& log, std::ostream& out);
void write_log(const EventLog& log, const std::filesystem::path& path);

/// Sidecar with the true pairs of masked events: "id,true_pair".
GroundTruth read_truth(std::istream& in, const std::string& source = "<stream>");
GroundTruth read_truth(const std::filesystem::path& path);
void write_truth(const GroundTruth& truth, std::ostream& out);
void write_truth(const GroundTruth& truth, const std::filesystem::path& path);

nlohmann::json to_json(const ModelState& state);
ModelState model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Responsibilities& phi);
Responsibilities responsibilities_from_json(const nlohmann::json& j);

struct SavedModel {
  ModelState state;
  std::optional<Responsibilities> phi;
};

void write_model(const ModelState& state, const Responsibilities* phi, const std::filesystem::path& path);
SavedModel read_model(const std::filesystem::path& path);

/// "id,estimate,probability,ranking" with ranking "pair:prob|pair:prob|...".
void write_inference(const InferenceResult& result, std::ostream& out);
InferenceResult read_inference(std::istream& in, const std::string& source = "<stream>");
InferenceResult read_inference(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lppm
