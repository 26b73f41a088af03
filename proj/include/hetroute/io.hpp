#pragma once

// JSON interchange: instances, scenarios and run reports.
//
// Instance document:
//   {"name": "...", "roads": [{"a": [a_i1, ..., a_im], "b": b_i}, ...],
//    "demands": [d_1, ..., d_m]}
// A scenario is an instance document (inline under "instance", or a path in
// "instance_file" relative to the scenario) plus "mode", "toll_scheme",
// optional "anonymous_tolls", "sweep": {"field", "values"} and run settings.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hetroute/experiments.hpp"
#include "hetroute/model.hpp"

namespace hetroute {

using nlohmann::json;

// Malformed input. line/column are 1-based and zero when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Parses text, mapping syntax errors to line/column diagnostics.
json parse_json_text(const std::string& text, const std::string& source);
json read_json_file(const std::filesystem::path& path);

NetworkInstance instance_from_json(const json& doc, const std::string& source = "<instance>");
json instance_to_json(const NetworkInstance& inst);
NetworkInstance load_instance(const std::filesystem::path& path);

Scenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir,
                            const std::string& source = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);

// Scenario with default options wrapping a bare instance.
Scenario scenario_for_instance(NetworkInstance inst, Mode mode, TollScheme scheme);

json matrix_to_json(const Eigen::MatrixXd& m);
json options_to_json(const RunOptions& o);
json scenario_to_json(const Scenario& s);
json report_to_json(const Scenario& s, const RunReport& r);
json sweep_to_json(const Scenario& s, const std::vector<SweepRow>& rows);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::string report_to_text(const Scenario& s, const RunReport& r);
std::string sweep_to_text(const Scenario& s, const std::vector<SweepRow>& rows);

}  // namespace hetroute
