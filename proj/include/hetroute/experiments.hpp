#pragma once

// End-to-end runs: optimum -> acyclic optimum -> tolls -> equilibria, and
// efficiency-ratio sweeps over one instance parameter.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hetroute/cycles.hpp"
#include "hetroute/equilibrium.hpp"
#include "hetroute/model.hpp"
#include "hetroute/solver.hpp"
#include "hetroute/tolling.hpp"

namespace hetroute {

enum class Mode { kOptimum, kPipeline, kEquilibrium, kPoaStudy };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

// One numeric instance field: "roads[i].a[j]", "roads[i].b", "demands[j]" or
// "anonymous_tolls[i]".
struct FieldPath {
  enum class Kind { kSlope, kFreeFlow, kDemand, kAnonymousToll };
  Kind kind = Kind::kSlope;
  std::size_t first = 0;
  std::size_t second = 0;
  std::string text;

  static FieldPath parse(const std::string& text);
};

struct Sweep {
  FieldPath field;
  std::vector<double> values;
};

struct RunOptions {
  SolverConfig solver;
  EquilibriumConfig equilibrium;
  double support_threshold = kSupportThreshold;
  bool oracle = false;
  double oracle_grid = 0.02;
};

struct Scenario {
  std::string name;
  NetworkInstance instance;
  Mode mode = Mode::kPipeline;
  TollScheme toll_scheme = TollScheme::kPaper;
  std::optional<Eigen::VectorXd> anonymous_tolls;  // per road; zeros when absent
  std::optional<Sweep> sweep;
  RunOptions options;

  // Throws InvalidArgument on inconsistent combinations (e.g. a sweep outside
  // poa-study mode).
  void validate() const;
};

// Applies `value` to the field in a copy of the scenario.
Scenario with_field(const Scenario& s, const FieldPath& field, double value);

struct OracleCheck {
  double grid_step = 0.0;
  double grid_cost = 0.0;
  bool certified = false;   // final optimum no worse than the best grid point
  bool refined = false;     // the grid point seeded a better local descent
};

struct RunReport {
  std::string status = "ok";  // "ok", "stage-failure" or "non-converged"
  std::string failed_stage;
  std::string message;

  std::optional<OptimizationResult> optimum;
  std::optional<OracleCheck> oracle;
  std::optional<CycleBreakResult> acyclic;
  std::optional<double> acyclic_cost;
  std::optional<TollConstants> constants;
  std::optional<TollMatrix> tolls;
  std::optional<EquilibriumReport> equilibrium;
  std::optional<ProbeReport> probe;
  std::optional<double> ratio;        // J(equilibrium) / J(optimum)
  std::optional<double> worst_ratio;  // worst converged probe run
};

struct SweepRow {
  std::size_t index = 0;
  double value = 0.0;
  RunReport report;
};

// Ratio rows below 1 - kRatioSlack with a certified optimum are rejected.
inline constexpr double kRatioSlack = 1e-6;
// Largest probe distance to the optimum accepted under the synthesized tolls.
inline constexpr double kUniquenessTol = 1e-4;

RunReport run_pipeline(const Scenario& scenario);
// Optimum, acyclic optimum and the scenario's tolls; no equilibrium stage.
RunReport run_tolls(const Scenario& scenario);
std::vector<SweepRow> run_poa_study(const Scenario& scenario);

// 0 success, 3 stage failure, 4 non-convergence.
int exit_code(const RunReport& r);
int exit_code(const std::vector<SweepRow>& rows);

}  // namespace hetroute
