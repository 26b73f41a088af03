#pragma once

// Road/type support graphs and the cost-preserving cycle-breaking procedure.
//
// Shifting flow around a support cycle (type k from road k to road k+1) keeps
// every type's demand, has zero curvature under the social cost, and at a
// stationary point zero slope as well. Stepping until an entry hits zero
// removes at least one edge and adds none.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hetroute/model.hpp"

namespace hetroute {

inline constexpr double kSupportThreshold = 1e-7;

class SupportGraph {
 public:
  SupportGraph(std::size_t roads, std::size_t types);

  std::size_t num_roads() const { return roads_; }
  std::size_t num_types() const { return types_; }

  void add_edge(std::size_t road, std::size_t type);
  bool has_edge(std::size_t road, std::size_t type) const;
  std::size_t edge_count() const;

  std::vector<std::size_t> types_on(std::size_t road) const;
  std::vector<std::size_t> roads_of(std::size_t type) const;

 private:
  std::size_t roads_;
  std::size_t types_;
  std::vector<char> adj_;  // row-major roads x types
};

// Edge (i, j) iff f(i, j) > threshold.
SupportGraph build_support_graph(const FlowProfile& f, double threshold = kSupportThreshold);

// Simple cycle road_0 - type_0 - road_1 - type_1 - ... - road_{r-1} - type_{r-1} - road_0.
// Type k is incident to roads k and k+1 (mod r).
struct Cycle {
  std::vector<std::size_t> roads;
  std::vector<std::size_t> types;

  std::size_t length() const { return roads.size(); }
  bool operator==(const Cycle&) const = default;
};

// Throws InvalidArgument unless the cycle is simple, has r >= 2, and (when a
// graph is given) uses only its edges.
void validate_cycle(const Cycle& c, std::size_t roads, std::size_t types);
void validate_cycle(const Cycle& c, const SupportGraph& g);

// Rotates the cycle to start at its smallest road and orients it so the
// smaller of that road's two cycle types comes first.
Cycle canonical(Cycle c);

// Depth-first search; returns the first cycle discovered, canonicalized.
std::optional<Cycle> find_cycle(const SupportGraph& g);

// Entries in {-1, 0, +1}: type k leaves road k and joins road k+1.
Eigen::MatrixXd cycle_direction(const Cycle& c, std::size_t roads, std::size_t types);

// Largest step keeping f + alpha d nonnegative. Throws StageError when the
// step is not positive.
double max_step(const FlowProfile& f, const Eigen::MatrixXd& d);

// True when no two types both have flow above threshold on two common roads.
bool types_share_at_most_one_road(const SupportGraph& g);

struct BreakStep {
  Cycle cycle;
  double alpha = 0.0;
  double cost_change = 0.0;
  std::size_t edges_before = 0;
  std::size_t edges_after = 0;
};

struct CycleBreakResult {
  FlowProfile flow;
  std::vector<BreakStep> trace;
};

class CostDriftError : public StageError {
 public:
  explicit CostDriftError(const std::string& what) : StageError("break_cycles", what) {}
};

// Tolerance on |J(f + alpha d) - J(f)| per break step, relative to 1 + |J|.
inline constexpr double kBreakCostTol = 1e-8;

// Repeatedly breaks support cycles of a feasible, stationary routing. Entries
// at or below the threshold are zeroed first and each type is rescaled to its
// demand.
CycleBreakResult break_cycles(const NetworkInstance& inst, const FlowProfile& f,
                              double threshold = kSupportThreshold);

}  // namespace hetroute
