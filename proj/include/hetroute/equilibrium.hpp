#pragma once

// Wardrop equilibria of the tolled game: every vehicle type uses only roads of
// minimal experienced cost (latency plus that type's toll).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hetroute/cycles.hpp"
#include "hetroute/model.hpp"
#include "hetroute/tolling.hpp"

namespace hetroute {

struct EquilibriumConfig {
  std::size_t starts = 100;
  std::size_t max_rounds = 20000;
  double damping = 0.3;
  double eps = 1e-6;
  std::uint64_t seed = 0;
  std::size_t stall_window = 200;  // rounds without progress before giving up
  double support_threshold = kSupportThreshold;

  void validate() const;
};

struct EquilibriumReport {
  FlowProfile flow;
  CostMatrix costs;
  double eps_violation = 0.0;
  bool converged = false;
  double social_cost = 0.0;
  std::size_t rounds = 0;
  std::string status;  // "converged", "max-rounds" or "stalled"
  std::optional<double> distance_to_reference;
};

// Largest gap c_ij - min_i' c_i'j over entries with f_ij above the threshold.
double wardrop_violation(const NetworkInstance& inst, const TollMatrix& tolls, const FlowProfile& f,
                         double threshold = kSupportThreshold);

// Flow-weighted gap sum_ij f_ij (c_ij - min_i' c_i'j); zero exactly at equilibria.
double weighted_gap(const NetworkInstance& inst, const TollMatrix& tolls, const FlowProfile& f);

// Moves all of type j onto its currently cheapest road(s), splitting ties
// evenly, with the other types held fixed. Returns the new column j.
Eigen::VectorXd best_response(const NetworkInstance& inst, const TollMatrix& tolls,
                              const FlowProfile& f, std::size_t type);

// Equilibrium split of type j alone with the other types held fixed: the
// water-filling solution of l_i + tau_ij = lambda on the used roads.
Eigen::VectorXd type_equilibrium_response(const NetworkInstance& inst, const TollMatrix& tolls,
                                          const FlowProfile& f, std::size_t type);

// Damped round-robin type responses from `start` (uniform split when absent).
// Converged means wardrop_violation <= eps and weighted_gap <= eps * total demand.
EquilibriumReport compute_equilibrium(const NetworkInstance& inst, const TollMatrix& tolls,
                                      const EquilibriumConfig& cfg,
                                      const std::optional<FlowProfile>& start = std::nullopt);

struct ProbeRun {
  double distance = 0.0;
  double eps_violation = 0.0;
  double social_cost = 0.0;
  std::size_t rounds = 0;
  bool converged = false;
  std::string status;
};

struct ProbeReport {
  std::vector<ProbeRun> runs;
  double max_distance = 0.0;  // over converged runs
  std::size_t non_converged = 0;
  double worst_social_cost = 0.0;  // over converged runs
};

// Runs compute_equilibrium from cfg.starts random feasible flows and reports
// the Frobenius distance of each result to f_ref. With start_at_reference the
// first start is f_ref itself.
ProbeReport uniqueness_probe(const NetworkInstance& inst, const TollMatrix& tolls,
                             const FlowProfile& f_ref, const EquilibriumConfig& cfg,
                             bool start_at_reference = false);

}  // namespace hetroute
