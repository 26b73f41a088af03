#pragma once

// Social-optimum search over the product of scaled simplices.
//
// The social cost is quadratic with Hessian blocks a 1^T + 1 a^T, which are
// indefinite whenever a road's slopes differ across types, so a single local
// descent is not enough. The solver runs projected-gradient descent from many
// random feasible starts and finishes each run with an active-face KKT solve.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hetroute/model.hpp"

namespace hetroute {

enum class StepRule { kBacktracking, kFixed };

struct SolverConfig {
  std::size_t starts = 32;
  std::size_t max_iters = 20000;
  StepRule step_rule = StepRule::kBacktracking;
  double fixed_step = 0.05;       // used by StepRule::kFixed
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double tol_grad = 1e-8;
  std::uint64_t seed = 0;
  bool record_trace = false;

  void validate() const;
};

struct OptimizationResult {
  FlowProfile flow;
  double cost = 0.0;
  double stationarity_residual = 0.0;
  std::size_t start_index = 0;
  std::size_t iterations = 0;
  std::vector<double> cost_trace;  // accepted iterates of the winning start
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, OptimizationResult best)
      : Error(what), best_(std::move(best)) {}
  const OptimizationResult& best() const noexcept { return best_; }

 private:
  OptimizationResult best_;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

// Euclidean projection onto {x >= 0, sum x = total}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double total);

// Projects every type column onto its demand simplex.
FlowProfile project_to_feasible(const NetworkInstance& inst, const FlowProfile& f);

// ||f - P(f - grad J(f))||_F: zero exactly at first-order stationary points.
double stationarity_residual(const NetworkInstance& inst, const FlowProfile& f);

// Uniform sample from the feasible set (exponential spacings per type).
FlowProfile random_feasible_flow(const NetworkInstance& inst, std::mt19937_64& rng);

// Deterministic generator for start k of a run seeded with `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::size_t index);

OptimizationResult solve_social_optimum(const NetworkInstance& inst, const SolverConfig& cfg = {});

// Single projected-gradient run from a given feasible start.
OptimizationResult descend_from(const NetworkInstance& inst, const FlowProfile& start,
                                const SolverConfig& cfg);

// Exhaustive search over per-type splits on the grid {0, h, 2h, ...}; the last
// road takes the remainder of each type's demand. Refuses more than 1e8
// candidates.
OptimizationResult brute_force_optimum(const NetworkInstance& inst, double grid_step);

// Number of grid candidates brute_force_optimum would evaluate.
double brute_force_candidates(const NetworkInstance& inst, double grid_step);

inline constexpr double kMaxBruteForceCandidates = 1e8;

}  // namespace hetroute
