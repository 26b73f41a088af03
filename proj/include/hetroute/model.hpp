#pragma once

// Parallel-road congestion game with heterogeneous vehicle types.
//
// Road i has latency l_i(f) = b_i + sum_j a_ij f_ij, where f_ij is the flow of
// vehicle type j on road i. Flows are stored as dense n x m matrices (rows are
// roads, columns are types). When a flat vector is needed the row-major order
// [f_11, f_12, ..., f_1m, f_21, ..., f_nm] is used.

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "hetroute/errors.hpp"

namespace hetroute {

using FlowProfile = Eigen::MatrixXd;  // n x m, f(i, j) >= 0
using CostMatrix = Eigen::MatrixXd;   // n x m, latency + toll

inline constexpr double kFeasibilityTol = 1e-9;

class NetworkInstance {
 public:
  // Throws InvalidInstance unless every slope and demand is strictly positive
  // and every free-flow latency is nonnegative.
  NetworkInstance(Eigen::MatrixXd slopes, Eigen::VectorXd free_flow,
                  Eigen::VectorXd demand, std::string name = {});

  std::size_t num_roads() const { return static_cast<std::size_t>(slopes_.rows()); }
  std::size_t num_types() const { return static_cast<std::size_t>(slopes_.cols()); }

  const Eigen::MatrixXd& slopes() const { return slopes_; }
  const Eigen::VectorXd& free_flow() const { return free_flow_; }
  const Eigen::VectorXd& demand() const { return demand_; }
  const std::string& name() const { return name_; }

  double slope(std::size_t road, std::size_t type) const;
  double total_demand() const { return demand_.sum(); }

 private:
  Eigen::MatrixXd slopes_;
  Eigen::VectorXd free_flow_;
  Eigen::VectorXd demand_;
  std::string name_;
};

// Throws DimensionMismatch unless f is n x m.
void check_shape(const NetworkInstance& inst, const FlowProfile& f);

double latency(const NetworkInstance& inst, const FlowProfile& f, std::size_t road);

// Vector of all road latencies.
Eigen::VectorXd latencies(const NetworkInstance& inst, const FlowProfile& f);

// Total latency experienced: sum_i l_i(f) * (sum_j f_ij).
double social_cost(const NetworkInstance& inst, const FlowProfile& f);

// Gradient in matrix form: entry (i, j) = l_i(f) + a_ij * sum_j' f_ij'.
Eigen::MatrixXd social_cost_gradient(const NetworkInstance& inst, const FlowProfile& f);

// Second partials with respect to the flows on one road:
// H_i(j, j') = a_ij + a_ij'. Partials across different roads vanish.
Eigen::MatrixXd hessian_block(const NetworkInstance& inst, std::size_t road);

// Full (n*m) x (n*m) block-diagonal Hessian in row-major flow order.
Eigen::MatrixXd hessian(const NetworkInstance& inst);

// Row-major flattening, matching the block layout of hessian().
Eigen::VectorXd vectorize(const Eigen::MatrixXd& m);

struct FeasibilityVerdict {
  bool feasible = false;
  double worst_negativity = 0.0;    // max(0, -min f_ij)
  double worst_conservation = 0.0;  // max_j |sum_i f_ij - demand_j|
};

FeasibilityVerdict check_feasible(const NetworkInstance& inst, const FlowProfile& f,
                                  double tol = kFeasibilityTol);

// Clamps tiny negatives to zero and rescales every type column to its demand.
// Only applied when a caller asks for it.
FlowProfile renormalize(const NetworkInstance& inst, const FlowProfile& f);

// Every type split evenly over all roads.
FlowProfile uniform_flow(const NetworkInstance& inst);

// Compares the analytic Hessian blocks with second partials of social_cost
// obtained by polarization of the quadratic at a fixed point. Returns the
// largest absolute disagreement.
double hessian_self_check(const NetworkInstance& inst);

}  // namespace hetroute
