#pragma once

#include <cstddef>
#include <string>

#include "hetroute/cycles.hpp"
#include "hetroute/model.hpp"

namespace hetroute {

enum class TollScheme { kPaper, kAnonymous, kMarginal, kNone };

std::string to_string(TollScheme s);
TollScheme toll_scheme_from_string(const std::string& s);

struct TollMatrix {
  Eigen::MatrixXd tolls;  // n x m, latency-equivalent units
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> blocked;  // entries priced at P
  TollScheme scheme = TollScheme::kNone;

  static TollMatrix zero(std::size_t roads, std::size_t types);
};

struct TollConstants {
  double mu = 0.0;     // common cost level on every used (road, type) pair
  double big_p = 0.0;  // prohibitive toll on unused pairs
};

// mu = largest latency over roads carrying flow at f_star. P exceeds
// mu + b_i + max_j a_ij * (total demand) on every road, which bounds any
// tolled cost of a non-blocked entry at any feasible flow.
TollConstants choose_constants(const NetworkInstance& inst, const FlowProfile& f_star,
                               double threshold = kSupportThreshold);

// Type-differentiated tolls built from an acyclic routing: mu - l_i(f*) on the
// roads type j uses, P elsewhere.
TollMatrix synthesize_tolls(const NetworkInstance& inst, const FlowProfile& f_star,
                            const TollConstants& consts, double threshold = kSupportThreshold);

// One toll per road, shared by every type.
TollMatrix anonymous_tolls(const NetworkInstance& inst, const Eigen::VectorXd& per_road);

// c_ij = l_i(f) + t_i for every type.
CostMatrix anonymous_toll_costs(const NetworkInstance& inst, const Eigen::VectorXd& per_road,
                                const FlowProfile& f);

// Per-type externality under affine latencies: a_ij * (total flow on road i),
// i.e. dJ/df_ij - l_i(f).
TollMatrix marginal_cost_tolls(const NetworkInstance& inst, const FlowProfile& f);

// c_ij = l_i(f) + tau_ij.
CostMatrix experienced_costs(const NetworkInstance& inst, const TollMatrix& tolls,
                             const FlowProfile& f);

}  // namespace hetroute
