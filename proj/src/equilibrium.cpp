#include "hetroute/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hetroute/solver.hpp"

namespace hetroute {

void EquilibriumConfig::validate() const {
  if (!(eps > 0.0)) throw InvalidArgument("equilibrium tolerance must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) throw InvalidArgument("damping must lie in (0, 1]");
  if (max_rounds < 1) throw InvalidArgument("round cap must be positive");
  if (stall_window < 1) throw InvalidArgument("stall window must be positive");
}

double wardrop_violation(const NetworkInstance& inst, const TollMatrix& tolls, const FlowProfile& f,
                         double threshold) {
  const CostMatrix c = experienced_costs(inst, tolls, f);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    const double best = c.col(j).minCoeff();
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      if (f(i, j) > threshold) worst = std::max(worst, c(i, j) - best);
  }
  return worst;
}

double weighted_gap(const NetworkInstance& inst, const TollMatrix& tolls, const FlowProfile& f) {
  const CostMatrix c = experienced_costs(inst, tolls, f);
  double gap = 0.0;
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    gap += f.col(j).dot((c.col(j).array() - c.col(j).minCoeff()).matrix());
  return gap;
}

Eigen::VectorXd best_response(const NetworkInstance& inst, const TollMatrix& tolls,
                              const FlowProfile& f, std::size_t type) {
  if (type >= inst.num_types()) throw InvalidIndex("type index " + std::to_string(type) + " out of range");
  const auto j = static_cast<Eigen::Index>(type);
  const CostMatrix c = experienced_costs(inst, tolls, f);
  const double best = c.col(j).minCoeff();
  const double tie = 1e-12 * (1.0 + std::abs(best));
  const Eigen::Array<bool, Eigen::Dynamic, 1> cheapest = c.col(j).array() <= best + tie;
  const auto count = static_cast<double>(cheapest.count());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(f.rows());
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    if (cheapest(i)) out(i) = inst.demand()(j) / count;
  return out;
}

Eigen::VectorXd type_equilibrium_response(const NetworkInstance& inst, const TollMatrix& tolls,
                                          const FlowProfile& f, std::size_t type) {
  if (type >= inst.num_types()) throw InvalidIndex("type index " + std::to_string(type) + " out of range");
  check_shape(inst, f);
  const auto j = static_cast<Eigen::Index>(type);
  const auto n = f.rows();
  const Eigen::VectorXd slope = inst.slopes().col(j);
  // Cost of road i for type j when it carries x of type j: base_i + slope_i x.
  const Eigen::VectorXd base =
      experienced_costs(inst, tolls, f).col(j) - slope.cwiseProduct(f.col(j));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return base(x) < base(y); });

  // Fill the k cheapest roads to a common level lambda:
  // sum_{used} (lambda - base_i) / slope_i = demand.
  const double demand = inst.demand()(j);
  double inv_sum = 0.0;
  double weighted = 0.0;
  double level = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Eigen::Index i = order[k];
    inv_sum += 1.0 / slope(i);
    weighted += base(i) / slope(i);
    level = (demand + weighted) / inv_sum;
    if (k + 1 == order.size() || level <= base(order[k + 1])) break;
  }
  Eigen::VectorXd out = ((level - base.array()) / slope.array()).cwiseMax(0.0).matrix();
  const double s = out.sum();
  if (s > 0.0) out *= demand / s;
  return out;
}

EquilibriumReport compute_equilibrium(const NetworkInstance& inst, const TollMatrix& tolls,
                                      const EquilibriumConfig& cfg,
                                      const std::optional<FlowProfile>& start) {
  cfg.validate();
  check_shape(inst, tolls.tolls);
  if (tolls.tolls.size() > 0 && tolls.tolls.minCoeff() < 0.0)
    throw InvalidArgument("tolls must be nonnegative");
  FlowProfile f = start ? *start : uniform_flow(inst);
  check_shape(inst, f);
  if (!check_feasible(inst, f).feasible)
    throw InvalidArgument("equilibrium start is not a feasible flow");

  EquilibriumReport rep;
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t last_progress = 0;
  std::size_t round = 0;
  for (;; ++round) {
    const double violation = wardrop_violation(inst, tolls, f, cfg.support_threshold);
    const double gap = weighted_gap(inst, tolls, f);
    // The gap term also drains sub-threshold flow left on expensive roads.
    if (violation <= cfg.eps && gap <= cfg.eps * inst.total_demand()) {
      rep.converged = true;
      rep.status = "converged";
      break;
    }
    if (round >= cfg.max_rounds) {
      rep.status = "max-rounds";
      break;
    }
    if (gap < best_gap * (1.0 - 1e-3)) {
      best_gap = gap;
      last_progress = round;
    } else if (round - last_progress > cfg.stall_window) {
      rep.status = "stalled";
      break;
    }
    for (std::size_t j = 0; j < inst.num_types(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd target = type_equilibrium_response(inst, tolls, f, j);
      f.col(col) = (1.0 - cfg.damping) * f.col(col) + cfg.damping * target;
    }
  }
  rep.rounds = round;
  rep.eps_violation = wardrop_violation(inst, tolls, f, cfg.support_threshold);
  rep.costs = experienced_costs(inst, tolls, f);
  rep.social_cost = social_cost(inst, f);
  rep.flow = std::move(f);
  return rep;
}

ProbeReport uniqueness_probe(const NetworkInstance& inst, const TollMatrix& tolls,
                             const FlowProfile& f_ref, const EquilibriumConfig& cfg,
                             bool start_at_reference) {
  cfg.validate();
  check_shape(inst, f_ref);
  ProbeReport rep;
  rep.worst_social_cost = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cfg.starts; ++k) {
    FlowProfile start;
    if (start_at_reference && k == 0) {
      start = f_ref;
    } else {
      std::mt19937_64 rng(stream_seed(cfg.seed, k));
      start = random_feasible_flow(inst, rng);
    }
    const EquilibriumReport eq = compute_equilibrium(inst, tolls, cfg, start);
    ProbeRun run{(eq.flow - f_ref).norm(), eq.eps_violation, eq.social_cost, eq.rounds,
                 eq.converged, eq.status};
    if (run.converged) {
      rep.max_distance = std::max(rep.max_distance, run.distance);
      rep.worst_social_cost = std::max(rep.worst_social_cost, run.social_cost);
    } else {
      ++rep.non_converged;
    }
    rep.runs.push_back(std::move(run));
  }
  if (rep.non_converged == rep.runs.size()) rep.worst_social_cost = 0.0;
  return rep;
}

}  // namespace hetroute
