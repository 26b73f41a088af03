#include "hetroute/tolling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hetroute {

std::string to_string(TollScheme s) {
  switch (s) {
    case TollScheme::kPaper: return "paper";
    case TollScheme::kAnonymous: return "anonymous";
    case TollScheme::kMarginal: return "marginal";
    case TollScheme::kNone: return "none";
  }
  return "none";
}

TollScheme toll_scheme_from_string(const std::string& s) {
  if (s == "paper") return TollScheme::kPaper;
  if (s == "anonymous") return TollScheme::kAnonymous;
  if (s == "marginal") return TollScheme::kMarginal;
  if (s == "none") return TollScheme::kNone;
  throw InvalidArgument("unknown toll scheme '" + s + "'");
}

TollMatrix TollMatrix::zero(std::size_t roads, std::size_t types) {
  const auto n = static_cast<Eigen::Index>(roads);
  const auto m = static_cast<Eigen::Index>(types);
  return {Eigen::MatrixXd::Zero(n, m),
          Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, m, false),
          TollScheme::kNone};
}

TollConstants choose_constants(const NetworkInstance& inst, const FlowProfile& f_star,
                               double threshold) {
  check_shape(inst, f_star);
  const Eigen::VectorXd lat = latencies(inst, f_star);
  double mu = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < f_star.rows(); ++i)
    if ((f_star.row(i).array() > threshold).any()) mu = std::max(mu, lat(i));
  if (!std::isfinite(mu)) throw StageError("choose_constants", "routing carries no flow");

  const double total = inst.total_demand();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < f_star.rows(); ++i)
    worst = std::max(worst, inst.free_flow()(i) + inst.slopes().row(i).maxCoeff() * total);
  return {mu, mu + worst + 1.0};
}

TollMatrix synthesize_tolls(const NetworkInstance& inst, const FlowProfile& f_star,
                            const TollConstants& consts, double threshold) {
  check_shape(inst, f_star);
  const SupportGraph g = build_support_graph(f_star, threshold);
  if (find_cycle(g))
    throw StageError("synthesize_tolls", "routing support graph has a cycle; break cycles first");
  const Eigen::VectorXd lat = latencies(inst, f_star);
  // Small slack so a mu equal to the largest used latency up to rounding passes.
  const double slack = 1e-12 * (1.0 + std::abs(consts.mu));
  TollMatrix t = TollMatrix::zero(inst.num_roads(), inst.num_types());
  t.scheme = TollScheme::kPaper;
  for (Eigen::Index i = 0; i < f_star.rows(); ++i) {
    for (Eigen::Index j = 0; j < f_star.cols(); ++j) {
      if (g.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
        const double toll = consts.mu - lat(i);
        if (toll < -slack)
          throw StageError("synthesize_tolls", "mu is below the latency of a used road");
        t.tolls(i, j) = std::max(0.0, toll);
      } else {
        t.tolls(i, j) = consts.big_p;
        t.blocked(i, j) = true;
      }
    }
  }
  return t;
}

TollMatrix anonymous_tolls(const NetworkInstance& inst, const Eigen::VectorXd& per_road) {
  if (static_cast<std::size_t>(per_road.size()) != inst.num_roads())
    throw DimensionMismatch("anonymous toll vector needs one entry per road");
  if (per_road.size() > 0 && per_road.minCoeff() < 0.0)
    throw InvalidArgument("anonymous tolls must be nonnegative");
  TollMatrix t = TollMatrix::zero(inst.num_roads(), inst.num_types());
  t.scheme = TollScheme::kAnonymous;
  t.tolls.colwise() = per_road;
  return t;
}

CostMatrix anonymous_toll_costs(const NetworkInstance& inst, const Eigen::VectorXd& per_road,
                                const FlowProfile& f) {
  return experienced_costs(inst, anonymous_tolls(inst, per_road), f);
}

TollMatrix marginal_cost_tolls(const NetworkInstance& inst, const FlowProfile& f) {
  check_shape(inst, f);
  TollMatrix t = TollMatrix::zero(inst.num_roads(), inst.num_types());
  t.scheme = TollScheme::kMarginal;
  const Eigen::VectorXd load = f.rowwise().sum();
  t.tolls = inst.slopes().array().colwise() * load.array();
  return t;
}

CostMatrix experienced_costs(const NetworkInstance& inst, const TollMatrix& tolls,
                             const FlowProfile& f) {
  check_shape(inst, f);
  check_shape(inst, tolls.tolls);
  CostMatrix c = tolls.tolls;
  c.colwise() += latencies(inst, f);
  return c;
}

}  // namespace hetroute
