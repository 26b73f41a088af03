#include "hetroute/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace hetroute {

NetworkInstance::NetworkInstance(Eigen::MatrixXd slopes, Eigen::VectorXd free_flow,
                                 Eigen::VectorXd demand, std::string name)
    : slopes_(std::move(slopes)),
      free_flow_(std::move(free_flow)),
      demand_(std::move(demand)),
      name_(std::move(name)) {
  if (slopes_.rows() < 1 || slopes_.cols() < 1)
    throw InvalidInstance("instance needs at least one road and one vehicle type");
  if (free_flow_.size() != slopes_.rows())
    throw InvalidInstance("free-flow latency count does not match road count");
  if (demand_.size() != slopes_.cols())
    throw InvalidInstance("demand count does not match vehicle type count");
  for (Eigen::Index i = 0; i < slopes_.rows(); ++i) {
    if (!(free_flow_(i) >= 0.0) || !std::isfinite(free_flow_(i)))
      throw InvalidInstance("free-flow latency of road " + std::to_string(i) +
                            " must be finite and nonnegative");
    for (Eigen::Index j = 0; j < slopes_.cols(); ++j)
      if (!(slopes_(i, j) > 0.0) || !std::isfinite(slopes_(i, j)))
        throw InvalidInstance("slope a[" + std::to_string(i) + "][" + std::to_string(j) +
                              "] must be finite and strictly positive");
  }
  for (Eigen::Index j = 0; j < demand_.size(); ++j)
    if (!(demand_(j) > 0.0) || !std::isfinite(demand_(j)))
      throw InvalidInstance("demand of type " + std::to_string(j) +
                            " must be finite and strictly positive");
}

double NetworkInstance::slope(std::size_t road, std::size_t type) const {
  if (road >= num_roads()) throw InvalidIndex("road index " + std::to_string(road) + " out of range");
  if (type >= num_types()) throw InvalidIndex("type index " + std::to_string(type) + " out of range");
  return slopes_(static_cast<Eigen::Index>(road), static_cast<Eigen::Index>(type));
}

void check_shape(const NetworkInstance& inst, const FlowProfile& f) {
  if (static_cast<std::size_t>(f.rows()) != inst.num_roads() ||
      static_cast<std::size_t>(f.cols()) != inst.num_types())
    throw DimensionMismatch("flow is " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                            ", instance expects " + std::to_string(inst.num_roads()) + "x" +
                            std::to_string(inst.num_types()));
}

double latency(const NetworkInstance& inst, const FlowProfile& f, std::size_t road) {
  if (road >= inst.num_roads()) throw InvalidIndex("road index " + std::to_string(road) + " out of range");
  check_shape(inst, f);
  const auto i = static_cast<Eigen::Index>(road);
  return inst.free_flow()(i) + inst.slopes().row(i).dot(f.row(i));
}

Eigen::VectorXd latencies(const NetworkInstance& inst, const FlowProfile& f) {
  check_shape(inst, f);
  return inst.free_flow() + inst.slopes().cwiseProduct(f).rowwise().sum();
}

double social_cost(const NetworkInstance& inst, const FlowProfile& f) {
  return latencies(inst, f).dot(f.rowwise().sum());
}

Eigen::MatrixXd social_cost_gradient(const NetworkInstance& inst, const FlowProfile& f) {
  const Eigen::VectorXd lat = latencies(inst, f);
  const Eigen::VectorXd load = f.rowwise().sum();
  Eigen::MatrixXd g = inst.slopes().array().colwise() * load.array();
  g.colwise() += lat;
  return g;
}

Eigen::MatrixXd hessian_block(const NetworkInstance& inst, std::size_t road) {
  if (road >= inst.num_roads()) throw InvalidIndex("road index " + std::to_string(road) + " out of range");
  const Eigen::VectorXd a = inst.slopes().row(static_cast<Eigen::Index>(road)).transpose();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(a.size());
  return a * ones.transpose() + ones * a.transpose();
}

Eigen::MatrixXd hessian(const NetworkInstance& inst) {
  const auto n = static_cast<Eigen::Index>(inst.num_roads());
  const auto m = static_cast<Eigen::Index>(inst.num_types());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n * m, n * m);
  for (Eigen::Index i = 0; i < n; ++i)
    h.block(i * m, i * m, m, m) = hessian_block(inst, static_cast<std::size_t>(i));
  return h;
}

Eigen::VectorXd vectorize(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(k++) = m(i, j);
  return v;
}

FeasibilityVerdict check_feasible(const NetworkInstance& inst, const FlowProfile& f, double tol) {
  FeasibilityVerdict v;
  if (static_cast<std::size_t>(f.rows()) != inst.num_roads() ||
      static_cast<std::size_t>(f.cols()) != inst.num_types()) {
    v.worst_negativity = std::numeric_limits<double>::infinity();
    v.worst_conservation = std::numeric_limits<double>::infinity();
    return v;
  }
  v.worst_negativity = std::max(0.0, -f.minCoeff());
  v.worst_conservation = (f.colwise().sum().transpose() - inst.demand()).cwiseAbs().maxCoeff();
  v.feasible = v.worst_negativity <= tol && v.worst_conservation <= tol;
  return v;
}

FlowProfile renormalize(const NetworkInstance& inst, const FlowProfile& f) {
  check_shape(inst, f);
  FlowProfile g = f.cwiseMax(0.0);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    const double s = g.col(j).sum();
    if (s > 0.0)
      g.col(j) *= inst.demand()(j) / s;
    else
      g.col(j).setConstant(inst.demand()(j) / static_cast<double>(g.rows()));
  }
  return g;
}

FlowProfile uniform_flow(const NetworkInstance& inst) {
  const auto n = static_cast<Eigen::Index>(inst.num_roads());
  FlowProfile f(n, static_cast<Eigen::Index>(inst.num_types()));
  for (Eigen::Index j = 0; j < f.cols(); ++j)
    f.col(j).setConstant(inst.demand()(j) / static_cast<double>(n));
  return f;
}

double hessian_self_check(const NetworkInstance& inst) {
  // For a quadratic J, J(x + e_p + e_q) - J(x + e_p) - J(x + e_q) + J(x) equals
  // the (p, q) second partial exactly; evaluate at x = 0.
  const auto n = static_cast<Eigen::Index>(inst.num_roads());
  const auto m = static_cast<Eigen::Index>(inst.num_types());
  const FlowProfile zero = FlowProfile::Zero(n, m);
  const double j0 = social_cost(inst, zero);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd block = hessian_block(inst, static_cast<std::size_t>(i));
    for (Eigen::Index p = 0; p < m; ++p) {
      for (Eigen::Index q = 0; q < m; ++q) {
        FlowProfile ep = zero, eq = zero, epq = zero;
        ep(i, p) += 1.0;
        eq(i, q) += 1.0;
        epq(i, p) += 1.0;
        epq(i, q) += 1.0;
        const double second =
            social_cost(inst, epq) - social_cost(inst, ep) - social_cost(inst, eq) + j0;
        worst = std::max(worst, std::abs(second - block(p, q)));
      }
    }
    // Cross-road partials.
    for (Eigen::Index k = i + 1; k < n; ++k) {
      FlowProfile ep = zero, eq = zero, epq = zero;
      ep(i, 0) = 1.0;
      eq(k, 0) = 1.0;
      epq(i, 0) = 1.0;
      epq(k, 0) = 1.0;
      worst = std::max(worst, std::abs(social_cost(inst, epq) - social_cost(inst, ep) -
                                       social_cost(inst, eq) + j0));
    }
  }
  return worst;
}

}  // namespace hetroute
