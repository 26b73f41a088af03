#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "hetroute/equilibrium.hpp"
#include "hetroute/solver.hpp"
#include "oracles.hpp"

using namespace hetroute;

namespace {

NetworkInstance two_road_single_type() {
  Eigen::MatrixXd a(2, 1);
  a << 1.0, 1.0;
  return NetworkInstance(a, Eigen::Vector2d(0.0, 1.0), Eigen::VectorXd::Ones(1));
}

FlowProfile column(double x, double y) {
  FlowProfile f(2, 1);
  f << x, y;
  return f;
}

TollMatrix optimal_tolls_two_road() {
  TollMatrix t = TollMatrix::zero(2, 1);
  t.scheme = TollScheme::kPaper;
  t.tolls(0, 0) = 0.5;
  return t;
}

}  // namespace

TEST_CASE("wardrop violation examples") {
  const auto inst = two_road_single_type();
  const auto none = TollMatrix::zero(2, 1);
  // All flow on road 0: it costs 1, road 1 costs 1.
  CHECK(wardrop_violation(inst, none, column(1.0, 0.0)) == doctest::Approx(0.0));
  CHECK(wardrop_violation(inst, optimal_tolls_two_road(), column(0.75, 0.25)) == doctest::Approx(0.0));
  // Road 1 costs 2 with flow 1 while road 0 costs 0.
  CHECK(wardrop_violation(inst, none, column(0.0, 1.0)) == doctest::Approx(2.0));
  CHECK(weighted_gap(inst, none, column(0.0, 1.0)) == doctest::Approx(2.0));
  CHECK(wardrop_violation(inst, none, column(0.5, 0.5)) == doctest::Approx(1.0));
}

TEST_CASE("best response moves the whole type to the cheapest road") {
  const auto inst = two_road_single_type();
  const auto none = TollMatrix::zero(2, 1);
  CHECK(best_response(inst, none, column(0.0, 1.0), 0).isApprox(Eigen::Vector2d(1.0, 0.0)));
  // Road 0 at flow 1 costs 1 = cost of empty road 1: an even split of the tie.
  CHECK(best_response(inst, none, column(1.0, 0.0), 0).isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK_THROWS_AS(best_response(inst, none, column(1.0, 0.0), 1), InvalidIndex);
}

TEST_CASE("type response solves the one-type equilibrium exactly") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> a(0.5, 2.0), b(0.0, 2.0), d(0.5, 2.0);
  for (int k = 0; k < 200; ++k) {
    const double a1 = a(rng), a2 = a(rng), b1 = b(rng), b2 = b(rng), dem = d(rng);
    Eigen::MatrixXd slopes(2, 1);
    slopes << a1, a2;
    const NetworkInstance inst(slopes, Eigen::Vector2d(b1, b2), Eigen::VectorXd::Constant(1, dem));
    const Eigen::VectorXd x =
        type_equilibrium_response(inst, TollMatrix::zero(2, 1), uniform_flow(inst), 0);
    const double expect = oracle::two_road_wardrop_split(a1, b1, a2, b2, dem);
    REQUIRE(x(0) == doctest::Approx(expect).epsilon(1e-12));
    REQUIRE(x.sum() == doctest::Approx(dem).epsilon(1e-14));
  }
}

TEST_CASE("untolled two-road instance settles on the free road") {
  const auto inst = two_road_single_type();
  EquilibriumConfig cfg;
  cfg.eps = 1e-9;
  const auto eq = compute_equilibrium(inst, TollMatrix::zero(2, 1), cfg);
  CHECK(eq.converged);
  CHECK(eq.status == "converged");
  // Mass below the support threshold may stay on the idle road.
  CHECK(eq.flow(1, 0) <= kSupportThreshold);
  CHECK(eq.social_cost == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("optimal tolls reproduce the optimum") {
  const auto inst = two_road_single_type();
  EquilibriumConfig cfg;
  cfg.eps = 1e-9;
  const auto eq = compute_equilibrium(inst, optimal_tolls_two_road(), cfg);
  CHECK(eq.converged);
  CHECK(eq.flow(0, 0) == doctest::Approx(0.75).epsilon(1e-8));
  CHECK(eq.social_cost == doctest::Approx(0.875).epsilon(1e-8));

  const auto at_opt = compute_equilibrium(inst, optimal_tolls_two_road(), cfg, column(0.75, 0.25));
  CHECK(at_opt.converged);
  CHECK(at_opt.rounds == 0);

  cfg.starts = 100;
  const auto probe = uniqueness_probe(inst, optimal_tolls_two_road(), column(0.75, 0.25), cfg);
  CHECK(probe.runs.size() == 100);
  CHECK(probe.non_converged == 0);
  CHECK(probe.max_distance <= 1e-4);

  cfg.starts = 1;
  const auto self = uniqueness_probe(inst, optimal_tolls_two_road(), column(0.75, 0.25), cfg, true);
  CHECK(self.max_distance == 0.0);
  CHECK(self.runs.front().rounds == 0);
}

TEST_CASE("homogeneous types on two roads match the closed form") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> a(0.5, 2.0), b(0.0, 2.0), d(0.2, 1.0);
  for (int k = 0; k < 30; ++k) {
    const double a1 = a(rng), a2 = a(rng), b1 = b(rng), b2 = b(rng);
    Eigen::MatrixXd slopes(2, 3);
    slopes.row(0).setConstant(a1);
    slopes.row(1).setConstant(a2);
    const Eigen::Vector3d dem(d(rng), d(rng), d(rng));
    const NetworkInstance inst(slopes, Eigen::Vector2d(b1, b2), dem);
    EquilibriumConfig cfg;
    cfg.eps = 1e-10;
    const auto eq = compute_equilibrium(inst, TollMatrix::zero(2, 3), cfg);
    REQUIRE(eq.converged);
    const double x = oracle::two_road_wardrop_split(a1, b1, a2, b2, dem.sum());
    REQUIRE(eq.flow.row(0).sum() == doctest::Approx(x).epsilon(1e-6));
  }
}

TEST_CASE("random untolled instances reach approximate equilibria") {
  std::mt19937_64 rng(53);
  oracle::InstanceRanges r;
  r.max_roads = 5;
  r.max_types = 5;
  for (int k = 0; k < 30; ++k) {
    const auto inst = oracle::random_instance(rng, r);
    const auto none = TollMatrix::zero(inst.num_roads(), inst.num_types());
    EquilibriumConfig cfg;
    const auto eq = compute_equilibrium(inst, none, cfg, oracle::random_flow(rng, inst));
    REQUIRE(eq.converged);
    REQUIRE(check_feasible(inst, eq.flow).feasible);
    // Independent check of the equilibrium condition with the naive latency.
    for (Eigen::Index j = 0; j < eq.flow.cols(); ++j) {
      Eigen::VectorXd c(eq.flow.rows());
      for (Eigen::Index i = 0; i < eq.flow.rows(); ++i) {
        c(i) = inst.free_flow()(i);
        for (Eigen::Index t = 0; t < eq.flow.cols(); ++t) c(i) += inst.slopes()(i, t) * eq.flow(i, t);
      }
      for (Eigen::Index i = 0; i < eq.flow.rows(); ++i)
        if (eq.flow(i, j) > kSupportThreshold) REQUIRE(c(i) - c.minCoeff() <= 1e-6 + 1e-12);
    }
  }
}

TEST_CASE("round cap and invalid input") {
  const auto inst = two_road_single_type();
  EquilibriumConfig cfg;
  cfg.max_rounds = 2;
  cfg.eps = 1e-12;
  const auto eq = compute_equilibrium(inst, optimal_tolls_two_road(), cfg);
  CHECK_FALSE(eq.converged);
  CHECK(eq.status == "max-rounds");
  CHECK(eq.rounds == 2);

  TollMatrix neg = TollMatrix::zero(2, 1);
  neg.tolls(1, 0) = -1.0;
  CHECK_THROWS_AS(compute_equilibrium(inst, neg, EquilibriumConfig{}), InvalidArgument);
  CHECK_THROWS_AS(compute_equilibrium(inst, neg, EquilibriumConfig{}, column(0.5, 0.2)), InvalidArgument);
  CHECK_THROWS_AS(compute_equilibrium(inst, TollMatrix::zero(2, 1), EquilibriumConfig{}, column(0.5, 0.2)),
                  InvalidArgument);
  EquilibriumConfig bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(compute_equilibrium(inst, TollMatrix::zero(2, 1), bad), InvalidArgument);
}
