#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "hetroute/experiments.hpp"
#include "hetroute/io.hpp"

using namespace hetroute;

namespace {

NetworkInstance two_road_single_type() {
  Eigen::MatrixXd a(2, 1);
  a << 1.0, 1.0;
  return NetworkInstance(a, Eigen::Vector2d(0.0, 1.0), Eigen::VectorXd::Ones(1), "two-road");
}

Scenario quick(NetworkInstance inst, Mode mode, TollScheme scheme) {
  Scenario s = scenario_for_instance(std::move(inst), mode, scheme);
  s.options.solver.starts = 8;
  s.options.equilibrium.starts = 20;
  s.options.equilibrium.eps = 1e-9;
  return s;
}

}  // namespace

TEST_CASE("pipeline with synthesized tolls reaches the optimum") {
  Scenario s = quick(two_road_single_type(), Mode::kPipeline, TollScheme::kPaper);
  s.options.oracle = true;
  const RunReport r = run_pipeline(s);
  REQUIRE(r.status == "ok");
  CHECK(exit_code(r) == 0);
  CHECK(r.optimum->cost == doctest::Approx(0.875).epsilon(1e-10));
  CHECK(r.oracle->certified);
  CHECK(r.constants->mu == doctest::Approx(1.25));
  CHECK(r.tolls->tolls(0, 0) == doctest::Approx(0.5));
  CHECK(std::abs(*r.ratio - 1.0) <= 1e-6);
  CHECK(std::abs(*r.worst_ratio - 1.0) <= 1e-6);
  CHECK(r.probe->max_distance <= kUniquenessTol);
  CHECK(r.probe->runs.size() == 20);
}

TEST_CASE("untolled and marginal schemes") {
  const RunReport none = run_pipeline(quick(two_road_single_type(), Mode::kEquilibrium, TollScheme::kNone));
  REQUIRE(none.status == "ok");
  CHECK(*none.ratio == doctest::Approx(1.0 / 0.875).epsilon(1e-6));
  CHECK_FALSE(none.probe.has_value());

  const RunReport marginal =
      run_pipeline(quick(two_road_single_type(), Mode::kEquilibrium, TollScheme::kMarginal));
  REQUIRE(marginal.status == "ok");
  // Marginal-cost tolls at the optimum support the optimum for a single type.
  CHECK(std::abs(*marginal.ratio - 1.0) <= 1e-6);
}

TEST_CASE("optimum mode stops after the solver") {
  const RunReport r = run_pipeline(quick(two_road_single_type(), Mode::kOptimum, TollScheme::kPaper));
  CHECK(r.status == "ok");
  CHECK(r.optimum.has_value());
  CHECK_FALSE(r.tolls.has_value());
  CHECK_FALSE(r.equilibrium.has_value());
}

TEST_CASE("run_tolls skips the equilibrium stage") {
  const RunReport r = run_tolls(quick(two_road_single_type(), Mode::kPipeline, TollScheme::kPaper));
  CHECK(r.status == "ok");
  CHECK(r.tolls.has_value());
  CHECK(r.acyclic.has_value());
  CHECK_FALSE(r.equilibrium.has_value());
}

TEST_CASE("single vehicle type on several roads") {
  Eigen::MatrixXd a(3, 1);
  a << 1.0, 2.0, 0.5;
  const NetworkInstance inst(a, Eigen::Vector3d(0.5, 0.0, 1.0), Eigen::VectorXd::Constant(1, 2.0));
  const RunReport r = run_pipeline(quick(inst, Mode::kPipeline, TollScheme::kPaper));
  REQUIRE(r.status == "ok");
  CHECK(std::abs(*r.ratio - 1.0) <= 1e-6);
}

TEST_CASE("heterogeneous instance with a degenerate optimum") {
  // Identical slopes across types: the optimal set has flat directions and
  // the raw optimum usually carries a support cycle.
  Eigen::MatrixXd a(3, 3);
  a << 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.7, 0.7, 0.7;
  const NetworkInstance inst(a, Eigen::Vector3d(0.2, 0.0, 0.4), Eigen::Vector3d(1.0, 0.8, 1.2));
  const RunReport r = run_pipeline(quick(inst, Mode::kPipeline, TollScheme::kPaper));
  REQUIRE(r.status == "ok");
  CHECK(std::abs(*r.ratio - 1.0) <= 1e-6);
  CHECK(r.probe->max_distance <= kUniquenessTol);
  CHECK(std::abs(*r.acyclic_cost - r.optimum->cost) <= 1e-8 * (1.0 + r.optimum->cost));
}

TEST_CASE("poa sweep") {
  Scenario s = quick(two_road_single_type(), Mode::kPoaStudy, TollScheme::kPaper);
  s.sweep = Sweep{FieldPath::parse("roads[1].b"), {0.0, 0.5, 1.0, 2.0}};
  const auto rows = run_poa_study(s);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    REQUIRE(row.report.status == "ok");
    CHECK(std::abs(*row.report.ratio - 1.0) <= 1e-5);
  }
  CHECK(exit_code(rows) == 0);
  const std::string csv = sweep_to_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  s.toll_scheme = TollScheme::kNone;
  const auto untolled = run_poa_study(s);
  // b2 = 0: symmetric roads, no inefficiency. b2 = 2: road 1 unused at both.
  CHECK(*untolled[0].report.ratio == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(*untolled[2].report.ratio == doctest::Approx(1.0 / 0.875).epsilon(1e-6));
  CHECK(*untolled[3].report.ratio == doctest::Approx(1.0).epsilon(1e-6));

  s.sweep->values.clear();
  CHECK(run_poa_study(s).empty());
  CHECK(sweep_to_json(s, {}).at("rows").empty());
}

TEST_CASE("anonymous toll sweep") {
  Scenario s = quick(two_road_single_type(), Mode::kPoaStudy, TollScheme::kAnonymous);
  s.anonymous_tolls = Eigen::Vector2d(0.0, 0.0);
  s.sweep = Sweep{FieldPath::parse("anonymous_tolls[0]"), {0.0, 0.5}};
  const auto rows = run_poa_study(s);
  // A toll of 0.5 on road 0 equalizes costs at the optimal split.
  CHECK(*rows[0].report.ratio == doctest::Approx(1.0 / 0.875).epsilon(1e-6));
  CHECK(*rows[1].report.ratio == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("reports are deterministic and carry provenance") {
  Scenario s = quick(two_road_single_type(), Mode::kPipeline, TollScheme::kPaper);
  s.options.solver.seed = s.options.equilibrium.seed = 17;
  const std::string first = report_to_json(s, run_pipeline(s)).dump(2);
  const std::string second = report_to_json(s, run_pipeline(s)).dump(2);
  CHECK(first == second);
  const json doc = json::parse(first);
  CHECK(doc.at("provenance").at("solver").at("seed") == 17);
  CHECK(doc.at("provenance").at("equilibrium").at("eps") == 1e-9);
  CHECK(doc.at("tolls").at("scheme") == "paper");
  CHECK(doc.at("status") == "ok");
  CHECK_FALSE(report_to_text(s, run_pipeline(s)).empty());
}

TEST_CASE("failures map to statuses and exit codes") {
  Scenario s = quick(two_road_single_type(), Mode::kPipeline, TollScheme::kPaper);
  s.options.equilibrium.max_rounds = 1;
  const RunReport capped = run_pipeline(s);
  CHECK(capped.status == "non-converged");
  CHECK(exit_code(capped) == 4);

  Scenario big = quick(NetworkInstance(Eigen::MatrixXd::Ones(4, 4), Eigen::Vector4d::Zero(),
                                       Eigen::Vector4d::Constant(2.0)),
                       Mode::kOptimum, TollScheme::kPaper);
  big.options.oracle = true;
  const RunReport oversized = run_pipeline(big);
  CHECK(oversized.status == "stage-failure");
  CHECK(oversized.failed_stage == "oracle");
  CHECK(exit_code(oversized) == 3);

  Scenario bad = s;
  bad.sweep = Sweep{FieldPath::parse("demands[0]"), {1.0}};
  CHECK_THROWS_AS(run_pipeline(bad), InvalidArgument);
}
