#include "hetroute/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

namespace hetroute {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kOptimum: return "optimum";
    case Mode::kPipeline: return "pipeline";
    case Mode::kEquilibrium: return "equilibrium";
    case Mode::kPoaStudy: return "poa-study";
  }
  return "pipeline";
}

Mode mode_from_string(const std::string& s) {
  if (s == "optimum") return Mode::kOptimum;
  if (s == "pipeline") return Mode::kPipeline;
  if (s == "equilibrium") return Mode::kEquilibrium;
  if (s == "poa-study") return Mode::kPoaStudy;
  throw InvalidArgument("unknown mode '" + s + "'");
}

FieldPath FieldPath::parse(const std::string& text) {
  static const std::regex slope(R"(roads\[(\d+)\]\.a\[(\d+)\])");
  static const std::regex free_flow(R"(roads\[(\d+)\]\.b)");
  static const std::regex demand(R"(demands\[(\d+)\])");
  static const std::regex anon(R"(anonymous_tolls\[(\d+)\])");
  std::smatch mt;
  FieldPath p;
  p.text = text;
  if (std::regex_match(text, mt, slope)) {
    p.kind = Kind::kSlope;
    p.first = std::stoul(mt[1]);
    p.second = std::stoul(mt[2]);
  } else if (std::regex_match(text, mt, free_flow)) {
    p.kind = Kind::kFreeFlow;
    p.first = std::stoul(mt[1]);
  } else if (std::regex_match(text, mt, demand)) {
    p.kind = Kind::kDemand;
    p.first = std::stoul(mt[1]);
  } else if (std::regex_match(text, mt, anon)) {
    p.kind = Kind::kAnonymousToll;
    p.first = std::stoul(mt[1]);
  } else {
    throw InvalidArgument("unsupported sweep field '" + text + "'");
  }
  return p;
}

void Scenario::validate() const {
  if (sweep && mode != Mode::kPoaStudy) throw InvalidArgument("a sweep is only valid in poa-study mode");
  if (mode == Mode::kPoaStudy && !sweep) throw InvalidArgument("poa-study mode needs a sweep");
  if (anonymous_tolls) {
    if (static_cast<std::size_t>(anonymous_tolls->size()) != instance.num_roads())
      throw InvalidArgument("anonymous_tolls needs one entry per road");
    if (anonymous_tolls->size() > 0 && anonymous_tolls->minCoeff() < 0.0)
      throw InvalidArgument("anonymous_tolls must be nonnegative");
  }
  if (sweep) {
    const auto& f = sweep->field;
    const std::size_t n = instance.num_roads();
    const std::size_t m = instance.num_types();
    const bool ok = (f.kind == FieldPath::Kind::kSlope && f.first < n && f.second < m) ||
                    (f.kind == FieldPath::Kind::kFreeFlow && f.first < n) ||
                    (f.kind == FieldPath::Kind::kDemand && f.first < m) ||
                    (f.kind == FieldPath::Kind::kAnonymousToll && f.first < n);
    if (!ok) throw InvalidArgument("sweep field '" + f.text + "' is out of range for the instance");
  }
  options.solver.validate();
  options.equilibrium.validate();
}

Scenario with_field(const Scenario& s, const FieldPath& field, double value) {
  Eigen::MatrixXd a = s.instance.slopes();
  Eigen::VectorXd b = s.instance.free_flow();
  Eigen::VectorXd d = s.instance.demand();
  std::optional<Eigen::VectorXd> anon = s.anonymous_tolls;
  const auto i = static_cast<Eigen::Index>(field.first);
  const auto j = static_cast<Eigen::Index>(field.second);
  switch (field.kind) {
    case FieldPath::Kind::kSlope: a(i, j) = value; break;
    case FieldPath::Kind::kFreeFlow: b(i) = value; break;
    case FieldPath::Kind::kDemand: d(i) = value; break;
    case FieldPath::Kind::kAnonymousToll:
      if (!anon) anon = Eigen::VectorXd::Zero(b.size());
      (*anon)(i) = value;
      break;
  }
  Scenario out{s.name, NetworkInstance(a, b, d, s.instance.name()), s.mode, s.toll_scheme,
               anon, std::nullopt, s.options};
  return out;
}

namespace {

// Exact-mu check: every used entry costs mu and every blocked entry at least P.
void check_exact_mu(const NetworkInstance& inst, const TollMatrix& t, const TollConstants& c,
                    const FlowProfile& f_star) {
  const CostMatrix cost = experienced_costs(inst, t, f_star);
  for (Eigen::Index i = 0; i < cost.rows(); ++i)
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      if (t.blocked(i, j)) {
        if (cost(i, j) < c.big_p) throw StageError("synthesize_tolls", "blocked entry costs less than P");
      } else if (std::abs(cost(i, j) - c.mu) > 1e-9) {
        throw StageError("synthesize_tolls", "used entry cost differs from mu");
      }
    }
}

void solve_stage(const Scenario& s, RunReport& rep) {
  const auto& inst = s.instance;
  OptimizationResult opt = solve_social_optimum(inst, s.options.solver);
  if (s.options.oracle) {
    OracleCheck oc;
    oc.grid_step = s.options.oracle_grid;
    const OptimizationResult grid = brute_force_optimum(inst, oc.grid_step);
    oc.grid_cost = grid.cost;
    const double slack = 1e-9 * (1.0 + std::abs(grid.cost));
    if (opt.cost > grid.cost + slack) {
      // The multi-start missed a better basin; descend from the grid point.
      OptimizationResult local = descend_from(inst, grid.flow, s.options.solver);
      if (local.stationarity_residual <= s.options.solver.tol_grad && local.cost < opt.cost) {
        local.start_index = s.options.solver.starts;
        opt = std::move(local);
        oc.refined = true;
      }
    }
    oc.certified = opt.cost <= grid.cost + slack;
    rep.oracle = oc;
    rep.optimum = opt;
    if (!oc.certified)
      throw StageError("oracle", "solver optimum is worse than the brute-force grid optimum");
  }
  rep.optimum = std::move(opt);
}

TollMatrix tolls_for(const Scenario& s, RunReport& rep, const FlowProfile& f_star) {
  const auto& inst = s.instance;
  switch (s.toll_scheme) {
    case TollScheme::kPaper: {
      const TollConstants c = choose_constants(inst, f_star, s.options.support_threshold);
      TollMatrix t = synthesize_tolls(inst, f_star, c, s.options.support_threshold);
      check_exact_mu(inst, t, c, f_star);
      rep.constants = c;
      return t;
    }
    case TollScheme::kMarginal: return marginal_cost_tolls(inst, f_star);
    case TollScheme::kAnonymous:
      return anonymous_tolls(inst, s.anonymous_tolls ? *s.anonymous_tolls
                                                     : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(inst.num_roads())));
    case TollScheme::kNone: return TollMatrix::zero(inst.num_roads(), inst.num_types());
  }
  return TollMatrix::zero(inst.num_roads(), inst.num_types());
}

void check_ratio(const RunReport& rep, double ratio) {
  if (rep.oracle && rep.oracle->certified && ratio < 1.0 - kRatioSlack)
    throw StageError("ratio", "equilibrium cost is below the certified optimum");
}

void record_failure(RunReport& rep, const std::string& status, const std::string& stage,
                    const std::string& message) {
  rep.status = status;
  rep.failed_stage = stage;
  rep.message = message;
}

void toll_stages(const Scenario& scenario, RunReport& rep) {
  const auto& inst = scenario.instance;
  rep.acyclic = break_cycles(inst, rep.optimum->flow, scenario.options.support_threshold);
  rep.acyclic_cost = social_cost(inst, rep.acyclic->flow);
  rep.tolls = tolls_for(scenario, rep, rep.acyclic->flow);
}

template <class Body>
RunReport guarded(const Scenario& scenario, Body body) {
  scenario.validate();
  RunReport rep;
  try {
    body(rep);
  } catch (const ConvergenceError& e) {
    record_failure(rep, "non-converged", "solve_social_optimum", e.what());
    rep.optimum = e.best();
  } catch (const StageError& e) {
    record_failure(rep, "stage-failure", e.stage(), e.what());
  } catch (const SizeError& e) {
    record_failure(rep, "stage-failure", "oracle", e.what());
  }
  return rep;
}

}  // namespace

RunReport run_tolls(const Scenario& scenario) {
  return guarded(scenario, [&](RunReport& rep) {
    solve_stage(scenario, rep);
    toll_stages(scenario, rep);
  });
}

RunReport run_pipeline(const Scenario& scenario) {
  const auto& inst = scenario.instance;
  return guarded(scenario, [&](RunReport& rep) {
    solve_stage(scenario, rep);
    if (scenario.mode == Mode::kOptimum) return;

    toll_stages(scenario, rep);
    const FlowProfile& f_star = rep.acyclic->flow;

    EquilibriumConfig ecfg = scenario.options.equilibrium;
    ecfg.support_threshold = scenario.options.support_threshold;
    EquilibriumReport eq = compute_equilibrium(inst, *rep.tolls, ecfg);
    eq.distance_to_reference = (eq.flow - f_star).norm();
    const double opt_cost = *rep.acyclic_cost;
    rep.ratio = eq.social_cost / opt_cost;
    const bool eq_converged = eq.converged;
    rep.equilibrium = std::move(eq);
    check_ratio(rep, *rep.ratio);

    if (scenario.mode == Mode::kPipeline) {
      rep.probe = uniqueness_probe(inst, *rep.tolls, f_star, ecfg);
      if (rep.probe->non_converged < rep.probe->runs.size()) {
        rep.worst_ratio = rep.probe->worst_social_cost / opt_cost;
        check_ratio(rep, *rep.worst_ratio);
      }
      if (scenario.toll_scheme == TollScheme::kPaper && rep.probe->max_distance > kUniquenessTol)
        throw StageError("uniqueness_probe", "an equilibrium under the synthesized tolls differs from the optimum");
      if (rep.probe->non_converged > 0)
        record_failure(rep, "non-converged", "uniqueness_probe",
                       std::to_string(rep.probe->non_converged) + " probe runs did not converge");
    }
    if (!eq_converged)
      record_failure(rep, "non-converged", "compute_equilibrium", "equilibrium dynamics " + rep.equilibrium->status);
  });
}

std::vector<SweepRow> run_poa_study(const Scenario& scenario) {
  scenario.validate();
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < scenario.sweep->values.size(); ++k) {
    const double value = scenario.sweep->values[k];
    Scenario point = with_field(scenario, scenario.sweep->field, value);
    point.mode = Mode::kEquilibrium;
    rows.push_back({k, value, run_pipeline(point)});
  }
  return rows;
}

int exit_code(const RunReport& r) {
  if (r.status == "stage-failure") return 3;
  if (r.status == "non-converged") return 4;
  return 0;
}

int exit_code(const std::vector<SweepRow>& rows) {
  int code = 0;
  for (const auto& row : rows) {
    const int c = exit_code(row.report);
    if (c == 3) return 3;
    code = std::max(code, c);
  }
  return code;
}

}  // namespace hetroute
