// Command-line front end: solve, tolls, equilibrium, pipeline, poa.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hetroute/experiments.hpp"
#include "hetroute/io.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitStage = 3;

struct CommonArgs {
  std::string instance;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> starts;
  std::optional<std::size_t> probe_starts;
  std::optional<double> tol;
  std::optional<double> grad_tol;
  bool oracle = false;
  std::optional<double> oracle_grid;
  std::string scheme;
  std::string out;
  std::string format = "json";
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_scheme) {
  auto* inst = cmd->add_option("--instance", a.instance, "instance JSON file");
  auto* scen = cmd->add_option("--scenario", a.scenario, "scenario JSON file");
  inst->excludes(scen);
  cmd->add_option("--seed", a.seed, "RNG seed for starts");
  cmd->add_option("--starts", a.starts, "multi-start count of the optimum search");
  cmd->add_option("--probe-starts", a.probe_starts, "random starts of the uniqueness probe");
  cmd->add_option("--tol", a.tol, "equilibrium tolerance (latency units)");
  cmd->add_option("--grad-tol", a.grad_tol, "stationarity tolerance of the optimum search");
  cmd->add_flag("--oracle", a.oracle, "certify the optimum against brute-force grid search");
  cmd->add_option("--oracle-grid", a.oracle_grid, "grid step of the brute-force oracle");
  if (needs_scheme)
    cmd->add_option("--scheme", a.scheme, "toll scheme when running a bare instance")
        ->check(CLI::IsMember({"paper", "anonymous", "marginal", "none"}));
  cmd->add_option("--out", a.out, "write the report here instead of stdout");
  cmd->add_option("--format", a.format, "report format")->check(CLI::IsMember({"json", "csv", "text"}));
}

hetroute::Scenario load(const CommonArgs& a, hetroute::Mode mode) {
  using namespace hetroute;
  if (a.instance.empty() && a.scenario.empty())
    throw ParseError("<command line>", 0, 0, "one of --instance or --scenario is required");
  Scenario s = a.scenario.empty()
                   ? scenario_for_instance(load_instance(a.instance), mode,
                                           a.scheme.empty() ? TollScheme::kPaper : toll_scheme_from_string(a.scheme))
                   : load_scenario(a.scenario);
  if (!a.scenario.empty() && mode != Mode::kPoaStudy && s.mode == Mode::kPoaStudy)
    throw ParseError(a.scenario, 0, 0, "poa-study scenarios run with the poa subcommand");
  if (!a.scenario.empty() && mode == Mode::kPoaStudy && s.mode != Mode::kPoaStudy)
    throw ParseError(a.scenario, 0, 0, "the poa subcommand needs a poa-study scenario");
  if (!a.scenario.empty() && !a.scheme.empty()) s.toll_scheme = toll_scheme_from_string(a.scheme);
  if (mode != Mode::kPoaStudy) s.mode = mode;
  auto& o = s.options;
  if (a.seed) o.solver.seed = o.equilibrium.seed = *a.seed;
  if (a.starts) o.solver.starts = *a.starts;
  if (a.probe_starts) o.equilibrium.starts = *a.probe_starts;
  if (a.tol) o.equilibrium.eps = *a.tol;
  if (a.grad_tol) o.solver.tol_grad = *a.grad_tol;
  if (a.oracle) o.oracle = true;
  if (a.oracle_grid) o.oracle_grid = *a.oracle_grid;
  s.validate();

  // The analytic Hessian blocks must match the second differences of the
  // social cost on this instance.
  const double mismatch = hessian_self_check(s.instance);
  if (!(mismatch <= 1e-9 * (1.0 + s.instance.slopes().maxCoeff())))
    throw StageError("hessian_self_check", "analytic Hessian disagrees with the social cost");
  return s;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw hetroute::ParseError(out, 0, 0, "cannot open output file");
  f << text;
}

int run_single(const CommonArgs& a, hetroute::Mode mode, bool tolls_only) {
  using namespace hetroute;
  const Scenario s = load(a, mode);
  const RunReport r = tolls_only ? run_tolls(s) : run_pipeline(s);
  if (a.format == "text") {
    emit(report_to_text(s, r), a.out);
  } else if (a.format == "csv") {
    emit(sweep_to_csv({SweepRow{0, 0.0, r}}), a.out);
  } else {
    emit(report_to_json(s, r).dump(2) + "\n", a.out);
  }
  if (r.status != "ok") std::cerr << "hetroute: " << r.failed_stage << ": " << r.message << "\n";
  return exit_code(r);
}

int run_sweep(const CommonArgs& a) {
  using namespace hetroute;
  const Scenario s = load(a, Mode::kPoaStudy);
  const auto rows = run_poa_study(s);
  if (a.format == "text")
    emit(sweep_to_text(s, rows), a.out);
  else if (a.format == "csv")
    emit(sweep_to_csv(rows), a.out);
  else
    emit(sweep_to_json(s, rows).dump(2) + "\n", a.out);
  return exit_code(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal type-differentiated tolls for heterogeneous traffic on parallel roads"};
  app.require_subcommand(1);

  CommonArgs solve_args, tolls_args, eq_args, pipe_args, poa_args;
  auto* solve = app.add_subcommand("solve", "socially optimal routing");
  add_common(solve, solve_args, false);
  auto* tolls = app.add_subcommand("tolls", "acyclic optimum and its tolls");
  add_common(tolls, tolls_args, true);
  auto* eq = app.add_subcommand("equilibrium", "equilibrium under a toll scheme");
  add_common(eq, eq_args, true);
  auto* pipe = app.add_subcommand("pipeline", "optimum, tolls, equilibrium and uniqueness probe");
  add_common(pipe, pipe_args, true);
  auto* poa = app.add_subcommand("poa", "efficiency ratio over a parameter sweep");
  add_common(poa, poa_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    using hetroute::Mode;
    if (*solve) return run_single(solve_args, Mode::kOptimum, false);
    if (*tolls) return run_single(tolls_args, Mode::kPipeline, true);
    if (*eq) return run_single(eq_args, Mode::kEquilibrium, false);
    if (*pipe) return run_single(pipe_args, Mode::kPipeline, false);
    if (*poa) return run_sweep(poa_args);
  } catch (const hetroute::ParseError& e) {
    std::cerr << "hetroute: " << e.what() << "\n";
    return kExitParse;
  } catch (const hetroute::InvalidArgument& e) {
    std::cerr << "hetroute: " << e.what() << "\n";
    return kExitParse;
  } catch (const hetroute::InvalidInstance& e) {
    std::cerr << "hetroute: " << e.what() << "\n";
    return kExitParse;
  } catch (const hetroute::StageError& e) {
    std::cerr << "hetroute: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
