#include "hetroute/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace hetroute {

void SolverConfig::validate() const {
  if (starts < 1) throw InvalidArgument("solver needs at least one start");
  if (max_iters < 1) throw InvalidArgument("solver iteration cap must be positive");
  if (!(tol_grad > 0.0)) throw InvalidArgument("stationarity tolerance must be positive");
  if (!(fixed_step > 0.0)) throw InvalidArgument("fixed step must be positive");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidArgument("Armijo constant must be in (0,1)");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
    throw InvalidArgument("backtracking factor must be in (0,1)");
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double total) {
  if (!(total >= 0.0)) throw InvalidArgument("simplex total must be nonnegative");
  const Eigen::Index k = v.size();
  if (k == 0) throw InvalidArgument("cannot project an empty vector");
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<>());
  // Largest rho with u_rho - (sum_{r<=rho} u_r - total) / rho > 0.
  double prefix = u[0];
  double theta = u[0] - total;
  for (Eigen::Index r = 1; r < k; ++r) {
    prefix += u[static_cast<std::size_t>(r)];
    const double candidate = (prefix - total) / static_cast<double>(r + 1);
    if (u[static_cast<std::size_t>(r)] - candidate > 0.0) theta = candidate;
  }
  Eigen::VectorXd x = (v.array() - theta).cwiseMax(0.0);
  return x;
}

FlowProfile project_to_feasible(const NetworkInstance& inst, const FlowProfile& f) {
  check_shape(inst, f);
  FlowProfile p(f.rows(), f.cols());
  for (Eigen::Index j = 0; j < f.cols(); ++j)
    p.col(j) = project_to_simplex(f.col(j), inst.demand()(j));
  return p;
}

double stationarity_residual(const NetworkInstance& inst, const FlowProfile& f) {
  const Eigen::MatrixXd g = social_cost_gradient(inst, f);
  return (f - project_to_feasible(inst, f - g)).norm();
}

FlowProfile random_feasible_flow(const NetworkInstance& inst, std::mt19937_64& rng) {
  std::exponential_distribution<double> spacing(1.0);
  const auto n = static_cast<Eigen::Index>(inst.num_roads());
  const auto m = static_cast<Eigen::Index>(inst.num_types());
  FlowProfile f(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) f(i, j) = spacing(rng);
    f.col(j) *= inst.demand()(j) / f.col(j).sum();
  }
  return f;
}

std::uint64_t stream_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Solves the stationarity system restricted to the current support:
//   grad_ij J(f) = lambda_j on every support entry, f = 0 off support,
//   sum_i f_ij = demand_j.
// The system is singular when the support has cycles (zero-curvature
// directions), so the minimum-norm correction from f is taken.
bool polish_on_face(const NetworkInstance& inst, FlowProfile& f, double tol_grad) {
  const auto n = f.rows();
  const auto m = f.cols();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> support;
  Eigen::MatrixXi slot = Eigen::MatrixXi::Constant(n, m, -1);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (f(i, j) > 0.0) {
        slot(i, j) = static_cast<int>(support.size());
        support.emplace_back(i, j);
      }
  const auto s = static_cast<Eigen::Index>(support.size());
  const Eigen::Index dim = s + m;
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  const auto& a = inst.slopes();
  for (Eigen::Index k = 0; k < s; ++k) {
    const auto [i, j] = support[static_cast<std::size_t>(k)];
    for (Eigen::Index jp = 0; jp < m; ++jp) {
      const int col = slot(i, jp);
      if (col >= 0) sys(k, col) = a(i, jp) + a(i, j);
    }
    sys(k, s + j) = -1.0;
    rhs(k) = -inst.free_flow()(i);
  }
  for (Eigen::Index k = 0; k < s; ++k) sys(s + support[static_cast<std::size_t>(k)].second, k) = 1.0;
  for (Eigen::Index j = 0; j < m; ++j) rhs(s + j) = inst.demand()(j);

  Eigen::VectorXd x(dim);
  for (Eigen::Index k = 0; k < s; ++k) {
    const auto [i, j] = support[static_cast<std::size_t>(k)];
    x(k) = f(i, j);
  }
  const Eigen::MatrixXd g = social_cost_gradient(inst, f);
  for (Eigen::Index j = 0; j < m; ++j) {
    double acc = 0.0;
    int cnt = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (slot(i, j) >= 0) {
        acc += g(i, j);
        ++cnt;
      }
    x(s + j) = cnt > 0 ? acc / cnt : 0.0;
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sys);
  const Eigen::VectorXd residual = sys * x - rhs;
  const Eigen::VectorXd corrected = x - cod.solve(residual);
  const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
  if ((sys * corrected - rhs).cwiseAbs().maxCoeff() > 1e-9 * scale) return false;

  FlowProfile candidate = FlowProfile::Zero(n, m);
  for (Eigen::Index k = 0; k < s; ++k) {
    const auto [i, j] = support[static_cast<std::size_t>(k)];
    if (corrected(k) < 0.0) return false;
    candidate(i, j) = corrected(k);
  }
  if (stationarity_residual(inst, candidate) > tol_grad) return false;
  const double before = social_cost(inst, f);
  if (social_cost(inst, candidate) > before + 1e-12 * (1.0 + std::abs(before))) return false;
  f = std::move(candidate);
  return true;
}

}  // namespace

OptimizationResult descend_from(const NetworkInstance& inst, const FlowProfile& start,
                                const SolverConfig& cfg) {
  cfg.validate();
  check_shape(inst, start);
  OptimizationResult res;
  FlowProfile f = project_to_feasible(inst, start);
  double cost = social_cost(inst, f);
  if (cfg.record_trace) res.cost_trace.push_back(cost);

  double step = cfg.step_rule == StepRule::kFixed ? cfg.fixed_step : 1.0;
  constexpr std::size_t kCheckEvery = 25;
  std::size_t iter = 0;
  double resid = stationarity_residual(inst, f);
  for (; iter < cfg.max_iters && resid > cfg.tol_grad; ++iter) {
    const Eigen::MatrixXd g = social_cost_gradient(inst, f);
    FlowProfile next;
    double next_cost = 0.0;
    if (cfg.step_rule == StepRule::kFixed) {
      next = project_to_feasible(inst, f - step * g);
      next_cost = social_cost(inst, next);
    } else {
      bool accepted = false;
      while (step > 1e-16) {
        next = project_to_feasible(inst, f - step * g);
        next_cost = social_cost(inst, next);
        const double decrease = (g.array() * (next - f).array()).sum();
        if (next_cost <= cost + cfg.armijo_c * decrease) {
          accepted = true;
          break;
        }
        step *= cfg.backtrack_factor;
      }
      if (!accepted) break;
      step = std::min(step / cfg.backtrack_factor, 1e6);
    }
    const bool moved = (next - f).norm() > 0.0;
    f = std::move(next);
    cost = next_cost;
    if (cfg.record_trace) res.cost_trace.push_back(cost);
    if (!moved || iter % kCheckEvery == 0) {
      resid = stationarity_residual(inst, f);
      if (resid <= cfg.tol_grad) break;
      if (resid < 1e-3 && polish_on_face(inst, f, cfg.tol_grad)) {
        cost = social_cost(inst, f);
        if (cfg.record_trace) res.cost_trace.push_back(cost);
        resid = stationarity_residual(inst, f);
      }
      if (!moved && resid > cfg.tol_grad) break;
    }
  }
  if (resid > cfg.tol_grad && polish_on_face(inst, f, cfg.tol_grad)) {
    cost = social_cost(inst, f);
    if (cfg.record_trace) res.cost_trace.push_back(cost);
  }
  res.flow = std::move(f);
  res.cost = cost;
  res.stationarity_residual = stationarity_residual(inst, res.flow);
  res.iterations = iter;
  return res;
}

OptimizationResult solve_social_optimum(const NetworkInstance& inst, const SolverConfig& cfg) {
  cfg.validate();
  OptimizationResult best;
  bool have_converged = false;
  OptimizationResult fallback;
  bool have_any = false;
  for (std::size_t k = 0; k < cfg.starts; ++k) {
    std::mt19937_64 rng(stream_seed(cfg.seed, k));
    OptimizationResult run = descend_from(inst, random_feasible_flow(inst, rng), cfg);
    run.start_index = k;
    const bool converged = run.stationarity_residual <= cfg.tol_grad;
    if (converged) {
      // Strict improvement required, so the lowest start index wins ties.
      if (!have_converged || run.cost < best.cost - 1e-12 * (1.0 + std::abs(best.cost))) {
        best = std::move(run);
        have_converged = true;
      }
    } else if (!have_any || run.stationarity_residual < fallback.stationarity_residual) {
      fallback = std::move(run);
      have_any = true;
    }
  }
  if (!have_converged)
    throw ConvergenceError("no start reached the stationarity tolerance within the iteration cap",
                           std::move(fallback));
  return best;
}

double brute_force_candidates(const NetworkInstance& inst, double grid_step) {
  if (!(grid_step > 0.0)) throw InvalidArgument("grid step must be positive");
  const double n = static_cast<double>(inst.num_roads());
  double total = 1.0;
  for (Eigen::Index j = 0; j < inst.demand().size(); ++j) {
    const double units = std::floor(inst.demand()(j) / grid_step + 1e-9);
    // Compositions of at most `units` into n-1 free parts: C(units + n - 1, n - 1).
    double c = 1.0;
    for (double r = 1.0; r <= n - 1.0; r += 1.0) c = c * (units + r) / r;
    total *= std::round(c);
  }
  return total;
}

OptimizationResult brute_force_optimum(const NetworkInstance& inst, double grid_step) {
  const double count = brute_force_candidates(inst, grid_step);
  if (count > kMaxBruteForceCandidates)
    throw SizeError("grid enumeration would evaluate " + std::to_string(count) +
                    " candidates (limit 1e8)");
  const auto n = static_cast<Eigen::Index>(inst.num_roads());
  const auto m = static_cast<Eigen::Index>(inst.num_types());

  // Per-type candidate splits.
  std::vector<std::vector<Eigen::VectorXd>> splits(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    const double d = inst.demand()(j);
    const auto units = static_cast<long>(std::floor(d / grid_step + 1e-9));
    std::vector<long> k(static_cast<std::size_t>(n), 0);
    auto& out = splits[static_cast<std::size_t>(j)];
    std::function<void(Eigen::Index, long)> rec = [&](Eigen::Index road, long left) {
      if (road == n - 1) {
        Eigen::VectorXd col(n);
        double used = 0.0;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
          col(i) = static_cast<double>(k[static_cast<std::size_t>(i)]) * grid_step;
          used += col(i);
        }
        col(n - 1) = std::max(0.0, d - used);
        out.push_back(std::move(col));
        return;
      }
      for (long u = 0; u <= left; ++u) {
        k[static_cast<std::size_t>(road)] = u;
        rec(road + 1, left - u);
      }
    };
    rec(0, units);
  }

  const auto& a = inst.slopes();
  const auto& b = inst.free_flow();
  Eigen::VectorXd load = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(n);
  std::vector<std::size_t> choice(static_cast<std::size_t>(m), 0);
  std::vector<std::size_t> best_choice(static_cast<std::size_t>(m), 0);
  double best = std::numeric_limits<double>::infinity();

  std::function<void(Eigen::Index)> search = [&](Eigen::Index j) {
    if (j == m) {
      const double cost = load.dot(b + weighted);
      if (cost < best) {
        best = cost;
        best_choice = choice;
      }
      return;
    }
    const auto& list = splits[static_cast<std::size_t>(j)];
    const Eigen::VectorXd aj = a.col(j);
    for (std::size_t c = 0; c < list.size(); ++c) {
      choice[static_cast<std::size_t>(j)] = c;
      load += list[c];
      weighted += aj.cwiseProduct(list[c]);
      search(j + 1);
      load -= list[c];
      weighted -= aj.cwiseProduct(list[c]);
    }
  };
  search(0);

  OptimizationResult res;
  res.flow = FlowProfile(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    res.flow.col(j) = splits[static_cast<std::size_t>(j)][best_choice[static_cast<std::size_t>(j)]];
  res.cost = social_cost(inst, res.flow);
  res.stationarity_residual = stationarity_residual(inst, res.flow);
  res.iterations = static_cast<std::size_t>(count);
  return res;
}

}  // namespace hetroute
