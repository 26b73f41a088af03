#include "hetroute/cycles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace hetroute {

SupportGraph::SupportGraph(std::size_t roads, std::size_t types)
    : roads_(roads), types_(types), adj_(roads * types, 0) {}

void SupportGraph::add_edge(std::size_t road, std::size_t type) {
  if (road >= roads_ || type >= types_) throw InvalidIndex("support edge out of range");
  adj_[road * types_ + type] = 1;
}

bool SupportGraph::has_edge(std::size_t road, std::size_t type) const {
  if (road >= roads_ || type >= types_) throw InvalidIndex("support edge out of range");
  return adj_[road * types_ + type] != 0;
}

std::size_t SupportGraph::edge_count() const {
  return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), 1));
}

std::vector<std::size_t> SupportGraph::types_on(std::size_t road) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < types_; ++j)
    if (has_edge(road, j)) out.push_back(j);
  return out;
}

std::vector<std::size_t> SupportGraph::roads_of(std::size_t type) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < roads_; ++i)
    if (has_edge(i, type)) out.push_back(i);
  return out;
}

SupportGraph build_support_graph(const FlowProfile& f, double threshold) {
  SupportGraph g(static_cast<std::size_t>(f.rows()), static_cast<std::size_t>(f.cols()));
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j)
      if (f(i, j) > threshold) g.add_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return g;
}

void validate_cycle(const Cycle& c, std::size_t roads, std::size_t types) {
  const std::size_t r = c.roads.size();
  if (r < 2 || c.types.size() != r) throw InvalidArgument("cycle needs r >= 2 roads and as many types");
  const std::set<std::size_t> rs(c.roads.begin(), c.roads.end());
  const std::set<std::size_t> ts(c.types.begin(), c.types.end());
  if (rs.size() != r || ts.size() != r) throw InvalidArgument("cycle repeats a node");
  if (*rs.rbegin() >= roads || *ts.rbegin() >= types) throw InvalidArgument("cycle node out of range");
}

void validate_cycle(const Cycle& c, const SupportGraph& g) {
  validate_cycle(c, g.num_roads(), g.num_types());
  const std::size_t r = c.length();
  for (std::size_t k = 0; k < r; ++k)
    if (!g.has_edge(c.roads[k], c.types[k]) || !g.has_edge(c.roads[(k + 1) % r], c.types[k]))
      throw InvalidArgument("cycle uses an edge missing from the support graph");
}

Cycle canonical(Cycle c) {
  const std::size_t r = c.length();
  if (r == 0) return c;
  const auto start = static_cast<std::size_t>(
      std::min_element(c.roads.begin(), c.roads.end()) - c.roads.begin());
  std::rotate(c.roads.begin(), c.roads.begin() + static_cast<std::ptrdiff_t>(start), c.roads.end());
  std::rotate(c.types.begin(), c.types.begin() + static_cast<std::ptrdiff_t>(start), c.types.end());
  // Road 0 touches types[0] (forward) and types[r-1] (backward).
  if (c.types.back() < c.types.front()) {
    // Reverse orientation: road_0, type_{r-1}, road_{r-1}, ..., type_0, road_0.
    Cycle rev;
    rev.roads.push_back(c.roads[0]);
    for (std::size_t k = r - 1; k >= 1; --k) rev.roads.push_back(c.roads[k]);
    for (std::size_t k = r; k-- > 0;) rev.types.push_back(c.types[k]);
    c = std::move(rev);
  }
  return c;
}

std::optional<Cycle> find_cycle(const SupportGraph& g) {
  const std::size_t n = g.num_roads();
  const std::size_t m = g.num_types();
  const std::size_t total = n + m;  // roads are nodes [0, n), types [n, n+m)
  auto neighbors = [&](std::size_t v) {
    std::vector<std::size_t> out;
    if (v < n) {
      for (std::size_t j : g.types_on(v)) out.push_back(n + j);
    } else {
      for (std::size_t i : g.roads_of(v - n)) out.push_back(i);
    }
    return out;
  };

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(total, kNone);
  std::vector<int> state(total, 0);  // 0 unseen, 1 on stack, 2 done
  struct Frame {
    std::size_t node;
    std::vector<std::size_t> next;
    std::size_t pos = 0;
  };

  for (std::size_t root = 0; root < total; ++root) {
    if (state[root] != 0) continue;
    std::vector<Frame> stack;
    stack.push_back({root, neighbors(root)});
    state[root] = 1;
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.pos == top.next.size()) {
        state[top.node] = 2;
        stack.pop_back();
        continue;
      }
      const std::size_t w = top.next[top.pos++];
      const std::size_t v = top.node;
      if (w == parent[v]) continue;
      if (state[w] == 1) {
        // Back edge: the stack from w up to v closes a cycle.
        std::vector<std::size_t> nodes;
        for (std::size_t k = stack.size(); k-- > 0;) {
          nodes.push_back(stack[k].node);
          if (stack[k].node == w) break;
        }
        std::reverse(nodes.begin(), nodes.end());  // w ... v
        if (nodes.front() >= n) std::rotate(nodes.begin(), nodes.begin() + 1, nodes.end());
        Cycle c;
        for (std::size_t k = 0; k < nodes.size(); k += 2) {
          c.roads.push_back(nodes[k]);
          c.types.push_back(nodes[k + 1] - n);
        }
        return canonical(std::move(c));
      }
      if (state[w] == 0) {
        parent[w] = v;
        state[w] = 1;
        stack.push_back({w, neighbors(w)});
      }
    }
  }
  return std::nullopt;
}

Eigen::MatrixXd cycle_direction(const Cycle& c, std::size_t roads, std::size_t types) {
  validate_cycle(c, roads, types);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(roads),
                                            static_cast<Eigen::Index>(types));
  const std::size_t r = c.length();
  for (std::size_t k = 0; k < r; ++k) {
    const auto type = static_cast<Eigen::Index>(c.types[k]);
    d(static_cast<Eigen::Index>(c.roads[k]), type) = -1.0;
    d(static_cast<Eigen::Index>(c.roads[(k + 1) % r]), type) = 1.0;
  }
  return d;
}

double max_step(const FlowProfile& f, const Eigen::MatrixXd& d) {
  if (f.rows() != d.rows() || f.cols() != d.cols())
    throw DimensionMismatch("direction and flow shapes differ");
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j)
      if (d(i, j) < 0.0) alpha = std::min(alpha, f(i, j) / -d(i, j));
  if (!std::isfinite(alpha)) throw StageError("max_step", "direction decreases no entry");
  if (!(alpha > 0.0)) throw StageError("max_step", "non-positive step: cycle is not supported by positive flow");
  return alpha;
}

bool types_share_at_most_one_road(const SupportGraph& g) {
  for (std::size_t j = 0; j < g.num_types(); ++j)
    for (std::size_t k = j + 1; k < g.num_types(); ++k) {
      int shared = 0;
      for (std::size_t i = 0; i < g.num_roads(); ++i)
        if (g.has_edge(i, j) && g.has_edge(i, k)) ++shared;
      if (shared > 1) return false;
    }
  return true;
}

CycleBreakResult break_cycles(const NetworkInstance& inst, const FlowProfile& f, double threshold) {
  check_shape(inst, f);
  if (!check_feasible(inst, f).feasible)
    throw StageError("break_cycles", "input routing is not feasible");

  FlowProfile cur = f;
  for (Eigen::Index i = 0; i < cur.rows(); ++i)
    for (Eigen::Index j = 0; j < cur.cols(); ++j)
      if (cur(i, j) <= threshold) cur(i, j) = 0.0;
  cur = renormalize(inst, cur);

  CycleBreakResult out;
  const std::size_t limit = inst.num_roads() * inst.num_types();
  SupportGraph g = build_support_graph(cur, threshold);
  while (auto cycle = find_cycle(g)) {
    if (out.trace.size() >= limit)
      throw StageError("break_cycles", "internal error: more break steps than support entries");
    const Eigen::MatrixXd d = cycle_direction(*cycle, inst.num_roads(), inst.num_types());
    const double alpha = max_step(cur, d);
    const double before = social_cost(inst, cur);

    FlowProfile next = cur + alpha * d;
    // Entries driven to (numerically) zero go exactly to zero; whatever is
    // left follows the same type to the road it was moving to.
    const std::size_t r = cycle->length();
    for (std::size_t k = 0; k < r; ++k) {
      const auto from = static_cast<Eigen::Index>(cycle->roads[k]);
      const auto to = static_cast<Eigen::Index>(cycle->roads[(k + 1) % r]);
      const auto type = static_cast<Eigen::Index>(cycle->types[k]);
      if (next(from, type) <= threshold) {
        next(to, type) += next(from, type);
        next(from, type) = 0.0;
      }
    }

    const double after = social_cost(inst, next);
    const double drift = after - before;
    if (std::abs(drift) > kBreakCostTol * (1.0 + std::abs(before)))
      throw CostDriftError("social cost changed by " + std::to_string(drift) +
                           " along a cycle; the input is not stationary");

    SupportGraph next_graph = build_support_graph(next, threshold);
    BreakStep step{*cycle, alpha, drift, g.edge_count(), next_graph.edge_count()};
    if (step.edges_after >= step.edges_before)
      throw StageError("break_cycles", "internal error: break step removed no edge");
    out.trace.push_back(std::move(step));
    cur = std::move(next);
    g = std::move(next_graph);
  }
  out.flow = std::move(cur);
  return out;
}

}  // namespace hetroute
