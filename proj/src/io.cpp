#include "hetroute/io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hetroute {

ParseError::ParseError(const std::string& source, std::size_t line, std::size_t column,
                       const std::string& what)
    : Error(line > 0 ? source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what
                     : source + ": " + what),
      line_(line),
      column_(column) {}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is the 1-based offset of the offending character.
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t k = 0; k < stop; ++k) {
      if (text[k] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    if (const auto pos = what.find("parse error"); pos != std::string::npos) what = what.substr(pos);
    throw ParseError(source, line, column, what);
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path.string());
}

namespace {

[[noreturn]] void schema_error(const std::string& source, const std::string& where, const std::string& what) {
  throw ParseError(source, 0, 0, where + ": " + what);
}

double number_at(const json& v, const std::string& source, const std::string& where) {
  if (!v.is_number()) schema_error(source, where, "expected a number");
  return v.get<double>();
}

std::vector<double> numbers_at(const json& v, const std::string& source, const std::string& where) {
  if (!v.is_array()) schema_error(source, where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k)
    out.push_back(number_at(v[k], source, where + "[" + std::to_string(k) + "]"));
  return out;
}

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& source,
                    const std::string& where) {
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) schema_error(source, where.empty() ? key : where + "." + key, "unknown key");
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

NetworkInstance instance_from_json(const json& doc, const std::string& source) {
  if (!doc.is_object()) schema_error(source, "instance", "expected an object");
  reject_unknown(doc, {"name", "roads", "demands"}, source, "");
  if (!doc.contains("roads")) schema_error(source, "roads", "missing");
  if (!doc.contains("demands")) schema_error(source, "demands", "missing");
  const json& roads = doc.at("roads");
  if (!roads.is_array() || roads.empty()) schema_error(source, "roads", "expected a non-empty array");
  const std::vector<double> demands = numbers_at(doc.at("demands"), source, "demands");
  if (demands.empty()) schema_error(source, "demands", "expected at least one vehicle type");
  for (std::size_t j = 0; j < demands.size(); ++j)
    if (!(demands[j] > 0.0)) schema_error(source, "demands[" + std::to_string(j) + "]", "demand must be > 0");

  const auto n = static_cast<Eigen::Index>(roads.size());
  const auto m = static_cast<Eigen::Index>(demands.size());
  Eigen::MatrixXd a(n, m);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string where = "roads[" + std::to_string(i) + "]";
    const json& road = roads[static_cast<std::size_t>(i)];
    if (!road.is_object()) schema_error(source, where, "expected an object with keys a and b");
    reject_unknown(road, {"a", "b"}, source, where);
    if (!road.contains("a")) schema_error(source, where + ".a", "missing");
    if (!road.contains("b")) schema_error(source, where + ".b", "missing");
    const std::vector<double> slopes = numbers_at(road.at("a"), source, where + ".a");
    if (static_cast<Eigen::Index>(slopes.size()) != m)
      schema_error(source, where + ".a", "expected " + std::to_string(m) + " slopes, one per demand");
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!(slopes[static_cast<std::size_t>(j)] > 0.0))
        schema_error(source, where + ".a[" + std::to_string(j) + "]", "slope must be > 0");
      a(i, j) = slopes[static_cast<std::size_t>(j)];
    }
    b(i) = number_at(road.at("b"), source, where + ".b");
    if (!(b(i) >= 0.0)) schema_error(source, where + ".b", "free-flow latency must be >= 0");
  }
  std::string name;
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) schema_error(source, "name", "expected a string");
    name = doc.at("name").get<std::string>();
  }
  try {
    return NetworkInstance(a, b, to_vector(demands), name);
  } catch (const InvalidInstance& e) {
    schema_error(source, "instance", e.what());
  }
}

json instance_to_json(const NetworkInstance& inst) {
  json doc;
  if (!inst.name().empty()) doc["name"] = inst.name();
  json roads = json::array();
  for (std::size_t i = 0; i < inst.num_roads(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<double> a(inst.num_types());
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = inst.slopes()(r, static_cast<Eigen::Index>(j));
    roads.push_back({{"a", a}, {"b", inst.free_flow()(r)}});
  }
  doc["roads"] = roads;
  doc["demands"] = std::vector<double>(inst.demand().data(), inst.demand().data() + inst.demand().size());
  return doc;
}

NetworkInstance load_instance(const std::filesystem::path& path) {
  return instance_from_json(read_json_file(path), path.string());
}

Scenario scenario_for_instance(NetworkInstance inst, Mode mode, TollScheme scheme) {
  Scenario s{inst.name(), std::move(inst), mode, scheme, std::nullopt, std::nullopt, RunOptions{}};
  return s;
}

Scenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir,
                            const std::string& source) {
  if (!doc.is_object()) schema_error(source, "scenario", "expected an object");
  reject_unknown(doc, {"name", "description", "instance", "instance_file", "mode", "toll_scheme",
                       "anonymous_tolls", "sweep", "settings"},
                 source, "");
  std::optional<NetworkInstance> inst;
  if (doc.contains("instance") == doc.contains("instance_file"))
    schema_error(source, "instance", "give exactly one of instance or instance_file");
  if (doc.contains("instance")) {
    inst = instance_from_json(doc.at("instance"), source);
  } else {
    if (!doc.at("instance_file").is_string()) schema_error(source, "instance_file", "expected a path string");
    inst = load_instance(base_dir / doc.at("instance_file").get<std::string>());
  }

  auto string_at = [&](const char* key, const std::string& fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc.at(key).is_string()) schema_error(source, key, "expected a string");
    return doc.at(key).get<std::string>();
  };

  Scenario s = scenario_for_instance(std::move(*inst), Mode::kPipeline, TollScheme::kPaper);
  s.name = string_at("name", s.instance.name());
  try {
    s.mode = mode_from_string(string_at("mode", "pipeline"));
  } catch (const InvalidArgument& e) {
    schema_error(source, "mode", e.what());
  }
  try {
    s.toll_scheme = toll_scheme_from_string(string_at("toll_scheme", "paper"));
  } catch (const InvalidArgument& e) {
    schema_error(source, "toll_scheme", e.what());
  }
  if (doc.contains("anonymous_tolls"))
    s.anonymous_tolls = to_vector(numbers_at(doc.at("anonymous_tolls"), source, "anonymous_tolls"));
  if (doc.contains("sweep")) {
    const json& sw = doc.at("sweep");
    if (!sw.is_object()) schema_error(source, "sweep", "expected an object");
    reject_unknown(sw, {"field", "values"}, source, "sweep");
    if (!sw.contains("field") || !sw.at("field").is_string()) schema_error(source, "sweep.field", "expected a string");
    Sweep sweep;
    try {
      sweep.field = FieldPath::parse(sw.at("field").get<std::string>());
    } catch (const InvalidArgument& e) {
      schema_error(source, "sweep.field", e.what());
    }
    if (!sw.contains("values")) schema_error(source, "sweep.values", "missing");
    sweep.values = numbers_at(sw.at("values"), source, "sweep.values");
    s.sweep = std::move(sweep);
  }
  if (doc.contains("settings")) {
    const json& st = doc.at("settings");
    if (!st.is_object()) schema_error(source, "settings", "expected an object");
    reject_unknown(st, {"seed", "starts", "max_iters", "tol_grad", "probe_starts", "max_rounds", "damping",
                        "eps", "oracle", "oracle_grid", "support_threshold"},
                   source, "settings");
    auto count = [&](const char* key) {
      const json& v = st.at(key);
      if (!v.is_number_unsigned()) schema_error(source, std::string("settings.") + key, "expected a nonnegative integer");
      return v.get<std::uint64_t>();
    };
    auto real = [&](const char* key) { return number_at(st.at(key), source, std::string("settings.") + key); };
    auto& o = s.options;
    if (st.contains("seed")) o.solver.seed = o.equilibrium.seed = count("seed");
    if (st.contains("starts")) o.solver.starts = count("starts");
    if (st.contains("max_iters")) o.solver.max_iters = count("max_iters");
    if (st.contains("tol_grad")) o.solver.tol_grad = real("tol_grad");
    if (st.contains("probe_starts")) o.equilibrium.starts = count("probe_starts");
    if (st.contains("max_rounds")) o.equilibrium.max_rounds = count("max_rounds");
    if (st.contains("damping")) o.equilibrium.damping = real("damping");
    if (st.contains("eps")) o.equilibrium.eps = real("eps");
    if (st.contains("oracle")) {
      if (!st.at("oracle").is_boolean()) schema_error(source, "settings.oracle", "expected true or false");
      o.oracle = st.at("oracle").get<bool>();
    }
    if (st.contains("oracle_grid")) o.oracle_grid = real("oracle_grid");
    if (st.contains("support_threshold")) o.support_threshold = real("support_threshold");
  }
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    schema_error(source, "scenario", e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path), path.parent_path(), path.string());
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

json mask_to_json(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(static_cast<bool>(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json cycle_to_json(const Cycle& c) { return {{"roads", c.roads}, {"types", c.types}}; }

std::string toll_label(TollScheme s) {
  switch (s) {
    case TollScheme::kPaper: return "type-differentiated: mu - latency on used roads, P elsewhere";
    case TollScheme::kMarginal: return "assumed definition: a_ij * road load at the optimum";
    case TollScheme::kAnonymous: return "anonymous: one toll per road";
    case TollScheme::kNone: return "untolled";
  }
  return "";
}

}  // namespace

json options_to_json(const RunOptions& o) {
  return {
      {"solver",
       {{"starts", o.solver.starts},
        {"max_iters", o.solver.max_iters},
        {"step_rule", o.solver.step_rule == StepRule::kBacktracking ? "backtracking" : "fixed"},
        {"fixed_step", o.solver.fixed_step},
        {"armijo_c", o.solver.armijo_c},
        {"backtrack_factor", o.solver.backtrack_factor},
        {"tol_grad", o.solver.tol_grad},
        {"seed", o.solver.seed}}},
      {"equilibrium",
       {{"starts", o.equilibrium.starts},
        {"max_rounds", o.equilibrium.max_rounds},
        {"damping", o.equilibrium.damping},
        {"eps", o.equilibrium.eps},
        {"stall_window", o.equilibrium.stall_window},
        {"seed", o.equilibrium.seed}}},
      {"support_threshold", o.support_threshold},
      {"oracle", {{"enabled", o.oracle}, {"grid_step", o.oracle_grid}}},
  };
}

json scenario_to_json(const Scenario& s) {
  json doc{{"name", s.name},
           {"instance", instance_to_json(s.instance)},
           {"mode", to_string(s.mode)},
           {"toll_scheme", to_string(s.toll_scheme)}};
  if (s.anonymous_tolls)
    doc["anonymous_tolls"] =
        std::vector<double>(s.anonymous_tolls->data(), s.anonymous_tolls->data() + s.anonymous_tolls->size());
  if (s.sweep) doc["sweep"] = {{"field", s.sweep->field.text}, {"values", s.sweep->values}};
  return doc;
}

json report_to_json(const Scenario& s, const RunReport& r) {
  json doc;
  doc["provenance"] = options_to_json(s.options);
  doc["scenario"] = scenario_to_json(s);
  doc["status"] = r.status;
  if (!r.failed_stage.empty()) doc["failed_stage"] = r.failed_stage;
  if (!r.message.empty()) doc["message"] = r.message;
  if (r.optimum) {
    doc["optimum"] = {{"flow", matrix_to_json(r.optimum->flow)},
                      {"cost", r.optimum->cost},
                      {"stationarity_residual", r.optimum->stationarity_residual},
                      {"start_index", r.optimum->start_index},
                      {"iterations", r.optimum->iterations}};
  }
  if (r.oracle) {
    doc["oracle"] = {{"grid_step", r.oracle->grid_step},
                     {"grid_cost", r.oracle->grid_cost},
                     {"certified", r.oracle->certified},
                     {"refined", r.oracle->refined}};
  }
  if (r.acyclic) {
    json trace = json::array();
    for (const auto& st : r.acyclic->trace)
      trace.push_back({{"cycle", cycle_to_json(st.cycle)},
                       {"alpha", st.alpha},
                       {"cost_change", st.cost_change},
                       {"edges_before", st.edges_before},
                       {"edges_after", st.edges_after}});
    doc["acyclic"] = {{"flow", matrix_to_json(r.acyclic->flow)}, {"trace", trace}};
    if (r.acyclic_cost) doc["acyclic"]["cost"] = *r.acyclic_cost;
  }
  if (r.tolls) {
    doc["tolls"] = {{"scheme", to_string(r.tolls->scheme)},
                    {"label", toll_label(r.tolls->scheme)},
                    {"tolls", matrix_to_json(r.tolls->tolls)},
                    {"blocked", mask_to_json(r.tolls->blocked)}};
    if (r.constants) doc["tolls"]["constants"] = {{"mu", r.constants->mu}, {"P", r.constants->big_p}};
  }
  if (r.equilibrium) {
    const auto& e = *r.equilibrium;
    doc["equilibrium"] = {{"flow", matrix_to_json(e.flow)},
                          {"costs", matrix_to_json(e.costs)},
                          {"eps_violation", e.eps_violation},
                          {"converged", e.converged},
                          {"status", e.status},
                          {"rounds", e.rounds},
                          {"social_cost", e.social_cost}};
    if (e.distance_to_reference) doc["equilibrium"]["distance_to_reference"] = *e.distance_to_reference;
  }
  if (r.probe) {
    json runs = json::array();
    for (const auto& run : r.probe->runs)
      runs.push_back({{"distance", run.distance},
                      {"eps_violation", run.eps_violation},
                      {"social_cost", run.social_cost},
                      {"rounds", run.rounds},
                      {"converged", run.converged},
                      {"status", run.status}});
    doc["probe"] = {{"starts", r.probe->runs.size()},
                    {"max_distance", r.probe->max_distance},
                    {"non_converged", r.probe->non_converged},
                    {"worst_social_cost", r.probe->worst_social_cost},
                    {"runs", runs}};
  }
  if (r.ratio) doc["ratio"] = *r.ratio;
  if (r.worst_ratio) doc["worst_ratio"] = *r.worst_ratio;
  return doc;
}

json sweep_to_json(const Scenario& s, const std::vector<SweepRow>& rows) {
  json doc;
  doc["provenance"] = options_to_json(s.options);
  doc["scenario"] = scenario_to_json(s);
  json table = json::array();
  for (const auto& row : rows) {
    Scenario point = with_field(s, s.sweep->field, row.value);
    point.mode = Mode::kEquilibrium;
    json entry = report_to_json(point, row.report);
    entry.erase("provenance");
    entry.erase("scenario");
    entry["index"] = row.index;
    entry["value"] = row.value;
    table.push_back(std::move(entry));
  }
  doc["rows"] = table;
  return doc;
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string num_or_blank(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "index,value,optimal_cost,equilibrium_cost,ratio,converged,status\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    os << row.index << ',' << num(row.value) << ','
       << num_or_blank(r.acyclic_cost ? r.acyclic_cost : (r.optimum ? std::optional<double>(r.optimum->cost) : std::nullopt))
       << ',' << (r.equilibrium ? num(r.equilibrium->social_cost) : std::string()) << ','
       << num_or_blank(r.ratio) << ',' << (r.equilibrium && r.equilibrium->converged ? "true" : "false") << ','
       << r.status << '\n';
  }
  return os.str();
}

namespace {

void print_matrix(std::ostringstream& os, const char* title, const Eigen::MatrixXd& m) {
  os << title << " (rows: roads, columns: types)\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "  road " << i << ":";
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ' ' << std::setw(14) << num(m(i, j));
    os << '\n';
  }
}

}  // namespace

std::string report_to_text(const Scenario& s, const RunReport& r) {
  std::ostringstream os;
  os << "scenario: " << (s.name.empty() ? "(unnamed)" : s.name) << "  mode: " << to_string(s.mode)
     << "  tolls: " << to_string(s.toll_scheme) << '\n';
  os << "roads: " << s.instance.num_roads() << "  types: " << s.instance.num_types()
     << "  seed: " << s.options.solver.seed << '\n';
  os << "status: " << r.status;
  if (!r.failed_stage.empty()) os << " (" << r.failed_stage << ": " << r.message << ")";
  os << '\n';
  if (r.optimum) {
    print_matrix(os, "optimal flow", r.optimum->flow);
    os << "optimal cost: " << num(r.optimum->cost)
       << "  stationarity residual: " << num(r.optimum->stationarity_residual) << '\n';
  }
  if (r.oracle)
    os << "oracle grid " << num(r.oracle->grid_step) << ": cost " << num(r.oracle->grid_cost)
       << (r.oracle->certified ? "  certified" : "  NOT certified") << '\n';
  if (r.acyclic) {
    os << "cycle-breaking steps: " << r.acyclic->trace.size() << '\n';
    print_matrix(os, "acyclic optimal flow", r.acyclic->flow);
  }
  if (r.tolls) {
    if (r.constants) os << "mu: " << num(r.constants->mu) << "  P: " << num(r.constants->big_p) << '\n';
    print_matrix(os, "tolls", r.tolls->tolls);
  }
  if (r.equilibrium) {
    print_matrix(os, "equilibrium flow", r.equilibrium->flow);
    os << "equilibrium cost: " << num(r.equilibrium->social_cost) << "  violation: "
       << num(r.equilibrium->eps_violation) << "  rounds: " << r.equilibrium->rounds << "  "
       << r.equilibrium->status << '\n';
  }
  if (r.probe)
    os << "probe: " << r.probe->runs.size() << " starts, max distance " << num(r.probe->max_distance)
       << ", non-converged " << r.probe->non_converged << '\n';
  if (r.ratio) os << "efficiency ratio: " << num(*r.ratio) << '\n';
  if (r.worst_ratio) os << "worst probe ratio: " << num(*r.worst_ratio) << '\n';
  return os.str();
}

std::string sweep_to_text(const Scenario& s, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "scenario: " << (s.name.empty() ? "(unnamed)" : s.name) << "  sweep: " << s.sweep->field.text
     << "  tolls: " << to_string(s.toll_scheme) << '\n';
  os << std::setw(6) << "index" << std::setw(16) << "value" << std::setw(16) << "optimum" << std::setw(16)
     << "equilibrium" << std::setw(16) << "ratio" << "  status\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    os << std::setw(6) << row.index << std::setw(16) << num(row.value) << std::setw(16)
       << num_or_blank(r.acyclic_cost) << std::setw(16)
       << (r.equilibrium ? num(r.equilibrium->social_cost) : std::string()) << std::setw(16)
       << num_or_blank(r.ratio) << "  " << r.status << '\n';
  }
  return os.str();
}

}  // namespace hetroute
