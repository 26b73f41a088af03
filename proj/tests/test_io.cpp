#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <functional>

#include "hetroute/io.hpp"

using namespace hetroute;

namespace {

const char* kInstance = R"({
  "name": "tiny",
  "roads": [
    {"a": [1.0, 2.0], "b": 0.0},
    {"a": [0.5, 1.0], "b": 1.5}
  ],
  "demands": [1.0, 0.5]
})";

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "hetroute_test_io";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("instance documents parse and round-trip") {
  const auto inst = instance_from_json(parse_json_text(kInstance, "tiny"));
  CHECK(inst.name() == "tiny");
  CHECK(inst.num_roads() == 2);
  CHECK(inst.num_types() == 2);
  CHECK(inst.slope(0, 1) == 2.0);
  CHECK(inst.free_flow()(1) == 1.5);
  CHECK(inst.demand()(1) == 0.5);

  const auto again = instance_from_json(instance_to_json(inst));
  CHECK(again.slopes() == inst.slopes());
  CHECK(again.free_flow() == inst.free_flow());
  CHECK(again.demand() == inst.demand());
  CHECK(again.name() == inst.name());
}

TEST_CASE("schema violations name the offending field") {
  auto bad = [](const std::string& text) {
    return error_of([&] { instance_from_json(parse_json_text(text, "doc")); });
  };
  CHECK(bad(R"({"roads": [{"a": [1, 0], "b": 0}], "demands": [1, 1]})").find("roads[0].a[1]") !=
        std::string::npos);
  CHECK(bad(R"({"roads": [{"a": [1], "b": -1}], "demands": [1]})").find("roads[0].b") != std::string::npos);
  CHECK(bad(R"({"roads": [{"a": [1], "b": 0}], "demands": [0]})").find("demands[0]") != std::string::npos);
  CHECK(bad(R"({"roads": [{"a": [1, 2], "b": 0}], "demands": [1]})").find("roads[0].a") != std::string::npos);
  CHECK(bad(R"({"roads": [{"a": ["x"], "b": 0}], "demands": [1]})").find("roads[0].a[0]") != std::string::npos);
  CHECK(bad(R"({"roads": [], "demands": [1]})").find("roads") != std::string::npos);
  CHECK(bad(R"({"roads": [{"a": [1], "b": 0}]})").find("demands") != std::string::npos);
  CHECK(bad(R"({"roads": [{"a": [1], "b": 0, "c": 2}], "demands": [1]})").find("unknown key") !=
        std::string::npos);
  CHECK(bad(R"([1, 2])").find("expected an object") != std::string::npos);
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_json_text("{\n  \"roads\": [\n    {\"a\": [1,], \"b\": 0}\n  ]\n}", "broken.json");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 1);
    CHECK(std::string(e.what()).find("broken.json:3:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_json_file("/nonexistent/instance.json"), ParseError);
}

TEST_CASE("scenario documents") {
  const auto doc = parse_json_text(R"({
    "name": "study",
    "instance": {"roads": [{"a": [1], "b": 0}, {"a": [1], "b": 1}], "demands": [1]},
    "mode": "poa-study",
    "toll_scheme": "none",
    "sweep": {"field": "roads[1].b", "values": [0.0, 0.5, 1.0]},
    "settings": {"seed": 7, "starts": 4, "probe_starts": 5, "eps": 1e-8, "oracle": true, "oracle_grid": 0.05}
  })", "study");
  const Scenario s = scenario_from_json(doc, ".", "study");
  CHECK(s.name == "study");
  CHECK(s.mode == Mode::kPoaStudy);
  CHECK(s.toll_scheme == TollScheme::kNone);
  REQUIRE(s.sweep.has_value());
  CHECK(s.sweep->field.kind == FieldPath::Kind::kFreeFlow);
  CHECK(s.sweep->field.first == 1);
  CHECK(s.sweep->values.size() == 3);
  CHECK(s.options.solver.seed == 7);
  CHECK(s.options.equilibrium.seed == 7);
  CHECK(s.options.solver.starts == 4);
  CHECK(s.options.equilibrium.starts == 5);
  CHECK(s.options.equilibrium.eps == 1e-8);
  CHECK(s.options.oracle);
  CHECK(s.options.oracle_grid == 0.05);

  const json back = scenario_to_json(s);
  CHECK(back.at("sweep").at("field") == "roads[1].b");
  CHECK(back.at("mode") == "poa-study");
}

TEST_CASE("scenario rejections") {
  auto bad = [](const std::string& text) {
    return error_of([&] { scenario_from_json(parse_json_text(text, "s"), ".", "s"); });
  };
  const std::string inst = R"("instance": {"roads": [{"a": [1], "b": 0}], "demands": [1]})";
  CHECK_FALSE(bad("{" + inst + R"(, "mode": "pipeline"})").size());
  CHECK(bad("{" + inst + R"(, "mode": "sideways"})").find("mode") != std::string::npos);
  CHECK(bad("{" + inst + R"(, "toll_scheme": "pigou"})").find("toll_scheme") != std::string::npos);
  CHECK(bad("{" + inst + R"(, "mode": "pipeline", "sweep": {"field": "demands[0]", "values": [1]}})")
            .find("sweep") != std::string::npos);
  CHECK(bad("{" + inst + R"(, "mode": "poa-study"})").find("sweep") != std::string::npos);
  CHECK(bad("{" + inst + R"(, "mode": "poa-study", "sweep": {"field": "roads[0].c", "values": [1]}})")
            .find("sweep.field") != std::string::npos);
  CHECK(bad("{" + inst + R"(, "settings": {"speed": 3}})").find("settings.speed") != std::string::npos);
  CHECK(bad(R"({"mode": "pipeline"})").find("instance") != std::string::npos);
  CHECK(bad("{" + inst + R"(, "settings": {"starts": -1}})").size() > 0);
}

TEST_CASE("field paths") {
  const auto a = FieldPath::parse("roads[2].a[1]");
  CHECK(a.kind == FieldPath::Kind::kSlope);
  CHECK(a.first == 2);
  CHECK(a.second == 1);
  CHECK(FieldPath::parse("demands[0]").kind == FieldPath::Kind::kDemand);
  CHECK(FieldPath::parse("anonymous_tolls[1]").kind == FieldPath::Kind::kAnonymousToll);
  CHECK_THROWS_AS(FieldPath::parse("roads[x].b"), InvalidArgument);
  CHECK_THROWS_AS(FieldPath::parse("demand[0]"), InvalidArgument);
}

TEST_CASE("scenario files resolve instance paths relative to themselves") {
  const auto dir = scratch_dir();
  {
    std::ofstream(dir / "inst.json") << kInstance;
    std::ofstream(dir / "scen.json") << R"({"instance_file": "inst.json", "mode": "optimum"})";
  }
  const Scenario s = load_scenario(dir / "scen.json");
  CHECK(s.instance.num_roads() == 2);
  CHECK(s.mode == Mode::kOptimum);
  CHECK(s.name == "tiny");
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv output header and blank cells") {
  SweepRow row;
  row.index = 3;
  row.value = 0.25;
  row.report.status = "stage-failure";
  const std::string csv = sweep_to_csv({row});
  CHECK(csv.rfind("index,value,optimal_cost,equilibrium_cost,ratio,converged,status\n", 0) == 0);
  CHECK(csv.find("3,0.25,,,,false,stage-failure\n") != std::string::npos);
  CHECK(sweep_to_csv({}) == "index,value,optimal_cost,equilibrium_cost,ratio,converged,status\n");
}
