// Copyright 2026 The RTLForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "rtlforge/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

using namespace rtlforge;
using namespace rtlforge::pipeline;
using nlohmann::json;
using validation::FixtureEntry;
using validation::FixtureRunner;
using validation::ToolOutput;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = RTLFORGE_FIXTURES;

ToolOutput ok(std::string out = "") { return ToolOutput{0, std::move(out), "", false, false}; }
ToolOutput fail(std::string err) { return ToolOutput{1, "", std::move(err), false, false}; }

std::shared_ptr<FixtureRunner> toy_tools() { return FixtureRunner::load(kFixtures + "/toy_tools.json"); }

std::string fenced(const std::string& code) { return "```verilog\n" + code + "```\n"; }

std::string and2(const std::string& marker = "") {
  return "module and2(input a, input b, output y);\n  assign y = a & b;" + (marker.empty() ? "" : " // " + marker) +
         "\nendmodule\n";
}

Problem and2_problem(std::vector<std::string> script) {
  Problem p;
  p.id = "and2";
  p.spec = Spec{"and2", "A two-input AND gate with inputs a and b and output y.", Category::kCombinational, {}, {}};
  p.script = std::move(script);
  return p;
}

// lint fails for any source carrying one of the markers
std::shared_ptr<FixtureRunner> marker_tools(const std::vector<std::string>& markers) {
  auto t = toy_tools();
  for (const auto& m : markers)
    t->add(FixtureEntry{"iverilog", "", "", {m}, fail("design.v:2: syntax error\n")});
  return t;
}

PipelineConfig base_config() {
  PipelineConfig c;
  c.planner = rl::PlannerKind::kHeuristic;
  return c;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("rtlforge_pipeline_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Thought, NineCategoriesRoundTrip) {
  const std::vector<std::string> names = {"Analysis", "Bottleneck", "Proposal", "Retrieval", "Generation",
                                          "Validation", "Decision", "Error", "Progress"};
  ASSERT_EQ(kNumThoughtCategories, 9);
  for (int i = 0; i < kNumThoughtCategories; ++i) {
    EXPECT_EQ(thought_category_name(static_cast<ThoughtCategory>(i)), names[i]);
    EXPECT_EQ(parse_thought_category(names[i]), static_cast<ThoughtCategory>(i));
  }
  EXPECT_THROW(parse_thought_category("Musing"), ConfigError);
}

TEST(Thought, DecisionLineAndEmptyEvidence) {
  std::ostringstream out;
  ThoughtEvent e{ThoughtCategory::kDecision, "Debug agent chosen", 0.8, {}, 12.5};
  emit_thought(e, out);
  const auto line = out.str();
  ASSERT_EQ(line.back(), '\n');
  const auto j = json::parse(line);
  EXPECT_EQ(j["category"], "Decision");
  EXPECT_DOUBLE_EQ(j["confidence"].get<double>(), 0.8);
  ASSERT_TRUE(j.contains("evidence"));
  EXPECT_TRUE(j["evidence"].is_array());
  EXPECT_TRUE(j["evidence"].empty());
  EXPECT_EQ(thought_from_json(j), e);
}

TEST(Thought, ThousandEventsMonotone) {
  std::ostringstream out;
  int tick = 0;
  // a clock that sometimes steps backwards
  ThoughtStream s(&out, [&] { ++tick; return 100.0 + (tick % 7 == 0 ? -5.0 : tick * 0.001); });
  for (int i = 0; i < 1000; ++i) s.emit(ThoughtCategory::kProgress, "step " + std::to_string(i));
  std::istringstream in(out.str());
  std::string line;
  int n = 0;
  double last = -1;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    EXPECT_GE(j["timestamp"].get<double>(), last);
    last = j["timestamp"].get<double>();
    ++n;
  }
  EXPECT_EQ(n, 1000);
  EXPECT_EQ(s.count(ThoughtCategory::kProgress), 1000u);
}

TEST(Config, DefaultsAndValidation) {
  PipelineConfig c;
  EXPECT_EQ(c.max_iterations, 5);
  EXPECT_EQ(c.parallelism, 4);
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(config_from_json({{"max_iterations", 0}}), ConfigError);
  EXPECT_THROW(config_from_json({{"max_iteration", 3}}), ConfigError);
  EXPECT_THROW(config_from_json({{"planner", "oracle"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"backend", "local"}}), ConfigError);
  const auto d = config_from_json({{"planner", "mpc"}, {"seed", 9}, {"prices", {{"m", {{"input", 1e-6}, {"output", 2e-6}}}}}});
  EXPECT_EQ(d.planner, rl::PlannerKind::kMpc);
  EXPECT_EQ(d.seed, 9u);
  ASSERT_TRUE(d.prices);
  EXPECT_DOUBLE_EQ(d.prices->at("m").output, 2e-6);
  EXPECT_EQ(config_from_json(config_to_json(d)).seed, 9u);
}

TEST(Config, RelativePathsResolveAgainstFile) {
  const auto dir = temp_dir("config");
  text::write_file((dir / "cfg.json").string(), R"({"tool_fixtures": "tools.json", "kb_path": "/abs/kb.json"})");
  const auto c = load_config((dir / "cfg.json").string());
  EXPECT_EQ(c.tool_fixtures, (dir / "tools.json").string());
  EXPECT_EQ(c.kb_path, "/abs/kb.json");
  fs::remove_all(dir);
}

TEST(Cost, Arithmetic) {
  RunRecord r;
  r.calls.push_back({"generation", "model-a", 1000, 500});
  PriceTable prices = {{"model-a", {2e-6, 6e-6}}};
  EXPECT_NEAR(estimate_cost(r, prices), 1000 * 2e-6 + 500 * 6e-6, 1e-15);
  EXPECT_NEAR(estimate_cost(r, prices), 0.005, 1e-12);
  EXPECT_THROW(estimate_cost(r, {}), UnpricedModel);
  EXPECT_DOUBLE_EQ(estimate_cost(RunRecord{}, {}), 0.0);
}

TEST(Generate, SymbolicZeroCalls) {
  Pipeline pl(base_config(), nullptr, toy_tools());
  Problem p;
  p.spec = Spec{"kx", "Implement the Karnaugh map below.\n\na\\b 0 1\n0 0 1\n1 1 0\n", Category::kCombinational, {}, {}};
  ThoughtStream trace;
  const auto r = pl.generate_module(p, 0, &trace);
  EXPECT_EQ(r.record.outcome, Outcome::kSolved);
  EXPECT_EQ(r.record.iterations_used, 0);
  EXPECT_TRUE(r.record.calls.empty());
  EXPECT_EQ(r.record.gate_config, "DeterministicKmap");
  EXPECT_NE(r.source.find("assign f = a ^ b;"), std::string::npos);
  PriceTable empty;
  EXPECT_DOUBLE_EQ(estimate_cost(r.record, empty), 0.0);
  EXPECT_EQ(trace.count(ThoughtCategory::kGeneration), 1u);

  Pipeline no_tools(base_config(), nullptr, std::make_shared<FixtureRunner>());
  const auto u = no_tools.generate_module(p);
  EXPECT_EQ(u.record.outcome, Outcome::kSolved);
  EXPECT_FALSE(u.record.final_report);
}

TEST(Generate, CorrectFirstAttempt) {
  Pipeline pl(base_config(), nullptr, toy_tools());
  ThoughtStream trace;
  const auto r = pl.generate_module(and2_problem({fenced(and2())}), 0, &trace);
  EXPECT_EQ(r.record.outcome, Outcome::kSolved);
  EXPECT_EQ(r.record.iterations_used, 1);
  EXPECT_EQ(r.record.generation_calls, 1);
  EXPECT_EQ(r.record.required_stage, validation::Stage::kSynthPassed);
  ASSERT_TRUE(r.record.final_report);
  EXPECT_EQ(r.record.final_report->stage_reached, validation::Stage::kSynthPassed);
  EXPECT_EQ(r.source, and2());
  EXPECT_EQ(pl.transitions().size(), 1u);
  EXPECT_TRUE(pl.transitions().snapshot()[0].done);
  EXPECT_DOUBLE_EQ(r.record.iterations[0].reward.term, 60.0);
}

TEST(Generate, FourFailuresThenPass) {
  std::vector<std::string> script, markers;
  for (int i = 1; i <= 4; ++i) {
    markers.push_back("broken_" + std::to_string(i));
    script.push_back(fenced(and2(markers.back())));
  }
  script.push_back(fenced(and2()));
  Pipeline pl(base_config(), nullptr, marker_tools(markers));
  ThoughtStream trace;
  const auto r = pl.generate_module(and2_problem(script), 0, &trace);
  EXPECT_EQ(r.record.outcome, Outcome::kSolved);
  EXPECT_EQ(r.record.iterations_used, 5);
  EXPECT_EQ(r.record.generation_calls, 5);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(r.record.iterations[i].report.stage_reached, validation::Stage::kNone);
  EXPECT_EQ(r.record.iterations[0].rule, "first_simple");
  EXPECT_EQ(r.record.iterations[0].agent, "Fast");
  for (int i = 1; i < 5; ++i) {
    EXPECT_EQ(r.record.iterations[i].rule, "lint_errors") << i;
    EXPECT_EQ(r.record.iterations[i].agent, "Debug") << i;
  }
  EXPECT_EQ(r.record.iterations[4].report.stage_reached, validation::Stage::kSynthPassed);
  const auto snap = pl.transitions().snapshot();
  ASSERT_EQ(snap.size(), 5u);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(snap[i].done);
  EXPECT_TRUE(snap[4].done);
  EXPECT_EQ(trace.count(ThoughtCategory::kDecision), 2u + 5u);
}

TEST(Generate, FiveFailuresExhausted) {
  std::vector<std::string> script(5, fenced(and2("broken_x")));
  script.push_back(fenced(and2()));  // never reached
  Pipeline pl(base_config(), nullptr, marker_tools({"broken_x"}));
  const auto r = pl.generate_module(and2_problem(script));
  EXPECT_EQ(r.record.outcome, Outcome::kExhausted);
  EXPECT_EQ(r.record.iterations_used, 5);
  EXPECT_EQ(r.record.generation_calls, 5);
  EXPECT_EQ(r.record.calls.size(), 5u);
  EXPECT_LE(r.record.iterations_used, pl.config().max_iterations);
}

TEST(Generate, TraceCoversCallsToolsAndDecisions) {
  Pipeline pl(base_config(), nullptr, marker_tools({"broken_1"}));
  ThoughtStream trace;
  const auto r = pl.generate_module(and2_problem({fenced(and2("broken_1")), fenced(and2())}), 0, &trace);
  int tool_runs = 0;
  for (const auto& e : trace.events())
    if (e.category == ThoughtCategory::kValidation && !e.evidence.empty() && e.evidence[0].rfind("tool:", 0) == 0)
      ++tool_runs;
  EXPECT_EQ(tool_runs, 3);  // lint, then lint and synth
  EXPECT_EQ(trace.count(ThoughtCategory::kGeneration), r.record.calls.size());
  int planner = 0;
  for (const auto& e : trace.events())
    if (e.category == ThoughtCategory::kDecision && e.message.rfind("iteration ", 0) == 0) ++planner;
  EXPECT_EQ(planner, r.record.iterations_used);
  double last = 0;
  for (const auto& e : trace.events()) {
    EXPECT_GE(e.timestamp, last);
    last = e.timestamp;
  }
}

TEST(Generate, ReproducibleRecords) {
  auto run = [] {
    Pipeline pl(base_config(), nullptr, marker_tools({"broken_1"}));
    return run_record_to_json(pl.generate_module(and2_problem({fenced(and2("broken_1")), fenced(and2())})).record);
  };
  const auto a = run(), b = run();
  EXPECT_TRUE(a.contains("timing"));
  EXPECT_EQ(without_timing(a).dump(), without_timing(b).dump());
}

TEST(Generate, BackendFailureConsumesIteration) {
  auto cfg = base_config();
  cfg.max_iterations = 3;
  Pipeline pl(cfg, nullptr, marker_tools({"broken_1"}));
  const auto r = pl.generate_module(and2_problem({fenced(and2("broken_1"))}));
  EXPECT_EQ(r.record.outcome, Outcome::kExhausted);
  EXPECT_EQ(r.record.iterations_used, 3);
  EXPECT_FALSE(r.record.iterations[1].error.empty());
  EXPECT_EQ(r.record.generation_calls, 3);
  EXPECT_GT(r.record.iterations[1].retries, 0);
}

TEST(Generate, TokenBudgetStopsRun) {
  auto cfg = base_config();
  cfg.max_tokens = 1;
  Pipeline pl(cfg, nullptr, marker_tools({"broken_1"}));
  const auto r = pl.generate_module(and2_problem({fenced(and2("broken_1")), fenced(and2())}));
  EXPECT_EQ(r.record.outcome, Outcome::kExhausted);
  EXPECT_EQ(r.record.iterations_used, 1);
  EXPECT_EQ(r.record.error, "token budget exhausted");
}

TEST(Generate, MissingBackendFailsFast) {
  Pipeline pl(base_config(), nullptr, toy_tools());
  EXPECT_THROW(pl.generate_module(and2_problem({})), ConfigError);
  EXPECT_THROW(Pipeline(PipelineConfig{.max_iterations = 0}), ConfigError);
}

TEST(Generate, ProvidedAndGeneratedTestbench) {
  Pipeline pl(base_config(), nullptr, toy_tools());
  const auto problems = load_problems(kFixtures + "/toy_suite");
  for (const auto& p : problems) {
    if (p.id == "g2_counter") {
      const auto r = pl.generate_module(p);
      EXPECT_EQ(r.record.testbench, "provided");
      EXPECT_EQ(r.record.required_stage, validation::Stage::kSimPassed);
      EXPECT_EQ(r.record.outcome, Outcome::kSolved);
    }
    if (p.id == "g5_shift") {
      const auto r = pl.generate_module(p);
      EXPECT_EQ(r.record.testbench, "generated");
      ASSERT_EQ(r.record.calls.size(), 2u);
      EXPECT_EQ(r.record.calls[0].purpose, "testbench");
      EXPECT_EQ(r.record.generation_calls, 1);
      EXPECT_EQ(r.record.outcome, Outcome::kSolved);
      ASSERT_TRUE(r.record.final_report->sim);
      EXPECT_TRUE(r.record.final_report->sim->passed);
    }
    if (p.id == "g4_waveform") {
      const auto r = pl.generate_module(p);
      EXPECT_EQ(r.record.routing.tier, Tier::kWaveformSpecialist);
      EXPECT_EQ(r.record.iterations[0].agent, "Waveform");
    }
  }
}

TEST(Generate, HierarchicalDispatch) {
  Pipeline pl(base_config(), nullptr, toy_tools());
  for (const auto& p : load_problems(kFixtures + "/toy_suite")) {
    if (p.id != "h1_soc") continue;
    ThoughtStream trace;
    const auto r = pl.generate_module(p, 0, &trace);
    EXPECT_TRUE(r.record.routing.hierarchical);
    EXPECT_EQ(r.record.outcome, Outcome::kSolved) << run_record_to_json(r.record).dump(2);
    EXPECT_EQ(r.record.iterations_used, 1);
    EXPECT_EQ(r.record.calls.size(), 5u);
    EXPECT_EQ(r.record.hierarchy["order"], json({"alu", "regfile", "uart_tx", "soc_top"}));
    EXPECT_EQ(r.record.final_report->stage_reached, validation::Stage::kSynthPassed);
  }
}

TEST(Benchmark, ToySuiteAllSolved) {
  auto cfg = base_config();
  cfg.prices = PriceTable{};
  for (const auto& prof : agents::AgentProfiles::builtin().all()) (*cfg.prices)[prof.model_id] = {1e-6, 2e-6};
  Pipeline pl(cfg, nullptr, toy_tools());
  const auto out = temp_dir("bench");
  const auto s = run_benchmark(kFixtures + "/toy_suite", pl, {(out / "runs").string(), (out / "traces").string()});
  EXPECT_EQ(s.total, 10);
  EXPECT_DOUBLE_EQ(s.pass_at_1, 1.0);
  EXPECT_TRUE(s.failures.empty());
  ASSERT_TRUE(s.total_cost);
  double cost = 0;
  for (const auto& r : s.records) cost += estimate_cost(r, *cfg.prices);
  EXPECT_NEAR(*s.total_cost, cost, 1e-12);
  EXPECT_TRUE(fs::exists(out / "runs" / "summary.json"));
  EXPECT_TRUE(fs::exists(out / "runs" / "records" / "g3_mux.json"));
  EXPECT_TRUE(fs::exists(out / "traces" / "h1_soc.jsonl"));
  const auto summary = json::parse(text::read_file((out / "runs" / "summary.json").string()));
  int listed = 0;
  for (const auto& [cat, v] : summary["per_category"].items()) listed += v["total"].get<int>();
  EXPECT_EQ(listed, 10);
  EXPECT_GE(summary["per_category"]["combinational"]["total"].get<int>(), 6);
  fs::remove_all(out);
}

TEST(Benchmark, TwoAlwaysFailing) {
  auto problems = load_problems(kFixtures + "/toy_suite");
  int broken = 0;
  for (auto& p : problems)
    if (p.id == "g1_and3" || p.id == "g3_mux") {
      p.script.assign(5, fenced("module " + p.spec.name + "(input a, output y);\n  assign y = draft_sel;\nendmodule\n"));
      ++broken;
    }
  ASSERT_EQ(broken, 2);
  Pipeline pl(base_config(), nullptr, toy_tools());
  const auto s = run_benchmark(problems, pl);
  EXPECT_DOUBLE_EQ(s.pass_at_1, 0.8);
  EXPECT_EQ(s.failures, (std::vector<std::string>{"g1_and3", "g3_mux"}));
}

TEST(Benchmark, EmptyDirectory) {
  const auto dir = temp_dir("empty");
  Pipeline pl(base_config(), nullptr, toy_tools());
  try {
    run_benchmark(dir.string(), pl);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no problems found"), std::string::npos);
  }
  fs::remove_all(dir);
}
