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
#include "rtlforge/hierarchy.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "rtlforge/errors.hpp"
#include "rtlforge/verilog.hpp"

using namespace rtlforge;
using namespace rtlforge::hier;
using nlohmann::json;
using validation::FixtureEntry;
using validation::FixtureRunner;
using validation::ToolOutput;

namespace {

json sub(std::string name, std::vector<std::string> deps, std::string desc = "") {
  if (desc.empty()) desc = name + " block";
  return {{"name", name},
          {"description", desc},
          {"interface", json::array({{{"name", "a"}, {"dir", "input"}, {"width", 8}},
                                     {{"name", "y"}, {"dir", "output"}, {"width", 8}}})},
          {"dependencies", deps}};
}

json soc_plan_json(bool with_top = true) {
  json j = {{"submodules", json::array({sub("alu", {}), sub("regfile", {}), sub("decoder", {}),
                                        sub("pipeline", {"alu", "regfile", "decoder"}), sub("icache", {}),
                                        sub("uart", {}), sub("soc_top", {"pipeline", "icache", "uart"})})}};
  if (with_top) j["top"] = "soc_top";
  return j;
}

json eight_plan_json() {
  return {{"submodules",
           json::array({sub("alu", {}), sub("regfile", {}), sub("decoder", {}), sub("hazard", {}),
                        sub("pipeline", {"alu", "regfile", "decoder", "hazard"}), sub("icache", {}),
                        sub("uart", {}), sub("soc_top", {"pipeline", "icache", "uart"})})},
          {"top", "soc_top"}};
}

ToolOutput ok(std::string out = "") { return ToolOutput{0, std::move(out), "", false, false}; }
ToolOutput fail(std::string err) { return ToolOutput{1, "", std::move(err), false, false}; }

// Brute force: among all dependency-respecting permutations, the
// lexicographically smallest when the top sorts after every other name.
std::vector<std::string> oracle_order(const DecompositionPlan& plan) {
  std::vector<std::string> names;
  for (const auto& s : plan.submodules) names.push_back(s.name);
  std::sort(names.begin(), names.end());
  auto key = [&](const std::string& n) { return n == plan.top ? std::string("\x7f") : n; };
  std::vector<std::string> best_keys, best;
  do {
    std::map<std::string, size_t> pos;
    for (size_t i = 0; i < names.size(); ++i) pos[names[i]] = i;
    bool valid = true;
    for (const auto& s : plan.submodules)
      for (const auto& d : s.dependencies)
        if (pos[d] > pos[s.name]) valid = false;
    if (!valid) continue;
    std::vector<std::string> keys;
    for (const auto& n : names) keys.push_back(key(n));
    if (best.empty() || keys < best_keys) {
      best_keys = keys;
      best = names;
    }
  } while (std::next_permutation(names.begin(), names.end()));
  return best;
}

std::string interface_module(const std::string& prompt) {
  const auto at = prompt.find("=== INTERFACE ===\nmodule ");
  if (at == std::string::npos) return {};
  const auto begin = at + std::string("=== INTERFACE ===\nmodule ").size();
  const auto end = prompt.find_first_of(" (;", begin);
  return prompt.substr(begin, end - begin);
}

std::string canned_module(const DecompositionPlan& plan, const std::string& name) {
  std::string out = "module " + name + " (input wire [7:0] a, output wire [7:0] y);\n";
  for (const auto& d : plan.find(name)->dependencies) out += "  " + d + " u_" + d + " (.a(a), .y());\n";
  out += "  assign y = a; // " + name + "_body\nendmodule\n";
  return out;
}

struct Harness {
  DecompositionPlan plan;
  std::shared_ptr<FixtureRunner> tools = std::make_shared<FixtureRunner>();
  validation::Validator validator{tools};
  std::map<std::string, std::string> extra;  // appended to a module's response
  agents::MockBackend backend{[this](const agents::CompletionRequest& r) {
    const auto name = interface_module(r.user_prompt);
    return "```verilog\n" + canned_module(plan, name) + extra[name] + "```\n";
  }};

  explicit Harness(const json& j) : plan(plan_from_json(j)) {
    tools->set_default("verilator", ok());
    tools->set_default("iverilog", ok());
  }
};

}  // namespace

TEST(Plan, SocPlanParses) {
  const auto plan = plan_from_json(soc_plan_json());
  ASSERT_EQ(plan.submodules.size(), 7u);
  EXPECT_EQ(plan.top, "soc_top");
  EXPECT_EQ(plan.find("pipeline")->dependencies, (std::vector<std::string>{"alu", "regfile", "decoder"}));
  EXPECT_EQ(plan.find("alu")->interface[0], (PortSpec{"a", "input", 8}));
  EXPECT_EQ(plan_from_json(plan_to_json(plan)), plan);
}

TEST(Plan, TopInferredFromDependents) {
  EXPECT_EQ(plan_from_json(soc_plan_json(false)).top, "soc_top");

  json j = {{"submodules", json::array({sub("core", {}), sub("mem_ctrl", {}), sub("soc_main", {"core"}),
                                        sub("debug_port", {"mem_ctrl"})})}};
  EXPECT_EQ(plan_from_json(j, "soc").top, "soc_main");
  EXPECT_EQ(plan_from_json(j, "debug").top, "debug_port");
}

TEST(Plan, CardinalityAndStructure) {
  json three = {{"submodules", json::array({sub("a", {}), sub("b", {"a"}), sub("c", {"b"})})}};
  EXPECT_THROW(plan_from_json(three), DecompositionMalformed);
  json nine = {{"submodules", json::array()}};
  for (int i = 0; i < 9; ++i) nine["submodules"].push_back(sub("m" + std::to_string(i), {}));
  EXPECT_THROW(plan_from_json(nine), DecompositionMalformed);
  nine["submodules"].erase(8);
  EXPECT_NO_THROW(plan_from_json(nine));

  auto unknown = soc_plan_json();
  unknown["submodules"][0]["dependencies"] = {"fpu"};
  EXPECT_THROW(plan_from_json(unknown), DecompositionMalformed);
  auto dup = soc_plan_json();
  dup["submodules"][1]["name"] = "alu";
  EXPECT_THROW(plan_from_json(dup), DecompositionMalformed);
  auto bad_name = soc_plan_json();
  bad_name["submodules"][0]["name"] = "2alu";
  EXPECT_THROW(plan_from_json(bad_name), DecompositionMalformed);
  auto bad_top = soc_plan_json();
  bad_top["top"] = "nowhere";
  EXPECT_THROW(plan_from_json(bad_top), DecompositionMalformed);
  EXPECT_THROW(plan_from_json(json::array()), DecompositionMalformed);
}

TEST(Plan, CycleReported) {
  json j = {{"submodules", json::array({sub("a", {"b"}), sub("b", {"c"}), sub("c", {"a"}), sub("d", {"a"})})}};
  try {
    plan_from_json(j);
    FAIL() << "expected CycleError";
  } catch (const CycleError& e) {
    EXPECT_EQ(e.cycle(), (std::vector<std::string>{"a", "b", "c", "a"}));
    EXPECT_STREQ(e.what(), "dependency cycle: a -> b -> c -> a");
  }
  json self = {{"submodules", json::array({sub("a", {"a"}), sub("b", {}), sub("c", {}), sub("d", {})})}};
  EXPECT_THROW(plan_from_json(self), CycleError);
}

TEST(Topo, SocPlanOrder) {
  const auto plan = plan_from_json(soc_plan_json());
  const auto order = topo_order(plan);
  EXPECT_EQ(order, oracle_order(plan));
  EXPECT_EQ(order, (std::vector<std::string>{"alu", "decoder", "icache", "regfile", "pipeline", "uart", "soc_top"}));
}

TEST(Topo, TopHeldBack) {
  DecompositionPlan plan;
  plan.submodules = {{"a_top", "", {}, {}}, {"b", "", {}, {}}, {"c", "", {}, {"b"}}, {"d", "", {}, {}}};
  plan.top = "a_top";
  EXPECT_EQ(topo_order(plan), (std::vector<std::string>{"b", "c", "d", "a_top"}));
}

TEST(Topo, RandomDagsMatchBruteForce) {
  std::mt19937 gen(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 4 + static_cast<int>(gen() % 4);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back(std::string(1, static_cast<char>('a' + i)) + "m");
    std::shuffle(names.begin(), names.end(), gen);
    DecompositionPlan plan;
    for (int i = 0; i < n; ++i) {
      SubmoduleSpec s{names[i], "", {}, {}};
      for (int k = 0; k < i; ++k)
        if (gen() % 3 == 0) s.dependencies.push_back(names[k]);
      plan.submodules.push_back(s);
    }
    plan.top = names[gen() % n];
    EXPECT_EQ(topo_order(plan), oracle_order(plan)) << "trial " << trial;
  }
}

TEST(Topo, CycleThrows) {
  DecompositionPlan plan;
  plan.submodules = {{"a", "", {}, {"b"}}, {"b", "", {}, {"a"}}, {"c", "", {}, {}}, {"d", "", {}, {}}};
  EXPECT_THROW(topo_order(plan), CycleError);
}

TEST(Decompose, ExtractJsonShapes) {
  EXPECT_EQ(extract_json("Plan:\n```json\n{\"x\": 1}\n```\nDone")["x"], 1);
  EXPECT_EQ(extract_json("```\nnot json\n```\n```json\n{\"x\": 2}\n```")["x"], 2);
  EXPECT_EQ(extract_json("Here it is {\"x\": {\"y\": 3}} as requested")["x"]["y"], 3);
  EXPECT_THROW(extract_json("no object here"), DecompositionMalformed);
  EXPECT_THROW(extract_json("[1, 2]"), DecompositionMalformed);
}

TEST(Decompose, FirstResponseAccepted) {
  Spec spec{"soc", "A small SoC with a pipeline, cache and uart.", Category::kProcessor, {}, {}};
  agents::MockBackend backend({"```json\n" + soc_plan_json().dump(2) + "\n```"});
  const auto plan = decompose(spec, backend);
  EXPECT_EQ(plan.submodules.size(), 7u);
  ASSERT_EQ(backend.calls(), 1u);
  const auto req = backend.requests()[0];
  EXPECT_DOUBLE_EQ(req.temperature, 0.2);
  EXPECT_NE(req.user_prompt.find("A small SoC"), std::string::npos);
  EXPECT_EQ(req.user_prompt.find("PROBLEM"), std::string::npos);
}

TEST(Decompose, RepromptsOnceThenSucceeds) {
  Spec spec{"soc", "soc", Category::kProcessor, {}, {}};
  json three = {{"submodules", json::array({sub("a", {}), sub("b", {"a"}), sub("c", {"b"})})}};
  agents::MockBackend backend({three.dump(), soc_plan_json().dump()});
  EXPECT_EQ(decompose(spec, backend).top, "soc_top");
  ASSERT_EQ(backend.calls(), 2u);
  const auto second = backend.requests()[1].user_prompt;
  EXPECT_NE(second.find("=== PROBLEM ==="), std::string::npos);
  EXPECT_NE(second.find("3 sub-modules"), std::string::npos);
}

TEST(Decompose, GivesUpAfterRetry) {
  Spec spec{"soc", "soc", Category::kProcessor, {}, {}};
  json three = {{"submodules", json::array({sub("a", {}), sub("b", {"a"}), sub("c", {"b"})})}};
  agents::MockBackend malformed({three.dump(), "sorry"});
  EXPECT_THROW(decompose(spec, malformed), DecompositionMalformed);
  EXPECT_EQ(malformed.calls(), 2u);

  json cyc = {{"submodules", json::array({sub("a", {"b"}), sub("b", {"a"}), sub("c", {}), sub("d", {})})}};
  agents::MockBackend cyclic({cyc.dump(), cyc.dump()});
  EXPECT_THROW(decompose(spec, cyclic), CycleError);
  EXPECT_EQ(cyclic.calls(), 2u);
}

TEST(Header, AnsiModule) {
  const std::string src =
      "// adder\nmodule add #(parameter W = 4) (input wire [W-1:0] a, input wire [W-1:0] b,\n"
      "    output reg [W:0] s);\n  always @* s = a + b;\nendmodule\n";
  const auto h = extract_header(src);
  EXPECT_EQ(h, "module add #(parameter W = 4) (input wire [W-1:0] a, input wire [W-1:0] b,\n"
               "    output reg [W:0] s);\nendmodule\n");
  const auto spans = verilog::find_modules(h);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_FALSE(spans[0].has_body);
  const auto a = verilog::parse_modules(src)[0];
  const auto b = verilog::parse_modules(h)[0];
  ASSERT_EQ(a.ports.size(), b.ports.size());
  for (size_t i = 0; i < a.ports.size(); ++i) EXPECT_EQ(a.ports[i].declaration(), b.ports[i].declaration());
}

TEST(Header, TwoModules) {
  const std::string src =
      "module inv(input a, output y);\n  assign y = ~a;\nendmodule\n\n"
      "module buf2(input a, output y);\n  wire m;\n  inv i0(.a(a), .y(m));\n  inv i1(.a(m), .y(y));\nendmodule\n";
  EXPECT_EQ(extract_header(src),
            "module inv(input a, output y);\nendmodule\nmodule buf2(input a, output y);\nendmodule\n");
}

TEST(Header, NonAnsiRebuilt) {
  const std::string src =
      "module cnt(clk, rst, q);\n  parameter N = 4;\n  input clk;\n  input rst;\n"
      "  output reg [N-1:0] q;\n  always @(posedge clk) q <= rst ? 0 : q + 1;\nendmodule\n";
  const auto h = extract_header(src);
  EXPECT_EQ(h, "module cnt #(\n  parameter N = 4\n) (\n  input clk,\n  input rst,\n  output reg [N-1:0] q\n);\n"
               "endmodule\n");
  const auto a = verilog::parse_modules(src)[0];
  const auto b = verilog::parse_modules(h)[0];
  EXPECT_TRUE(b.ansi);
  ASSERT_EQ(a.ports.size(), b.ports.size());
  for (size_t i = 0; i < a.ports.size(); ++i) EXPECT_EQ(a.ports[i].declaration(), b.ports[i].declaration());
}

TEST(Header, NoModuleThrows) {
  EXPECT_THROW(extract_header("// nothing here\nwire x;\n"), VerilogParseFailure);
}

TEST(Dedupe, NoDuplicatesUnchanged) {
  const std::string src = "module a(input x);\nendmodule\n// gap\nmodule b(input x);\n  wire w;\nendmodule";
  EXPECT_EQ(dedupe_modules(src), src);
}

TEST(Dedupe, KeepsFirstFullDefinition) {
  const std::string first = "module a(input x, output y);\n  assign y = x;\nendmodule\n";
  const std::string second = "module a(input x, output y);\n  assign y = ~x;\nendmodule\n";
  const std::string b = "module b(input x);\n  wire w;\nendmodule\n";
  EXPECT_EQ(dedupe_modules(first + b + second), first + b);
}

TEST(Dedupe, StubReplacedByDefinition) {
  const std::string stub = "module a(input x, output y);\nendmodule\n";
  const std::string full = "module a(input x, output y);\n  assign y = x;\nendmodule\n";
  const std::string b = "module b(input x);\n  wire w;\nendmodule\n";
  EXPECT_EQ(dedupe_modules(stub + b + full), b + full);
  EXPECT_EQ(dedupe_modules(stub + b + stub), stub + b);
}

TEST(Dedupe, IdempotentAndUniqueOnRandomMixes) {
  const std::vector<std::string> pieces = {
      "module a(input x);\nendmodule\n", "module a(input x);\n  wire p;\nendmodule\n",
      "module a(input x);\n  wire q;\nendmodule\n", "module b(input x);\nendmodule\n",
      "module b(input x);\n  wire r;\nendmodule\n", "module c(input x);\n  wire s;\nendmodule\n",
      "// note\n"};
  std::mt19937 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::string src;
    const int n = 1 + static_cast<int>(gen() % 8);
    for (int i = 0; i < n; ++i) src += pieces[gen() % pieces.size()];
    const auto once = dedupe_modules(src);
    EXPECT_EQ(dedupe_modules(once), once);
    std::map<std::string, int> count;
    for (const auto& s : verilog::find_modules(once)) ++count[s.name];
    for (const auto& s : verilog::find_modules(src)) {
      EXPECT_EQ(count[s.name], 1) << src;
    }
    // the first body-bearing definition of each name survives
    for (const auto& s : verilog::find_modules(src)) {
      if (!s.has_body) continue;
      const auto text = src.substr(s.begin, s.end - s.begin);
      bool earlier_full = false;
      for (const auto& t : verilog::find_modules(src))
        if (t.name == s.name && t.has_body && t.begin < s.begin) earlier_full = true;
      if (!earlier_full) EXPECT_NE(once.find(text), std::string::npos) << src;
    }
  }
}

TEST(Generate, EightModulesAllPass) {
  Harness h(eight_plan_json());
  h.extra["pipeline"] = "module alu (input wire [7:0] a, output wire [7:0] y);\nendmodule\n";
  std::vector<std::string> events;
  HierarchyOptions opts;
  opts.on_event = [&](std::string_view kind, std::string_view) { events.emplace_back(kind); };
  Spec spec{"soc", "soc", Category::kProcessor, {}, {}};
  const auto r = generate_hierarchical(spec, h.backend, h.validator, opts, &h.plan);

  ASSERT_EQ(r.modules.size(), 8u);
  for (const auto& m : r.modules) {
    EXPECT_TRUE(m.lint_passed) << m.name;
    EXPECT_EQ(m.iterations, 1) << m.name;
    EXPECT_GT(m.loc, 0);
  }
  EXPECT_TRUE(r.passed);
  EXPECT_TRUE(r.combined_lint.passed);
  EXPECT_EQ(r.backend_calls, 8);
  EXPECT_EQ(r.order, oracle_order(h.plan));

  std::map<std::string, int> defs;
  for (const auto& s : verilog::find_modules(r.combined_source)) ++defs[s.name];
  EXPECT_EQ(defs.size(), 8u);
  for (const auto& [name, n] : defs) EXPECT_EQ(n, 1) << name;
  EXPECT_NE(r.combined_source.find("alu_body"), std::string::npos);

  // every prompt carries the headers of all earlier modules and the interface
  const auto reqs = h.backend.requests();
  ASSERT_EQ(reqs.size(), 8u);
  for (size_t i = 0; i < reqs.size(); ++i) {
    EXPECT_EQ(interface_module(reqs[i].user_prompt), r.order[i]);
    EXPECT_NE(reqs[i].user_prompt.find("SystemVerilog constructs are allowed"), std::string::npos);
    for (size_t k = 0; k < i; ++k)
      EXPECT_NE(reqs[i].user_prompt.find("module " + r.order[k] + " ("), std::string::npos)
          << r.order[i] << " lacks " << r.order[k];
  }

  // the per-module lint of pipeline drops the alu header it redefines
  const auto invs = h.tools->invocations();
  ASSERT_EQ(invs.size(), 9u);
  for (const auto& inv : invs) {
    EXPECT_EQ(inv.tool, "verilator");
    std::map<std::string, int> seen;
    for (const auto& in : inv.inputs)
      for (const auto& s : verilog::find_modules(in)) ++seen[s.name];
    for (const auto& [name, n] : seen) EXPECT_EQ(n, 1) << name << " declared twice in one lint";
  }
  const auto& pipe = invs[std::find(r.order.begin(), r.order.end(), "pipeline") - r.order.begin()];
  EXPECT_EQ(pipe.inputs.size(), 5u);  // source plus decoder, hazard, icache, regfile headers
  for (size_t i = 1; i < pipe.inputs.size(); ++i)
    EXPECT_EQ(pipe.inputs[i].find("module alu"), std::string::npos);
  EXPECT_EQ(events.front(), "plan");
  EXPECT_EQ(events.back(), "combined");
  EXPECT_EQ(std::count(events.begin(), events.end(), "lint"), 8);
}

TEST(Generate, FailingModuleIsolated) {
  Harness h(eight_plan_json());
  h.tools->add(FixtureEntry{"verilator", "", "", {"uart_body"},
                            fail("%Error: uart.sv:2:10: syntax error, unexpected assign\n")});
  HierarchyOptions opts;
  opts.max_iterations = 3;
  Spec spec{"soc", "soc", Category::kProcessor, {}, {}};
  const auto r = generate_hierarchical(spec, h.backend, h.validator, opts, &h.plan);

  for (const auto& m : r.modules) {
    if (m.name == "uart") {
      EXPECT_FALSE(m.lint_passed);
      EXPECT_EQ(m.iterations, 3);
      ASSERT_FALSE(m.errors.empty());
      EXPECT_EQ(m.errors[0].category, validation::ErrorCategory::kSyntax);
    } else {
      EXPECT_TRUE(m.lint_passed) << m.name;
      EXPECT_EQ(m.iterations, 1) << m.name;
    }
  }
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.backend_calls, 10);

  int uart_calls = 0;
  for (const auto& req : h.backend.requests()) {
    if (interface_module(req.user_prompt) != "uart") continue;
    if (uart_calls++ > 0) EXPECT_NE(req.user_prompt.find("unexpected assign"), std::string::npos);
  }
  EXPECT_EQ(uart_calls, 3);
  EXPECT_EQ(hierarchical_to_json(r)["modules"].size(), 8u);
}

TEST(Generate, MissingInstanceCaughtAtCombinedLint) {
  Harness h(eight_plan_json());
  h.extra["pipeline"] = "module stage_glue (input wire a);\n  forwarder f0 (.a(a));\nendmodule\n";
  h.tools->add(FixtureEntry{"verilator", "", "", {"alu_body", "soc_top_body"},
                            fail("%Error: combined.sv:40:3: Cannot find file containing module: 'forwarder'\n")});
  Spec spec{"soc", "soc", Category::kProcessor, {}, {}};
  const auto r = generate_hierarchical(spec, h.backend, h.validator, {}, &h.plan);

  for (const auto& m : r.modules) EXPECT_TRUE(m.lint_passed) << m.name;
  EXPECT_FALSE(r.combined_lint.passed);
  ASSERT_FALSE(r.combined_lint.errors.empty());
  EXPECT_EQ(r.combined_lint.errors[0].category, validation::ErrorCategory::kUndeclaredSignal);
  EXPECT_FALSE(r.passed);
}

TEST(Generate, DecomposesWhenNoPlanGiven) {
  Harness h(eight_plan_json());
  agents::MockBackend backend([&](const agents::CompletionRequest& r) {
    if (r.user_prompt.find("=== FORMAT ===") != std::string::npos) return eight_plan_json().dump();
    return "```verilog\n" + canned_module(h.plan, interface_module(r.user_prompt)) + "```\n";
  });
  Spec spec{"soc", "soc", Category::kProcessor, {}, {}};
  const auto r = generate_hierarchical(spec, backend, h.validator);
  EXPECT_EQ(r.plan, h.plan);
  EXPECT_EQ(r.backend_calls, 9);
  EXPECT_TRUE(r.passed);
}
