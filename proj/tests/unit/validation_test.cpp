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
#include "rtlforge/validation.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::validation {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fixture(const std::string& rel) {
  return text::read_file(std::string(RTLFORGE_FIXTURES) + "/" + rel);
}

std::string log_of(const std::string& name) { return fixture("tool_logs/" + name); }

ToolOutput ok(std::string out = {}) { return ToolOutput{0, std::move(out), "", false, false}; }
ToolOutput fail(std::string err, int code = 1) { return ToolOutput{code, "", std::move(err), false, false}; }

const char* kAnd2 =
    "module and2(input a, input b, output y);\n"
    "  assign y = a & b;\n"
    "endmodule\n";

const char* kAdder =
    "module adder(input [7:0] a, output [7:0] s);\n"
    "  // sum\n"
    "  wire [7:0] t;\n"
    "  assign s = a + carry;\n"
    "  assign t = s;\n"
    "endmodule\n";

// ------------------------------------------------------------- sim scanner

TEST(SimScanner, Corpus) {
  const auto corpus = json::parse(fixture("sim_outputs.json"));
  for (const auto& c : corpus["cases"]) {
    const auto text = c["text"].get<std::string>();
    SCOPED_TRACE(text);
    const auto r = scan_sim_output(text);
    EXPECT_EQ(r.passed, c["passed"].get<bool>());
    EXPECT_EQ(r.mismatches, c["mismatches"].get<long>());
    EXPECT_EQ(r.samples, c["samples"].get<long>());
    EXPECT_EQ(r.marker, c["marker"].get<std::string>());
    EXPECT_FALSE(r.timed_out);
  }
}

TEST(SimScanner, AdversarialLinesRejected) {
  const auto corpus = json::parse(fixture("sim_outputs.json"));
  ASSERT_GE(corpus["adversarial"].size(), 20u);
  for (const auto& a : corpus["adversarial"]) {
    const auto text = a.get<std::string>();
    SCOPED_TRACE(text);
    const auto r = scan_sim_output(text);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.marker, "none");
  }
}

TEST(SimScanner, OverlongLineIsCut) {
  std::string line = "Mismatches: 0 in 5 samples" + std::string(2000, ' ') + "x";
  EXPECT_EQ(scan_sim_output(line).marker, "mismatches");
  std::string padded = std::string(1100, ' ') + "STATUS: PASS";
  EXPECT_EQ(scan_sim_output(padded).marker, "none");
}

TEST(SimScanner, HugeCountsDoNotThrow) {
  const auto r = scan_sim_output("Mismatches: 0 in 99999999999999999999999 samples");
  EXPECT_EQ(r.marker, "none");
}

// ------------------------------------------------------ categorization

struct LogCase {
  const char* file;
  std::vector<ErrorCategory> categories;
  std::optional<int> first_line;
};

TEST(Categorize, ToolLogs) {
  using C = ErrorCategory;
  const std::vector<LogCase> cases = {
      {"iverilog_undeclared.log", {C::kUndeclaredSignal, C::kOther}, 4},
      {"iverilog_syntax.log", {C::kSyntax, C::kSyntax, C::kSyntax}, 3},
      {"iverilog_always_ff_2001.log", {C::kSyntax, C::kOther}, 5},
      {"iverilog_port.log", {C::kPortMismatch}, 12},
      {"iverilog_width_warning.log", {C::kWidthMismatch}, 9},
      {"verilator_undeclared.log", {C::kUndeclaredSignal}, 4},
      {"verilator_pin.log", {C::kPortMismatch}, 12},
      {"verilator_width.log", {C::kWidthMismatch}, 5},
      {"yosys_latch.log", {C::kInferredLatch, C::kInferredLatch}, 4},
      {"yosys_and2.log", {}, std::nullopt},
  };
  for (const auto& c : cases) {
    SCOPED_TRACE(c.file);
    const auto errs = categorize_errors(log_of(c.file));
    ASSERT_EQ(errs.size(), c.categories.size());
    for (std::size_t i = 0; i < errs.size(); ++i) EXPECT_EQ(errs[i].category, c.categories[i]);
    if (!errs.empty()) EXPECT_EQ(errs[0].line, c.first_line);
  }
}

TEST(Categorize, FileAndMessage) {
  const auto errs = categorize_errors(log_of("verilator_undeclared.log"));
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0].file, "design.sv");
  EXPECT_EQ(errs[0].message, "%Error: design.sv:4:20: Can't find definition of variable: 'carry'");
}

TEST(Categorize, EmptyInput) { EXPECT_TRUE(categorize_errors("").empty()); }

TEST(Categorize, OrdinaryWarningsIgnored) {
  EXPECT_TRUE(categorize_errors("design.v:3: warning: implicit definition of wire 'x'.\n").empty());
}

TEST(Categorize, TotalOnRandomBytes) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    std::string s(rng() % 3000, '\0');
    for (auto& ch : s) ch = static_cast<char>(rng() & 0xff);
    EXPECT_NO_THROW(categorize_errors(s));
    EXPECT_NO_THROW(scan_sim_output(s));
    EXPECT_NO_THROW(parse_synth_log(s));
  }
}

TEST(Context, FiveLinesAroundError) {
  auto errs = categorize_errors(log_of("iverilog_undeclared.log"));
  attach_context(errs, {{"design.v", kAdder}});
  ASSERT_EQ(errs[0].context.size(), 5u);
  EXPECT_EQ(errs[0].context_first_line, 2);
  EXPECT_EQ(errs[0].context[2], "  assign s = a + carry;");
}

TEST(Context, ClippedAtFileStart) {
  std::vector<CategorizedError> errs = {{ErrorCategory::kSyntax, "x", "design.v", 1, {}, 0}};
  attach_context(errs, {{"design.v", kAdder}});
  ASSERT_EQ(errs[0].context.size(), 5u);
  EXPECT_EQ(errs[0].context_first_line, 1);
  std::vector<CategorizedError> small = {{ErrorCategory::kSyntax, "x", "/tmp/w/design.v", 2, {}, 0}};
  attach_context(small, {{"design.v", kAnd2}});
  EXPECT_EQ(small[0].context.size(), 3u);
}

TEST(Feedback, NumberedContextAndHint) {
  ValidationReport rep;
  rep.errors = categorize_errors(log_of("iverilog_undeclared.log"));
  attach_context(rep.errors, {{"design.v", kAdder}});
  const auto fb = to_feedback(rep, Category::kCombinational);
  ASSERT_EQ(fb.size(), 2u);
  EXPECT_EQ(fb[0].category, "UndeclaredSignal");
  EXPECT_EQ(fb[0].line, 4);
  EXPECT_NE(fb[0].context.find(">   4 |   assign s = a + carry;\n"), std::string::npos);
  EXPECT_NE(fb[0].context.find("    3 |   wire [7:0] t;\n"), std::string::npos);
  EXPECT_EQ(fb[0].hint, "Declare every wire and reg before its first use.");
  EXPECT_TRUE(fb[1].hint.empty());
}

// --------------------------------------------------------------- hints

TEST(Hints, MemorySyntax) {
  const auto h = fix_hints(ErrorCategory::kSyntax, Category::kMemory);
  ASSERT_FALSE(h.empty());
  EXPECT_EQ(h[0], "Replace logic with reg; use integer i; for (i=0; ...) instead of for (int i=0; ...)");
}

TEST(Hints, FsmLatch) {
  const auto h = fix_hints(ErrorCategory::kInferredLatch, Category::kFsm);
  ASSERT_FALSE(h.empty());
  EXPECT_NE(h[0].find("next_state = state;"), std::string::npos);
}

TEST(Hints, FallbackAndUnknownPair) {
  EXPECT_EQ(fix_hints(ErrorCategory::kUndeclaredSignal, Category::kProcessor),
            fix_hints(ErrorCategory::kUndeclaredSignal, Category::kUnknown));
  EXPECT_TRUE(fix_hints(ErrorCategory::kOther, Category::kBus).empty());
}

TEST(Hints, MalformedDatabase) {
  EXPECT_THROW(HintDatabase::from_json(json::parse(R"([{"design":"alien","category":"Syntax","hints":[]}])")),
               ConfigError);
  EXPECT_THROW(HintDatabase::from_json(json::parse(R"([{"design":"fsm"}])")), ConfigError);
}

// --------------------------------------------------------------- trend

ValidationReport with_errors(std::vector<ErrorCategory> cats) {
  ValidationReport r;
  for (auto c : cats) r.errors.push_back({c, "m", "", std::nullopt, {}, 0});
  return r;
}

TEST(Trend, Cases) {
  using C = ErrorCategory;
  EXPECT_EQ(error_trend(with_errors({C::kSyntax, C::kSyntax}), with_errors({C::kSyntax})), ErrorTrend::kImproving);
  EXPECT_EQ(error_trend(with_errors({C::kSyntax}), with_errors({C::kSyntax, C::kOther})), ErrorTrend::kWorsening);
  EXPECT_EQ(error_trend(with_errors({C::kSyntax}), with_errors({C::kWidthMismatch})), ErrorTrend::kTypeChanged);
  EXPECT_EQ(error_trend(with_errors({C::kSyntax, C::kOther}), with_errors({C::kOther, C::kSyntax})),
            ErrorTrend::kUnchanged);
  EXPECT_EQ(error_trend(with_errors({}), with_errors({})), ErrorTrend::kUnchanged);
}

// ------------------------------------------------------------- report json

TEST(Report, JsonRoundTrip) {
  ValidationReport r;
  r.stage_reached = Stage::kSimPassed;
  r.errors = categorize_errors(log_of("iverilog_undeclared.log"));
  attach_context(r.errors, {{"design.v", kAdder}});
  r.sim = SimResult{true, 0, 439, "mismatches", false};
  r.synth = SynthMetrics{12, 30, 0, false};
  r.tool_logs = {{"lint", "ok"}, {"sim", "Mismatches: 0 in 439 samples"}};
  const auto j = report_to_json(r);
  EXPECT_EQ(report_from_json(json::parse(j.dump())), r);
  EXPECT_EQ(j["stage_reached"], "SimPassed");

  ValidationReport empty;
  empty.sim_skipped = true;
  EXPECT_EQ(report_from_json(report_to_json(empty)), empty);
  EXPECT_THROW(report_from_json(json::parse(R"({"stage_reached":"Nowhere"})")), ParseError);
}

// ---------------------------------------------------------- synth parsing

TEST(SynthLog, Metrics) {
  EXPECT_EQ(parse_synth_log(log_of("yosys_and2.log")), (SynthMetrics{1, 3, 0, false}));
  EXPECT_EQ(parse_synth_log(log_of("yosys_empty.log")), (SynthMetrics{0, 0, 0, false}));
  EXPECT_EQ(parse_synth_log(log_of("yosys_latch.log")), (SynthMetrics{2, 4, 1, false}));
  EXPECT_TRUE(parse_synth_log(log_of("yosys_loop.log")).combinational_loop);
  EXPECT_EQ(parse_synth_log("   17 wires\n   9 cells\n     $_DLATCH_N_ 2\n"), (SynthMetrics{9, 17, 2, false}));
}

// ---------------------------------------------------------- fixture runner

std::shared_ptr<FixtureRunner> clean_tools() {
  auto r = std::make_shared<FixtureRunner>();
  r->set_default("iverilog", ok());
  r->set_default("vvp", ok("Mismatches: 0 in 20 samples\n"));
  r->set_default("yosys", ok(log_of("yosys_and2.log")));
  return r;
}

TEST(Validator, LintPassStrict) {
  auto tools = clean_tools();
  Validator v(tools);
  const auto r = v.lint(kAnd2);
  EXPECT_TRUE(r.passed);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.tool, "iverilog");
  const auto inv = tools->invocations().at(0);
  EXPECT_EQ(inv.step, "lint-2001");
  EXPECT_EQ(inv.args.at(0), "-g2001");
  EXPECT_EQ(inv.inputs, std::vector<std::string>{kAnd2});
}

TEST(Validator, LintFailureCarriesContext) {
  auto tools = std::make_shared<FixtureRunner>();
  tools->add({"iverilog", "lint-2001", "", {"carry"}, fail(log_of("iverilog_undeclared.log"), 2)});
  Validator v(tools);
  const auto r = v.lint(kAdder);
  EXPECT_FALSE(r.passed);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].category, ErrorCategory::kUndeclaredSignal);
  EXPECT_EQ(r.errors[0].context.size(), 5u);
}

TEST(Validator, NonzeroExitWithoutMessages) {
  auto tools = std::make_shared<FixtureRunner>();
  tools->set_default("iverilog", fail("oops\nmore\n", 3));
  Validator v(tools);
  const auto r = v.lint(kAnd2);
  EXPECT_FALSE(r.passed);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].message, "lint failed with exit code 3: oops");
}

TEST(Validator, WidthWarningDoesNotFailLint) {
  auto tools = std::make_shared<FixtureRunner>();
  tools->set_default("iverilog", ok(log_of("iverilog_width_warning.log")));
  Validator v(tools);
  EXPECT_TRUE(v.lint(kAnd2).passed);
}

TEST(Validator, SystemVerilogModes) {
  auto fallback = clean_tools();
  Validator v1(fallback);
  EXPECT_TRUE(v1.lint(kAnd2, {}, LintMode::kSystemVerilog).passed);
  EXPECT_EQ(fallback->invocations().at(0).step, "lint-sv-fallback");
  EXPECT_EQ(fallback->invocations().at(0).args.at(0), "-g2012");

  auto with_verilator = clean_tools();
  with_verilator->set_default("verilator", fail(log_of("verilator_pin.log")));
  Validator v2(with_verilator);
  const auto r = v2.lint(kAnd2, {}, LintMode::kSystemVerilog);
  EXPECT_EQ(r.tool, "verilator");
  EXPECT_EQ(with_verilator->invocations().at(0).step, "lint-sv");
  ASSERT_FALSE(r.passed);
  EXPECT_EQ(r.errors.at(0).category, ErrorCategory::kPortMismatch);
}

TEST(Validator, FullPassReachesSynth) {
  Validator v(clean_tools());
  const auto rep = v.validate(kAnd2, std::string_view("module tb; endmodule\n"));
  EXPECT_EQ(rep.stage_reached, Stage::kSynthPassed);
  EXPECT_TRUE(rep.errors.empty());
  ASSERT_TRUE(rep.sim);
  EXPECT_EQ(rep.sim->samples, 20);
  ASSERT_TRUE(rep.synth);
  EXPECT_EQ(rep.synth->cell_count, 1);
  EXPECT_FALSE(rep.sim_skipped);
}

TEST(Validator, SimulationFailureStopsAtLint) {
  auto tools = clean_tools();
  tools->set_default("vvp", ok("Mismatches: 7 in 100 samples\n"));
  Validator v(tools);
  const auto rep = v.validate(kAnd2, std::string_view("module tb; endmodule\n"));
  EXPECT_EQ(rep.stage_reached, Stage::kLintPassed);
  ASSERT_EQ(rep.errors.size(), 1u);
  EXPECT_EQ(rep.errors[0].message, "simulation failed: 7 mismatches in 100 samples");
  EXPECT_FALSE(rep.synth);
}

TEST(Validator, MissingMarker) {
  auto tools = clean_tools();
  tools->set_default("vvp", ok("hello\n"));
  Validator v(tools);
  const auto s = v.simulate(kAnd2, "module tb; endmodule\n");
  EXPECT_TRUE(s.compiled);
  EXPECT_EQ(s.result.marker, "none");
  EXPECT_EQ(s.errors.at(0).message, "no status marker");
}

TEST(Validator, SimulationTimeout) {
  auto tools = clean_tools();
  tools->set_default("vvp", ToolOutput{-1, "", "", true, false});
  Validator v(tools);
  const auto s = v.simulate(kAnd2, "module tb; endmodule\n");
  EXPECT_TRUE(s.result.timed_out);
  EXPECT_FALSE(s.result.passed);
  EXPECT_EQ(s.errors.at(0).message, "simulation timed out after 60 s");
  EXPECT_DOUBLE_EQ(tools->invocations().back().timeout_s, 60.0);
}

TEST(Validator, CompileFailure) {
  auto tools = clean_tools();
  tools->add({"iverilog", "compile", "", {}, fail(log_of("iverilog_port.log"))});
  tools->add({"iverilog", "compile", "", {"module tb"}, fail(log_of("iverilog_port.log"))});
  Validator v(tools);
  const auto s = v.simulate(kAnd2, "module tb; endmodule\n");
  EXPECT_FALSE(s.compiled);
  EXPECT_EQ(s.errors.at(0).category, ErrorCategory::kPortMismatch);
  EXPECT_EQ(tools->invocations().size(), 1u);
}

TEST(Validator, NoTestbenchSkipsSimulation) {
  Validator v(clean_tools());
  const auto rep = v.validate(kAnd2, std::nullopt);
  EXPECT_TRUE(rep.sim_skipped);
  EXPECT_FALSE(rep.sim);
  EXPECT_EQ(rep.stage_reached, Stage::kSynthPassed);
}

TEST(Validator, NoYosysSkipsSynthesis) {
  auto tools = std::make_shared<FixtureRunner>();
  tools->set_default("iverilog", ok());
  tools->set_default("vvp", ok("STATUS: PASS\n"));
  Validator v(tools);
  const auto rep = v.validate(kAnd2, std::string_view("module tb; endmodule\n"));
  EXPECT_EQ(rep.stage_reached, Stage::kSimPassed);
  EXPECT_EQ(rep.tool_logs.at("synth"), "skipped: yosys not available");
}

TEST(Validator, LatchFailsSynthesis) {
  auto tools = clean_tools();
  tools->set_default("yosys", ok(log_of("yosys_latch.log")));
  Validator v(tools);
  const auto rep = v.validate(kAnd2, std::nullopt);
  EXPECT_EQ(rep.stage_reached, Stage::kLintPassed);
  ASSERT_FALSE(rep.errors.empty());
  EXPECT_EQ(rep.errors[0].category, ErrorCategory::kInferredLatch);
  EXPECT_EQ(rep.synth->latch_warnings, 1);
}

TEST(Validator, LoopFailsSynthesis) {
  auto tools = clean_tools();
  tools->set_default("yosys", ok(log_of("yosys_loop.log")));
  Validator v(tools);
  const auto y = v.synthesize_check(kAnd2);
  EXPECT_FALSE(y.passed);
  EXPECT_EQ(y.errors.at(0).message, "combinational loop detected");
}

TEST(Validator, StageNeverSkipsAhead) {
  const std::vector<std::string> vvp_outputs = {"Mismatches: 0 in 3 samples", "Mismatches: 1 in 3 samples", "",
                                                "STATUS: FAIL"};
  const std::vector<std::string> yosys_logs = {log_of("yosys_and2.log"), log_of("yosys_latch.log")};
  for (int lint_ok = 0; lint_ok < 2; ++lint_ok)
    for (const auto& sim : vvp_outputs)
      for (const auto& synth : yosys_logs) {
        auto tools = std::make_shared<FixtureRunner>();
        tools->add({"iverilog", "lint-2001", "", {}, lint_ok ? ok() : fail(log_of("iverilog_syntax.log"))});
        tools->add({"iverilog", "lint-2001", "", {"module"}, lint_ok ? ok() : fail(log_of("iverilog_syntax.log"))});
        tools->set_default("iverilog", ok());
        tools->set_default("vvp", ok(sim));
        tools->set_default("yosys", ok(synth));
        Validator v(tools);
        const auto rep = v.validate(kAnd2, std::string_view("module tb; endmodule\n"));
        const bool lint_pass = lint_ok;
        const bool sim_pass = lint_pass && scan_sim_output(sim).passed;
        const bool synth_pass = sim_pass && parse_synth_log(synth).latch_warnings == 0;
        const Stage expected = synth_pass ? Stage::kSynthPassed
                               : sim_pass ? Stage::kSimPassed
                               : lint_pass ? Stage::kLintPassed
                                           : Stage::kNone;
        EXPECT_EQ(rep.stage_reached, expected);
        EXPECT_EQ(rep.stage_reached == Stage::kSynthPassed, rep.errors.empty());
      }
}

TEST(Validator, MissingToolsAndCrashes) {
  Validator empty(std::make_shared<FixtureRunner>());
  EXPECT_THROW(empty.lint(kAnd2), ToolMissing);
  auto crashing = std::make_shared<FixtureRunner>();
  crashing->set_default("iverilog", ToolOutput{-11, "", "segfault", false, true});
  Validator v(crashing);
  try {
    v.lint(kAnd2);
    FAIL();
  } catch (const ToolCrash& e) {
    EXPECT_EQ(e.stderr_text(), "segfault");
  }
}

TEST(FixtureRunnerTest, KeyMatchingAndJson) {
  ToolInvocation inv{"iverilog", "lint-2001", {}, "/tmp", 1.0, {kAnd2}};
  FixtureEntry exact{"iverilog", "lint-2001", replay_key(inv), {}, ok("exact")};
  FixtureEntry loose{"iverilog", "", "", {"and2"}, ok("loose")};
  auto r = FixtureRunner::from_json(json{{"entries", {fixture_to_json(loose), fixture_to_json(exact)}}});
  EXPECT_EQ(r->run(inv).stdout_text, "exact");
  inv.inputs = {"module and2x(); endmodule"};
  EXPECT_EQ(r->run(inv).stdout_text, "loose");
  inv.inputs = {"module other(); endmodule"};
  EXPECT_THROW(r->run(inv), ToolMissing);
  EXPECT_EQ(fixture_to_json(fixture_from_json(fixture_to_json(exact))), fixture_to_json(exact));

  ToolInvocation other = inv;
  other.step = "lint-sv";
  EXPECT_NE(replay_key(inv), replay_key(other));
}

TEST(FixtureRunnerTest, RecordingReplays) {
  auto rec = std::make_shared<RecordingRunner>(clean_tools());
  Validator v(rec);
  const auto first = v.validate(kAnd2, std::string_view("module tb; endmodule\n"));
  auto replay = FixtureRunner::from_json(json::parse(rec->to_json().dump()));
  Validator again(replay);
  EXPECT_EQ(again.validate(kAnd2, std::string_view("module tb; endmodule\n")), first);
}

// ------------------------------------------------------------ processes

class Scripts : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rtlforge-test-" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string script(const std::string& name, const std::string& body) {
    const auto p = dir_ / name;
    std::ofstream(p) << "#!/bin/sh\n" << body;
    fs::permissions(p, fs::perms::owner_all);
    return p.string();
  }
  fs::path dir_;
};

TEST_F(Scripts, ExitCodeAndStreams) {
  ProcessRunner r(ToolPaths{script("tool", "echo out; echo err >&2; exit 3\n"), "", "", ""});
  EXPECT_TRUE(r.available("iverilog"));
  const auto o = r.run({"iverilog", "lint-2001", {}, dir_.string(), 10.0, {}});
  EXPECT_EQ(o.exit_code, 3);
  EXPECT_EQ(o.stdout_text, "out\n");
  EXPECT_EQ(o.stderr_text, "err\n");
  EXPECT_FALSE(o.timed_out);
}

TEST_F(Scripts, TimeoutKillsProcess) {
  ProcessRunner r(ToolPaths{"", script("slow", "sleep 30\n"), "", ""});
  const auto start = std::chrono::steady_clock::now();
  const auto o = r.run({"vvp", "run", {}, dir_.string(), 0.3, {}});
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_TRUE(o.timed_out);
  EXPECT_LT(elapsed, 5.0);
}

TEST_F(Scripts, ValidatorWritesSourcesToWorkspace) {
  const auto tool = script("lint", "for f in \"$@\"; do case \"$f\" in *.v) grep -q 'module and2' \"$f\" || exit 7;; esac; done\n");
  Validator v(std::make_shared<ProcessRunner>(ToolPaths{tool, "", "", ""}));
  EXPECT_TRUE(v.lint(kAnd2).passed);
  EXPECT_FALSE(v.lint(kAdder).passed);
}

TEST_F(Scripts, ConfiguredPathMissing) {
  EXPECT_THROW(find_tool("iverilog", ToolPaths{(dir_ / "nope").string(), "", "", ""}), ToolMissing);
  ProcessRunner r(ToolPaths{(dir_ / "nope").string(), "", "", ""});
  EXPECT_FALSE(r.available("iverilog"));
  EXPECT_THROW(r.run({"iverilog", "x", {}, dir_.string(), 1.0, {}}), ToolMissing);
}

}  // namespace
}  // namespace rtlforge::validation
