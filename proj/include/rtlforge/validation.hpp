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
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtlforge/agents.hpp"
#include "rtlforge/spec.hpp"

namespace rtlforge::validation {

enum class Stage { kNone, kLintPassed, kSimPassed, kSynthPassed };
std::string_view stage_name(Stage s);

enum class ErrorCategory {
  kSyntax,
  kPortMismatch,
  kWidthMismatch,
  kUndeclaredSignal,
  kInferredLatch,
  kOther,
};
inline constexpr int kNumErrorCategories = 6;
std::string_view category_name(ErrorCategory c);
std::optional<ErrorCategory> parse_error_category(std::string_view s);

struct CategorizedError {
  ErrorCategory category = ErrorCategory::kOther;
  std::string message;
  std::string file;
  std::optional<int> line;
  std::vector<std::string> context;  // up to 5 source lines
  int context_first_line = 0;        // line number of context[0]

  bool operator==(const CategorizedError&) const = default;
};

enum class ErrorTrend { kImproving, kWorsening, kTypeChanged, kUnchanged };
std::string_view trend_name(ErrorTrend t);

struct SimResult {
  bool passed = false;
  long mismatches = 0;
  long samples = 0;
  std::string marker;  // "mismatches", "count", "status" or "none"
  bool timed_out = false;

  bool operator==(const SimResult&) const = default;
};

struct SynthMetrics {
  long cell_count = 0;
  long wire_count = 0;
  long latch_warnings = 0;
  bool combinational_loop = false;

  bool operator==(const SynthMetrics&) const = default;
};

struct ValidationReport {
  Stage stage_reached = Stage::kNone;
  std::vector<CategorizedError> errors;
  std::optional<SimResult> sim;
  std::optional<SynthMetrics> synth;
  bool sim_skipped = false;
  std::map<std::string, std::string> tool_logs;  // stage name -> output

  bool operator==(const ValidationReport&) const = default;
};

nlohmann::json report_to_json(const ValidationReport& r);
ValidationReport report_from_json(const nlohmann::json& j);

// ------------------------------------------------------------------ parsing

/// Anchored, whitespace-tolerant marker patterns, checked in this order on
/// every line (lines are cut to 1024 characters first):
///   ^\s*Mismatches:\s*(\d+)\s+in\s+(\d+)\s+samples\s*$   pass iff M == 0
///   ^\s*(\d+)\s*/\s*(\d+)\s+tests?\s+passed\s*$            pass iff K == N > 0
///   ^\s*STATUS:\s*(PASS|FAIL)\s*$
/// The highest-priority format present decides; its last occurrence wins.
/// Never throws.
SimResult scan_sim_output(std::string_view output);

/// Maps tool messages to categories; other lines mentioning "error" become
/// Other. Warnings are kept only for width and latch messages. Never throws.
std::vector<CategorizedError> categorize_errors(std::string_view tool_output);

/// Fills `context` with up to five lines centred on each error's line.
void attach_context(std::vector<CategorizedError>& errors,
                    const std::map<std::string, std::string>& sources);

/// Hint database keyed by (design category, error category).
class HintDatabase {
 public:
  static const HintDatabase& builtin();
  static HintDatabase from_json(const nlohmann::json& j);

  /// Hints for the pair, else for (unknown, category), else empty.
  std::vector<std::string> lookup(ErrorCategory error, Category design) const;

 private:
  std::map<std::pair<Category, ErrorCategory>, std::vector<std::string>> hints_;
};

std::vector<std::string> fix_hints(ErrorCategory error, Category design,
                                   const HintDatabase& db = HintDatabase::builtin());

ErrorTrend error_trend(const ValidationReport& previous, const ValidationReport& current);

/// Converts report errors into prompt feedback with numbered context and
/// the first hint for the design category.
std::vector<agents::ErrorFeedback> to_feedback(const ValidationReport& report, Category design,
                                               const HintDatabase& db = HintDatabase::builtin());

// ------------------------------------------------------------- tool runners

struct ToolInvocation {
  std::string tool;  // iverilog, vvp, verilator, yosys
  std::string step;  // lint-2001, lint-sv, compile, run, synth
  std::vector<std::string> args;
  std::string workdir;
  double timeout_s = 120.0;
  std::vector<std::string> inputs;  // source texts, used as the replay key
};

struct ToolOutput {
  int exit_code = 0;
  std::string stdout_text;
  std::string stderr_text;
  bool timed_out = false;
  bool signaled = false;
};

class ToolRunner {
 public:
  virtual ~ToolRunner() = default;
  virtual bool available(std::string_view tool) const = 0;
  virtual ToolOutput run(const ToolInvocation& inv) = 0;
};

/// Explicit paths; empty entries fall back to RTLFORGE_<TOOL> then PATH.
struct ToolPaths {
  std::string iverilog, vvp, verilator, yosys;
};

/// Resolved executable path, or nullopt. A configured path that does not
/// exist raises ToolMissing.
std::optional<std::string> find_tool(std::string_view tool, const ToolPaths& paths = {});

/// Runs real executables with a timeout (the process group is killed).
class ProcessRunner : public ToolRunner {
 public:
  explicit ProcessRunner(ToolPaths paths = {});
  bool available(std::string_view tool) const override;
  /// Throws ToolMissing when the tool cannot be found.
  ToolOutput run(const ToolInvocation& inv) override;

 private:
  ToolPaths paths_;
};

/// Key of an invocation for replay: tool, step and input texts.
std::string replay_key(const ToolInvocation& inv);

/// One recorded tool response. Matches by exact key, else when every
/// `contains` string occurs in some input, else not at all.
struct FixtureEntry {
  std::string tool;
  std::string step;  // empty matches any step
  std::string key;
  std::vector<std::string> contains;
  ToolOutput output;
};

/// Replays recorded tool logs. Unmatched invocations get the per-tool
/// default when one is set, else raise ToolMissing.
class FixtureRunner : public ToolRunner {
 public:
  FixtureRunner() = default;
  explicit FixtureRunner(std::vector<FixtureEntry> entries);
  static std::shared_ptr<FixtureRunner> from_json(const nlohmann::json& j);
  static std::shared_ptr<FixtureRunner> load(const std::string& path);

  void add(FixtureEntry e);
  void set_default(const std::string& tool, ToolOutput out);

  bool available(std::string_view tool) const override;
  ToolOutput run(const ToolInvocation& inv) override;
  std::vector<ToolInvocation> invocations() const;

 private:
  mutable std::mutex mu_;
  std::vector<FixtureEntry> entries_;
  std::map<std::string, ToolOutput> defaults_;
  std::vector<ToolInvocation> log_;
};

/// Forwards to another runner and records each response as a fixture entry.
class RecordingRunner : public ToolRunner {
 public:
  explicit RecordingRunner(std::shared_ptr<ToolRunner> inner);
  bool available(std::string_view tool) const override { return inner_->available(tool); }
  ToolOutput run(const ToolInvocation& inv) override;
  nlohmann::json to_json() const;
  void save(const std::string& path) const;

 private:
  std::shared_ptr<ToolRunner> inner_;
  mutable std::mutex mu_;
  std::vector<FixtureEntry> recorded_;
};

nlohmann::json fixture_to_json(const FixtureEntry& e);
FixtureEntry fixture_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- validator

enum class LintMode { kStrict2001, kSystemVerilog };

struct ValidatorConfig {
  double sim_timeout_s = 60.0;
  double tool_timeout_s = 120.0;
  int max_concurrency = 4;
};

struct LintResult {
  bool passed = false;
  std::vector<CategorizedError> errors;
  std::string log;
  std::string tool;  // tool actually used
};

struct SimOutcome {
  bool compiled = false;
  SimResult result;
  std::vector<CategorizedError> errors;
  std::string log;
};

struct SynthOutcome {
  bool passed = false;
  SynthMetrics metrics;
  std::vector<CategorizedError> errors;
  std::string log;
};

/// Parses cell and wire counts, latch messages and loop reports from a
/// yosys log. Never throws.
SynthMetrics parse_synth_log(std::string_view log);

class Validator {
 public:
  explicit Validator(std::shared_ptr<ToolRunner> runner, ValidatorConfig config = {});

  /// Throws ToolMissing when no lint tool exists, ToolCrash when the tool
  /// dies on a signal.
  LintResult lint(std::string_view source, std::span<const std::string> deps = {},
                  LintMode mode = LintMode::kStrict2001);
  SimOutcome simulate(std::string_view design, std::string_view testbench,
                      std::span<const std::string> deps = {});
  SynthOutcome synthesize_check(std::string_view source, std::span<const std::string> deps = {});

  /// Lint, then simulate when a testbench is given, then synthesize; stops
  /// at the first failing stage. Synthesis is skipped when yosys is absent.
  ValidationReport validate(std::string_view source, std::optional<std::string_view> testbench,
                            std::span<const std::string> deps = {},
                            LintMode mode = LintMode::kStrict2001);

  ToolRunner& runner() { return *runner_; }

 private:
  std::shared_ptr<ToolRunner> runner_;
  ValidatorConfig config_;
  std::shared_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace rtlforge::validation
