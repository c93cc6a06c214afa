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

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtlforge/agents.hpp"
#include "rtlforge/guidance.hpp"
#include "rtlforge/kmap.hpp"
#include "rtlforge/knowledge.hpp"
#include "rtlforge/rl.hpp"
#include "rtlforge/spec.hpp"
#include "rtlforge/validation.hpp"

namespace rtlforge::pipeline {

// ------------------------------------------------------------------ thoughts

enum class ThoughtCategory {
  kAnalysis,
  kBottleneck,
  kProposal,
  kRetrieval,
  kGeneration,
  kValidation,
  kDecision,
  kError,
  kProgress,
};
inline constexpr int kNumThoughtCategories = 9;

std::string_view thought_category_name(ThoughtCategory c);
/// Throws ConfigError for unknown names.
ThoughtCategory parse_thought_category(std::string_view s);

struct ThoughtEvent {
  ThoughtCategory category = ThoughtCategory::kProgress;
  std::string message;
  double confidence = 1.0;  // [0, 1]
  std::vector<std::string> evidence;
  double timestamp = 0.0;  // seconds since the epoch

  bool operator==(const ThoughtEvent&) const = default;
};

nlohmann::json thought_to_json(const ThoughtEvent& e);
ThoughtEvent thought_from_json(const nlohmann::json& j);

/// Writes one JSON line and flushes.
void emit_thought(const ThoughtEvent& e, std::ostream& sink);

/// Per-run event stream. Timestamps never decrease; events are kept in
/// memory and mirrored to an optional sink. Thread-safe.
class ThoughtStream {
 public:
  using Clock = std::function<double()>;

  explicit ThoughtStream(std::ostream* sink = nullptr, Clock clock = {});

  void emit(ThoughtCategory c, std::string message, double confidence = 1.0,
            std::vector<std::string> evidence = {});
  std::vector<ThoughtEvent> events() const;
  std::size_t count(ThoughtCategory c) const;

 private:
  mutable std::mutex mu_;
  std::ostream* sink_;
  Clock clock_;
  double last_ = 0.0;
  std::vector<ThoughtEvent> events_;
};

// -------------------------------------------------------------------- config

struct Price {
  double input = 0.0;   // USD per token
  double output = 0.0;  // USD per token
};
using PriceTable = std::map<std::string, Price>;

PriceTable price_table_from_json(const nlohmann::json& j);

struct PipelineConfig {
  int max_iterations = 5;
  rl::PlannerKind planner = rl::PlannerKind::kPpo;
  std::string backend = "mock";  // "mock" or "remote"
  std::string backend_url;       // remote; RTLFORGE_LLM_URL when empty
  std::string backend_key_env = "RTLFORGE_LLM_KEY";
  validation::ToolPaths tools;
  std::string tool_fixtures;  // FixtureRunner file; real tools when empty
  std::string kb_path;
  std::string registry_path;
  std::string profiles_path;
  std::string reference_index;
  std::string reference_root;
  std::string policy_checkpoint;
  std::string world_model_checkpoint;
  std::string gate_checkpoint;
  std::string transitions_out;
  long max_tokens = 0;        // per run; 0 is unlimited
  double max_wall_s = 0.0;    // per run; 0 is unlimited
  double sim_timeout_s = 60.0;
  bool generate_testbench = true;
  int parallelism = 4;
  std::uint64_t seed = 0;
  int episode_offset = 0;
  std::optional<PriceTable> prices;

  /// Throws ConfigError.
  void validate() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& c);
/// Relative paths inside the file resolve against its directory.
PipelineConfig load_config(const std::string& path);

// ---------------------------------------------------------------- run record

enum class Outcome { kSolved, kExhausted, kError };
std::string_view outcome_name(Outcome o);

struct CallRecord {
  std::string purpose;  // generation, retry, testbench, hierarchy
  std::string model;
  long tokens_in = 0;
  long tokens_out = 0;
};

struct IterationRecord {
  int index = 0;
  rl::Action action;
  std::string agent;
  std::string decision_source;
  std::string rule;
  long tokens_in = 0;
  long tokens_out = 0;
  int retries = 0;
  rl::RewardBreakdown reward;
  validation::ValidationReport report;
  std::string error;
};

struct RunRecord {
  std::string spec_id;
  Category category = Category::kUnknown;
  RoutingDecision routing;
  std::vector<std::string> fired_detectors;
  std::string gate_config;
  std::string testbench;  // provided, generated or none
  validation::Stage required_stage = validation::Stage::kSynthPassed;
  std::vector<IterationRecord> iterations;
  std::vector<CallRecord> calls;
  Outcome outcome = Outcome::kExhausted;
  int iterations_used = 0;
  int generation_calls = 0;
  std::optional<validation::ValidationReport> final_report;
  std::optional<double> cost_usd;
  nlohmann::json hierarchy;  // null unless hierarchical
  std::string error;
  double wall_s = 0.0;
  double started_at = 0.0;
};

/// Everything but the "timing" section is deterministic for a seeded,
/// scripted run.
nlohmann::json run_record_to_json(const RunRecord& r);
nlohmann::json without_timing(nlohmann::json record);

/// Sum of tokens_in * input + tokens_out * output over every backend call.
/// Throws UnpricedModel for a model missing from the table.
double estimate_cost(const RunRecord& record, const PriceTable& prices);

// ------------------------------------------------------------------ pipeline

struct Problem {
  std::string id;
  Spec spec;
  std::optional<std::string> testbench;
  /// Scripted responses for this problem; the shared backend when empty.
  std::vector<std::string> script;
  /// Replaces the shared tool runner for this problem when set.
  std::shared_ptr<validation::ToolRunner> tools;
};

struct RunResult {
  RunRecord record;
  std::string source;
};

/// Loaded knowledge, registry, models and the shared transition buffer.
class Pipeline {
 public:
  /// Throws ConfigError for an invalid configuration or unreadable inputs.
  explicit Pipeline(PipelineConfig config, std::shared_ptr<agents::Backend> backend = nullptr,
                    std::shared_ptr<validation::ToolRunner> tools = nullptr);

  /// One problem start to finish. `episode` indexes the planner schedule.
  /// Reads the pass-rate history without updating it.
  RunResult generate_module(const Problem& problem, int episode = 0,
                            ThoughtStream* trace = nullptr) const;

  const PipelineConfig& config() const { return config_; }
  rl::TransitionBuffer& transitions() { return *buffer_; }
  guidance::PassRateHistory& history() { return history_; }

 private:
  PipelineConfig config_;
  std::shared_ptr<agents::Backend> backend_;
  std::shared_ptr<validation::ToolRunner> tools_;
  kb::KnowledgeBase kb_;
  std::vector<kb::ReferenceModule> library_;
  guidance::Registry registry_;
  guidance::GateModel gate_;
  agents::AgentProfiles profiles_;
  std::shared_ptr<rl::PolicyNetwork> policy_;
  std::shared_ptr<rl::WorldModel> world_;
  std::unique_ptr<rl::Planner> planner_;
  std::unique_ptr<rl::TransitionBuffer> buffer_;
  guidance::PassRateHistory history_;
};

/// Functions parsed from the description: K-map grids first unless the
/// text names a truth table. Throws ParseError.
std::vector<kmap::TruthFunction> symbolic_functions(std::string_view description);

/// Directory layout: each sub-directory holding spec.json or spec.txt is a
/// problem, with optional testbench.v, script.json and tools.json; loose
/// *.json spec files are problems too. Sorted by id. Throws ConfigError
/// "no problems found" when there are none.
std::vector<Problem> load_problems(const std::string& dir);

struct CategorySummary {
  int total = 0;
  int solved = 0;
};

struct BenchmarkSummary {
  int total = 0;
  int solved = 0;
  double pass_at_1 = 0.0;
  double mean_iterations = 0.0;  // over solved problems
  std::optional<double> total_cost;
  std::optional<double> mean_cost;
  std::map<std::string, CategorySummary> per_category;
  std::vector<std::string> failures;
  std::vector<RunRecord> records;  // in problem order
};

nlohmann::json summary_to_json(const BenchmarkSummary& s);

struct BenchmarkOptions {
  std::string out_dir;    // records and summary; nothing written when empty
  std::string trace_dir;  // one JSONL per problem; none when empty
};

/// Runs every problem with bounded parallelism. Pass-rate history is read
/// from a snapshot taken at the start and updated in problem order at the
/// end.
BenchmarkSummary run_benchmark(const std::string& problem_dir, Pipeline& pipeline,
                               const BenchmarkOptions& opts = {});
BenchmarkSummary run_benchmark(const std::vector<Problem>& problems, Pipeline& pipeline,
                               const BenchmarkOptions& opts = {});

}  // namespace rtlforge::pipeline
