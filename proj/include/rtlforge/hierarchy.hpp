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

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtlforge/agents.hpp"
#include "rtlforge/spec.hpp"
#include "rtlforge/validation.hpp"

namespace rtlforge::hier {

inline constexpr int kMinSubmodules = 4;
inline constexpr int kMaxSubmodules = 8;
inline constexpr double kDecomposeTemperature = 0.2;

struct PortSpec {
  std::string name;
  std::string dir;  // input, output, inout
  int width = 1;

  bool operator==(const PortSpec&) const = default;
};

struct SubmoduleSpec {
  std::string name;
  std::string description;
  std::vector<PortSpec> interface;
  std::vector<std::string> dependencies;

  bool operator==(const SubmoduleSpec&) const = default;
};

struct DecompositionPlan {
  std::vector<SubmoduleSpec> submodules;
  std::string top;

  const SubmoduleSpec* find(std::string_view name) const;
  bool operator==(const DecompositionPlan&) const = default;
};

/// {"submodules":[{"name","description","interface":[{"name","dir","width"}],
///   "dependencies":[..]}],"top":".."}
nlohmann::json plan_to_json(const DecompositionPlan& plan);

/// Validates names, cardinality (4..8), dependency references and
/// acyclicity. When "top" is absent the top is the module nothing depends
/// on, ties going to the name closest to `spec_name`. Throws
/// DecompositionMalformed or CycleError.
DecompositionPlan plan_from_json(const nlohmann::json& j, std::string_view spec_name = {});

/// A dependency cycle as a closed path (first name repeated last), or empty.
std::vector<std::string> find_cycle(const DecompositionPlan& plan);

/// Leaves first; ready modules are taken by ascending name with the top
/// held back while anything else is ready. Throws CycleError.
std::vector<std::string> topo_order(const DecompositionPlan& plan);

/// "module name(input wire [W-1:0] a, ...);" for a sub-module interface.
std::string interface_header(const SubmoduleSpec& sub);

struct DecomposeOptions {
  std::string model = "general-large";
  double temperature = kDecomposeTemperature;
  int max_tokens = agents::kDefaultMaxTokens;
};

agents::CompletionRequest decompose_request(const Spec& spec, const DecomposeOptions& opts = {},
                                            std::string_view problem = {});

/// JSON object from a response: a fenced block, else the outermost braces.
/// Throws DecompositionMalformed.
nlohmann::json extract_json(std::string_view response);

/// One re-prompt naming the problem, then DecompositionMalformed or
/// CycleError.
DecompositionPlan decompose(const Spec& spec, agents::Backend& backend, const DecomposeOptions& opts = {});

/// Per module: the header through the port list plus a stub endmodule.
/// Non-ANSI ports are rebuilt from the body declarations. Throws
/// VerilogParseFailure when there is no module.
std::string extract_header(std::string_view module_source);

/// Keeps the first full definition of each module; later copies and stubs
/// of defined modules are removed. Idempotent; unchanged when there is
/// nothing to remove.
std::string dedupe_modules(std::string_view combined_source);

struct ModuleResult {
  std::string name;
  std::string source;
  bool lint_passed = false;
  int iterations = 0;
  int loc = 0;
  long tokens_in = 0;
  long tokens_out = 0;
  std::vector<validation::CategorizedError> errors;
};

struct HierarchicalResult {
  DecompositionPlan plan;
  std::vector<std::string> order;
  std::vector<ModuleResult> modules;
  std::string combined_source;
  validation::LintResult combined_lint;
  bool passed = false;  // every module and the combined source lint clean
  int backend_calls = 0;
};

nlohmann::json hierarchical_to_json(const HierarchicalResult& r);

struct HierarchyOptions {
  int max_iterations = 5;  // per sub-module
  DecomposeOptions decompose;
  const agents::AgentProfiles* profiles = nullptr;  // builtin when null
  /// Progress callback: (kind, message), kinds "plan", "module", "lint", "combined".
  std::function<void(std::string_view, std::string_view)> on_event;
};

/// Decomposes (unless a plan is given), then generates each module in
/// topological order with earlier headers as context, lints each in
/// SystemVerilog mode with those headers, and lints the deduplicated
/// combination. Failed modules are recorded and the run continues.
HierarchicalResult generate_hierarchical(const Spec& spec, agents::Backend& backend,
                                         validation::Validator& validator,
                                         const HierarchyOptions& opts = {},
                                         const DecompositionPlan* plan = nullptr);

}  // namespace rtlforge::hier
