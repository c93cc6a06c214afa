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

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtlforge/spec.hpp"
#include "rtlforge/verilog.hpp"

namespace rtlforge::agents {

enum class AgentName { kGenius, kFast, kDebug, kOptimize, kWaveform, kTestbench };
inline constexpr int kNumAgents = 6;

std::string_view agent_name(AgentName a);
/// Throws ConfigError for unknown names.
AgentName parse_agent_name(std::string_view s);

enum class Selection { kRlPolicy, kKeywordRule, kExplicit };
std::string_view selection_name(Selection s);

struct AgentProfile {
  AgentName name = AgentName::kFast;
  std::string model_id;
  double default_temperature = 0.5;
  int default_rag_k = 5;
  Selection selection = Selection::kRlPolicy;
  std::string system_prompt_template;
  std::vector<std::string> methodology;  // numbered steps, Waveform only

  void validate() const;
};

AgentProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const AgentProfile& p);

/// One profile per AgentName, indexed by the enum.
class AgentProfiles {
 public:
  explicit AgentProfiles(std::vector<AgentProfile> profiles);
  static const AgentProfiles& builtin();
  static AgentProfiles from_json(const nlohmann::json& j);
  /// Empty path returns the builtin profiles.
  static AgentProfiles load(const std::string& path);

  const AgentProfile& get(AgentName a) const { return profiles_[static_cast<int>(a)]; }
  const std::vector<AgentProfile>& all() const { return profiles_; }
  nlohmann::json to_json() const;

 private:
  std::vector<AgentProfile> profiles_;
};

/// The six waveform-analysis steps, in order.
const std::vector<std::string>& waveform_steps();

inline constexpr int kDefaultMaxTokens = 4096;

struct CompletionRequest {
  std::string model;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.5;
  int max_tokens = kDefaultMaxTokens;

  bool operator==(const CompletionRequest&) const = default;
};

struct CompletionResult {
  std::string text;
  long input_tokens = 0;
  long output_tokens = 0;
  double latency_s = 0.0;
};

/// One validation error as shown to the model.
struct ErrorFeedback {
  std::string category;
  std::string stage;
  int line = 0;  // 0 when unknown
  std::string message;
  std::string context;  // numbered source lines around `line`
  std::string hint;
};

struct PromptOptions {
  std::optional<double> temperature;  // profile default when absent
  std::optional<int> max_tokens;
};

/// Sections are delimited by "=== NAME ===" lines. Deterministic.
CompletionRequest build_prompt(const AgentProfile& agent, const Spec& spec,
                               std::string_view rag_context = {},
                               std::span<const ErrorFeedback> errors = {},
                               const PromptOptions& opts = {});

std::string format_error_feedback(std::span<const ErrorFeedback> errors);

// ------------------------------------------------------------------ backends

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Whitespace-separated token count used for accounting by the mock.
long count_tokens(std::string_view s);

/// Replays a scripted list of responses, or answers through a responder
/// function. Records every request it receives. Thread-safe.
class MockBackend : public Backend {
 public:
  using Responder = std::function<std::string(const CompletionRequest&)>;

  explicit MockBackend(std::vector<std::string> script);
  explicit MockBackend(Responder responder);

  /// Throws ScriptExhausted once every scripted response was used.
  CompletionResult complete(const CompletionRequest& request) override;
  std::string name() const override { return "mock"; }

  std::vector<CompletionRequest> requests() const;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> script_;
  std::size_t next_ = 0;
  Responder responder_;
  std::vector<CompletionRequest> log_;
};

struct RemoteConfig {
  std::string url;      // e.g. https://host/v1/chat
  std::string api_key;  // sent as a bearer token when non-empty
  double timeout_s = 120.0;
  int attempts = 3;
  double backoff_s = 1.0;  // doubled after each failed attempt
  /// Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(double)> sleep;

  /// Reads RTLFORGE_LLM_URL and RTLFORGE_LLM_KEY. Throws ConfigError when
  /// the URL is unset.
  static RemoteConfig from_env();
};

/// {model, system, messages:[{role:"user",content}], temperature, max_tokens}
nlohmann::json remote_payload(const CompletionRequest& request);
/// Accepts {"text"}, {"choices":[{"message":{"content"}}]} and
/// {"content":[{"text"}]} shapes, with optional usage counts.
CompletionResult parse_remote_response(const nlohmann::json& body);

/// Chat-completion endpoint over HTTP(S). Connection failures, timeouts,
/// 429 and 5xx are retried; other non-2xx statuses raise BackendError.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  CompletionResult complete(const CompletionRequest& request) override;
  std::string name() const override { return "remote"; }

 private:
  CompletionResult attempt(const CompletionRequest& request) const;

  RemoteConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

// -------------------------------------------------------------- extraction

/// Fenced blocks holding a module, concatenated in order; else the span
/// from the first module header to the last endmodule. Throws
/// ExtractionFailed.
std::string extract_code(std::string_view response);

struct GenerationResult {
  std::string source;
  std::string raw_response;
  long tokens_in = 0;
  long tokens_out = 0;
  AgentName agent = AgentName::kFast;
  bool extraction_failed = false;
  CompletionRequest request;
};

GenerationResult generate(Backend& backend, const AgentProfile& agent, const Spec& spec,
                          std::string_view rag_context = {},
                          std::span<const ErrorFeedback> errors = {},
                          const PromptOptions& opts = {});

// --------------------------------------------------------------- testbench

struct Compliance {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Lexical checks: Verilog-2001 only, instantiates the module, 10 ns clock
/// when the module has a clock, reset sequence when it has a reset, at
/// least five labelled scenarios, and a recognised status marker.
Compliance check_testbench(std::string_view testbench, const verilog::ModuleInfo& dut);

inline constexpr int kMinScenarios = 5;

CompletionRequest testbench_request(const AgentProfile& agent, const Spec& spec,
                                    const verilog::ModuleInfo& dut,
                                    std::span<const std::string> problems = {});

struct TestbenchResult {
  std::string source;
  Compliance compliance;
  int attempts = 0;
  long tokens_in = 0;
  long tokens_out = 0;
};

/// Requests a testbench and re-requests with the listed problems while it
/// is non-compliant, up to `max_attempts`.
TestbenchResult generate_testbench(Backend& backend, const Spec& spec,
                                   std::string_view module_header, int max_attempts = 3,
                                   const AgentProfiles& profiles = AgentProfiles::builtin());

/// Appends a wrapper named `expected_top` forwarding one-to-one to the
/// single top module of `module_source`. Ports required by the wrapper are
/// those the testbench connects by name on `expected_top`, else all ports
/// of the generated module. Returns the source unchanged when the top is
/// already named `expected_top`. Throws PortMismatchError.
std::string adapt_testbench(std::string_view module_source, std::string_view testbench_source,
                            std::string_view expected_top = "TopModule");

}  // namespace rtlforge::agents
