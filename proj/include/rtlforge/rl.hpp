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

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtlforge/agents.hpp"
#include "rtlforge/nn.hpp"
#include "rtlforge/rng.hpp"
#include "rtlforge/spec.hpp"
#include "rtlforge/validation.hpp"

namespace rtlforge::rl {

inline constexpr int kStructuralDim = 40;
inline constexpr int kIdentifierDim = 128;
inline constexpr int kStateDim = kStructuralDim + kIdentifierDim;
inline constexpr int kNumPlannedAgents = 4;  // Genius, Fast, Debug, Optimize
inline constexpr int kNumFocus = 5;
inline constexpr int kNumContinuous = 4;
inline constexpr int kActionDim = kNumPlannedAgents + kNumFocus + kNumContinuous;

using State = std::array<double, kStateDim>;

/// Feature index map loaded from state_layout.json.
class StateLayout {
 public:
  static const StateLayout& builtin();
  static StateLayout from_json(const nlohmann::json& j);

  /// Throws ConfigError for unknown names.
  int index(std::string_view name) const;
  int version() const { return version_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  int version_ = 0;
  std::vector<std::string> names_;
  std::map<std::string, int, std::less<>> index_;
};

/// 128 signed buckets over byte trigrams (FNV-1a 64), L2-normalized. Texts
/// shorter than three bytes hash as one gram. Empty text gives zeros.
std::array<double, kIdentifierDim> spec_identifier(std::string_view text);

/// In [0,1]; combines description length, component count and category.
double complexity_estimate(const Spec& spec);

struct IterationContext {
  int iteration = 0;  // 0-based
  int max_iterations = 5;
  bool testbench_available = false;
  std::string current_source;  // latest generated code, may be empty
  std::optional<validation::ValidationReport> previous_report;
  double sim_latency_s = 0.0;
};

/// Structural features then the identifier. `history` holds the planned
/// agent index of each earlier iteration.
State encode_state(const Spec& spec, const IterationContext& ctx,
                   const validation::ValidationReport* latest, std::span<const int> history);

// ------------------------------------------------------------------ actions

enum class Focus { kFull, kMinimal, kError, kSynthesis, kArchitecture };
std::string_view focus_name(Focus f);
/// Throws ConfigError.
Focus parse_focus(std::string_view s);

struct Action {
  int agent = 0;
  int focus = 0;
  double temperature = 0.5;
  double token_budget = 0.5;
  double rag_depth = 0.5;
  double retry_budget = 0.5;

  Action() = default;
  /// Throws ConfigError when a component is out of range.
  Action(int agent, int focus, double temperature, double token_budget, double rag_depth,
         double retry_budget);

  bool operator==(const Action&) const = default;
};

nlohmann::json action_to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

/// Agent for a planned index 0..3.
agents::AgentName planned_agent(int index);

struct GenerationConfig {
  agents::AgentName agent = agents::AgentName::kFast;
  Focus focus = Focus::kFull;
  double temperature = 0.5;
  int rag_k = 3;
  int max_tokens = 256;
  int retries = 1;

  bool operator==(const GenerationConfig&) const = default;
};

/// k = round(3 + 17 r), tokens = round(256 + 3840 t), retries = round(1 + 4 b).
GenerationConfig map_action(const Action& action);

// ------------------------------------------------------------------- reward

struct RewardBreakdown {
  double term = 0, eff = 0, qual = 0, prog = 0, total = 0;

  bool operator==(const RewardBreakdown&) const = default;
};

nlohmann::json reward_to_json(const RewardBreakdown& r);
RewardBreakdown reward_from_json(const nlohmann::json& j);

struct RewardConfig {
  double low_area_factor = 1.25;
  std::map<Category, double> cell_baselines;

  static const RewardConfig& builtin();
  static RewardConfig from_json(const nlohmann::json& j);
  double low_area_threshold(Category c) const;
};

inline constexpr double kRewardSimPass = 100.0;
inline constexpr double kRewardLintPass = 60.0;
inline constexpr double kRewardFailure = -50.0;
inline constexpr double kRewardFirstTry = 20.0;
inline constexpr double kRewardPerToken = -0.001;
inline constexpr double kRewardLowArea = 10.0;
inline constexpr double kRewardTimingMet = 15.0;
inline constexpr double kRewardPerStage = 5.0;
inline constexpr double kRewardPerErrorFixed = 3.0;

/// Stage advance and error elimination are measured against `previous`
/// (stage None with no errors when absent). Quality bonuses need synthesis
/// metrics.
RewardBreakdown compute_reward(const validation::ValidationReport& report,
                               const validation::ValidationReport* previous, long tokens_used,
                               int iteration_index, bool first_attempt,
                               Category design = Category::kUnknown,
                               const RewardConfig& config = RewardConfig::builtin());

// --------------------------------------------------------------- heuristic

struct HeuristicRule {
  std::string name;
  std::optional<std::string> stage;
  std::optional<bool> has_errors, sim_failed, synth_warnings;
  std::optional<int> iteration;
  std::optional<double> min_complexity, max_complexity;
  Action action;
};

class HeuristicPolicy {
 public:
  static const HeuristicPolicy& builtin();
  static HeuristicPolicy from_json(const nlohmann::json& j);

  /// First matching rule; the last rule must match everything.
  const HeuristicRule& match(const State& state) const;
  Action operator()(const State& state) const { return match(state).action; }
  const std::vector<HeuristicRule>& rules() const { return rules_; }

 private:
  std::vector<HeuristicRule> rules_;
};

// ------------------------------------------------------------------ policy

struct PpoHyper {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  double epsilon0 = 0.3;
  double epsilon_decay = 0.995;
  int warm_start_episodes = 20;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double lr = 3e-4;
  int epochs = 4;
  int minibatch = 32;

  void validate() const;
};

double epsilon_schedule(int episode, const PpoHyper& hyper = {});

struct PolicyOutput {
  std::array<double, kNumPlannedAgents> agent_logits{};
  std::array<double, kNumFocus> focus_logits{};
  std::array<double, kNumContinuous> pre_means{};  // before the sigmoid
  std::array<double, kNumContinuous> means{};
  double value = 0;
};

/// 168 -> 256 -> 256 trunk (affine, layer norm, ReLU) with agent/focus
/// logits, sigmoid-bounded continuous means and a value head.
class PolicyNetwork {
 public:
  static constexpr int kHidden = 256;

  PolicyNetwork();  // all parameters zero
  /// Xavier-uniform weights, unit layer-norm gains, zero biases.
  void init(Rng& rng);

  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  struct Trace {
    std::vector<double> x, a1, n1, h1, a2, n2, h2;
    double s1 = 1, s2 = 1;
  };

  /// Throws ShapeMismatch unless the input has 168 entries.
  PolicyOutput forward(std::span<const double> state) const;
  PolicyOutput forward(std::span<const double> state, Trace& trace) const;

  /// Accumulates parameter gradients given output gradients: 9 logits,
  /// 4 pre-sigmoid means, value.
  void backward(const Trace& trace, std::span<const double> d_logits,
                std::span<const double> d_pre_means, double d_value, std::span<double> grad) const;

  std::vector<nn::Tensor> to_tensors() const;
  void load_tensors(const std::vector<nn::Tensor>& tensors);
  void save(const std::string& path) const;
  static PolicyNetwork load(const std::string& path);

 private:
  struct Block {
    std::string name;
    std::vector<int> shape;
    std::size_t offset;
    std::size_t size;
  };
  const Block& block(std::string_view name) const;
  std::vector<Block> blocks_;
  std::vector<double> params_;
};

struct SampledAction {
  Action action;
  std::array<double, kNumContinuous> pre_sigmoid{};  // sampled z
  double sigma = 0;                                  // 0.1 * epsilon
  bool explored = false;
};

/// With probability epsilon the discrete parts are uniform, else argmax
/// (lowest index on ties). Continuous parts are sigmoid(mean + noise) with
/// noise ~ N(0, (0.1 epsilon)^2) clipped to two standard deviations.
SampledAction sample_action(const PolicyOutput& out, double epsilon, Rng& rng);
SampledAction sample_action(const PolicyOutput& out, double epsilon, std::uint64_t seed);

/// Categorical log-probabilities of both discrete parts plus the Gaussian
/// log-density of z in pre-sigmoid space (omitted when sigma is 0).
double action_log_prob(const PolicyOutput& out, int agent, int focus,
                       std::span<const double> z, double sigma);

// ------------------------------------------------------------- transitions

struct Transition {
  State state{};
  SampledAction sampled;
  double log_prob = 0;
  double value = 0;
  RewardBreakdown reward;
  long tokens = 0;
  State next_state{};
  bool done = false;
  std::string episode;
};

nlohmann::json transition_to_json(const Transition& t);
Transition transition_from_json(const nlohmann::json& j);

/// Append-only, thread-safe. Episodes are runs of transitions sharing an
/// episode id; an episode is complete once a transition has done set.
class TransitionBuffer {
 public:
  void append(Transition t);
  std::vector<Transition> snapshot() const;
  std::vector<std::vector<Transition>> completed_episodes() const;
  std::size_t size() const;
  void clear();

  /// One JSON object per line.
  void save_jsonl(const std::string& path) const;
  static std::unique_ptr<TransitionBuffer> load_jsonl(const std::string& path);

 private:
  mutable std::mutex mu_;
  std::vector<Transition> items_;
};

// --------------------------------------------------------------------- ppo

/// Generalized advantage estimates for one episode. `last_value` bootstraps
/// a non-terminal end.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                bool terminal, double last_value, double gamma, double lambda);

struct PpoSample {
  State state{};
  int agent = 0;
  int focus = 0;
  std::array<double, kNumContinuous> z{};
  double sigma = 0;
  double log_prob_old = 0;
  double advantage = 0;
  double ret = 0;
};

struct PpoLoss {
  double policy = 0, value = 0, entropy = 0, total = 0;
};

/// Mean over the batch of -min(r A, clip(r) A) + c_v (V - R)^2 - c_e H.
/// Adds the gradient to `grad` when it is non-empty.
PpoLoss ppo_loss(const PolicyNetwork& policy, std::span<const PpoSample> batch,
                 const PpoHyper& hyper, std::span<double> grad = {});

struct PpoStats {
  PpoLoss loss;  // of the last minibatch
  int samples = 0;
  int steps = 0;
};

/// Owns the optimizer state across updates; updates are serialized.
class PpoTrainer {
 public:
  PpoTrainer(std::shared_ptr<PolicyNetwork> policy, PpoHyper hyper = {}, std::uint64_t seed = 0);

  /// Throws EmptyBuffer when no episode is complete.
  PpoStats update(const TransitionBuffer& buffer);
  PpoStats update(std::span<const std::vector<Transition>> episodes);

  std::shared_ptr<const PolicyNetwork> snapshot() const;
  const PpoHyper& hyper() const { return hyper_; }

 private:
  std::shared_ptr<PolicyNetwork> policy_;
  PpoHyper hyper_;
  nn::Adam adam_;
  Rng rng_;
  mutable std::mutex mu_;
};

// ------------------------------------------------------------- world model

struct Prediction {
  double stage_delta = 0;
  double error_delta = 0;
  double token_cost = 0;
  double reward = 0;

  bool operator==(const Prediction&) const = default;
};

std::array<double, kActionDim> encode_action(const Action& a);

class WorldModel {
 public:
  virtual ~WorldModel() = default;
  virtual Prediction predict(const State& state, const Action& action) const = 0;
};

struct WorldSample {
  State state{};
  Action action;
  Prediction target;
};

/// (state, action) 181 -> 64 ReLU -> 4, trained on squared error with
/// targets scaled to (1, 1, 1/1000, 1/100).
class MlpWorldModel : public WorldModel {
 public:
  MlpWorldModel();  // zero parameters
  Prediction predict(const State& state, const Action& action) const override;

  /// Returns the final mean loss.
  double train(std::span<const WorldSample> data, int epochs, double lr, std::uint64_t seed);
  /// Mean scaled squared error, gradient added to `grad` when non-empty.
  double loss(std::span<const WorldSample> data, std::span<double> grad = {}) const;

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }
  void save(const std::string& path) const;
  static std::unique_ptr<MlpWorldModel> load(const std::string& path);

 private:
  nn::Mlp net_;
};

std::vector<WorldSample> world_samples(std::span<const Transition> transitions);

/// Moves iteration, stage, error and agent-history features by a
/// prediction; used for multi-step rollouts.
State advance_state(const State& state, const Action& action, const Prediction& p);

struct MpcConfig {
  int candidates = 64;
  int horizon = 3;
  double gamma = 0.99;
};

struct MpcResult {
  Action action;
  double score = 0;
  int best_index = 0;
  int model_calls = 0;
};

/// Random shooting: uniform action sequences scored by discounted predicted
/// reward; the first action of the best sequence (lowest index on ties).
/// Throws ModelMissing when `model` is null.
MpcResult mpc_plan(const State& state, const WorldModel* model, const MpcConfig& config,
                   std::uint64_t seed);

// ----------------------------------------------------------------- planner

enum class PlannerKind { kPpo, kMpc, kHeuristic };
std::string_view planner_name(PlannerKind k);
PlannerKind parse_planner(std::string_view s);

struct Decision {
  SampledAction sampled;
  std::string source;  // "heuristic", "policy", "mpc"
  std::string rule;    // matched heuristic rule, if any
  double log_prob = 0;
  double value = 0;
  double epsilon = 0;
};

/// Chooses iteration actions. The PPO planner falls back to the heuristic
/// for the first warm-start episodes; MPC falls back when no model is set.
class Planner {
 public:
  Planner(PlannerKind kind, std::shared_ptr<const PolicyNetwork> policy = nullptr,
          std::shared_ptr<const WorldModel> world = nullptr, PpoHyper hyper = {},
          MpcConfig mpc = {});

  Decision decide(const State& state, int episode, std::uint64_t seed) const;
  PlannerKind kind() const { return kind_; }

 private:
  PlannerKind kind_;
  std::shared_ptr<const PolicyNetwork> policy_;
  std::shared_ptr<const WorldModel> world_;
  PpoHyper hyper_;
  MpcConfig mpc_;
};

}  // namespace rtlforge::rl
