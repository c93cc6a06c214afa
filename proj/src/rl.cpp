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
#include "rtlforge/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rtlforge/data.hpp"
#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"
#include "rtlforge/verilog.hpp"

namespace rtlforge::rl {

using nlohmann::json;
using validation::ValidationReport;

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr const char* kPolicyKind = "policy";
constexpr const char* kWorldKind = "world-model";
constexpr std::array<double, 4> kWorldScale = {1.0, 1.0, 1e-3, 1e-2};
constexpr std::string_view kFocusNames[] = {"full", "minimal", "error", "synthesis", "architecture"};
constexpr std::string_view kStageNames[] = {"None", "LintPassed", "SimPassed", "SynthPassed"};
constexpr std::string_view kAgentNames[] = {"Genius", "Fast", "Debug", "Optimize"};
constexpr std::string_view kErrorNames[] = {"Syntax",           "PortMismatch",  "WidthMismatch",
                                            "UndeclaredSignal", "InferredLatch", "Other"};
constexpr std::string_view kTrendNames[] = {"Improving", "Worsening", "TypeChanged", "Unchanged"};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double logit(double p) {
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

template <std::size_t N>
std::array<double, N> softmax(const std::array<double, N>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::array<double, N> p{};
  double s = 0;
  for (std::size_t i = 0; i < N; ++i) s += (p[i] = std::exp(z[i] - m));
  for (auto& v : p) v /= s;
  return p;
}

template <std::size_t N>
int argmax(const std::array<double, N>& z) {
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

int stage_index(const State& s) {
  const auto& L = StateLayout::builtin();
  for (int i = 0; i < 4; ++i)
    if (s[L.index("stage." + std::string(kStageNames[i]))] > 0.5) return i;
  return -1;
}

double error_total(const State& s) {
  const auto& L = StateLayout::builtin();
  double t = 0;
  for (auto n : kErrorNames) t += s[L.index("errors." + std::string(n))];
  return t * 10.0;
}

double gaussian_log_density(double z, double mu, double sigma) {
  const double u = (z - mu) / sigma;
  return -0.5 * u * u - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.index(static_cast<int>(i)))]);
}

template <std::size_t N>
json array_json(const std::array<double, N>& a) {
  return json(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> array_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != N) throw ShapeMismatch("expected " + std::to_string(N) + " values, got " + std::to_string(v.size()));
  std::array<double, N> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

}  // namespace

// ------------------------------------------------------------------- layout

const StateLayout& StateLayout::builtin() {
  static const StateLayout l = from_json(json::parse(data::builtin("state_layout.json")));
  return l;
}

StateLayout StateLayout::from_json(const json& j) {
  StateLayout l;
  try {
    l.version_ = j.at("version").get<int>();
    if (j.at("structural").get<int>() != kStructuralDim || j.at("identifier").get<int>() != kIdentifierDim)
      throw ConfigError("state layout dimensions must be 40 + 128");
    const auto& feats = j.at("features");
    if (feats.size() != kStructuralDim) throw ConfigError("state layout must list 40 features");
    for (const auto& f : feats) {
      const int i = f.at("index").get<int>();
      const auto name = f.at("name").get<std::string>();
      if (i != static_cast<int>(l.names_.size())) throw ConfigError("state layout indices must be consecutive");
      if (!l.index_.emplace(name, i).second) throw ConfigError("duplicate state feature " + name);
      l.names_.push_back(name);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed state layout: ") + e.what());
  }
  return l;
}

int StateLayout::index(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown state feature " + std::string(name));
  return it->second;
}

// -------------------------------------------------------------------- state

std::array<double, kIdentifierDim> spec_identifier(std::string_view text) {
  std::array<double, kIdentifierDim> v{};
  if (text.empty()) return v;
  auto add = [&](std::string_view gram) {
    const auto h = text::fnv1a64(gram);
    v[h % kIdentifierDim] += (h >> 63) ? -1.0 : 1.0;
  };
  if (text.size() < 3)
    add(text);
  else
    for (std::size_t i = 0; i + 3 <= text.size(); ++i) add(text.substr(i, 3));
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm > 0) {
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
  }
  return v;
}

double complexity_estimate(const Spec& spec) {
  static const std::map<Category, double> weight = {
      {Category::kCombinational, 0.1}, {Category::kSequential, 0.3}, {Category::kFsm, 0.5},
      {Category::kMemory, 0.6},        {Category::kBus, 0.7},        {Category::kProcessor, 1.0},
      {Category::kUnknown, 0.4}};
  const double length = std::min(1.0, static_cast<double>(spec.description.size()) / 1500.0);
  const double components = std::min(1.0, static_cast<double>(count_components(spec).size()) / 4.0);
  return clamp01(0.4 * length + 0.3 * components + 0.3 * weight.at(effective_category(spec)));
}

State encode_state(const Spec& spec, const IterationContext& ctx, const ValidationReport* latest,
                   std::span<const int> history) {
  const auto& L = StateLayout::builtin();
  State s{};
  s[L.index("complexity")] = complexity_estimate(spec);
  s[L.index("category." + std::string(category_name(effective_category(spec))))] = 1.0;
  s[L.index("iteration")] = clamp01(ctx.iteration / 5.0);
  s[L.index("refining")] = ctx.iteration > 0 ? 1.0 : 0.0;
  s[L.index("testbench_available")] = ctx.testbench_available ? 1.0 : 0.0;
  if (latest) {
    s[L.index("stage." + std::string(validation::stage_name(latest->stage_reached)))] = 1.0;
    std::array<int, validation::kNumErrorCategories> counts{};
    for (const auto& e : latest->errors) ++counts[static_cast<int>(e.category)];
    for (int i = 0; i < validation::kNumErrorCategories; ++i)
      s[L.index("errors." + std::string(kErrorNames[i]))] = std::min(1.0, counts[i] / 10.0);
    if (ctx.previous_report) {
      const auto t = validation::error_trend(*ctx.previous_report, *latest);
      s[L.index("trend." + std::string(kTrendNames[static_cast<int>(t)]))] = 1.0;
    }
    if (latest->sim) {
      const auto& sim = *latest->sim;
      if (sim.samples > 0)
        s[L.index("sim.mismatch_fraction")] = clamp01(static_cast<double>(sim.mismatches) / sim.samples);
      s[L.index("sim.failed")] = sim.passed ? 0.0 : 1.0;
    }
    if (latest->synth && (latest->synth->latch_warnings > 0 || latest->synth->combinational_loop))
      s[L.index("synth.warnings")] = 1.0;
  }
  s[L.index("sim.latency")] = clamp01(ctx.sim_latency_s / 60.0);
  if (!ctx.current_source.empty()) {
    s[L.index("code.lines")] = clamp01(verilog::count_code_lines(ctx.current_source) / 500.0);
    s[L.index("code.always_blocks")] = clamp01(verilog::count_always_blocks(ctx.current_source) / 20.0);
    try {
      const auto mods = verilog::parse_modules(ctx.current_source);
      if (!mods.empty()) s[L.index("code.ports")] = clamp01(mods.back().ports.size() / 32.0);
    } catch (const Error&) {
    }
  }
  for (int a : history) {
    if (a < 0 || a >= kNumPlannedAgents) continue;
    auto& c = s[L.index("agent_count." + std::string(kAgentNames[a]))];
    c = std::min(1.0, c + 0.2);
  }
  if (!history.empty() && history.back() >= 0 && history.back() < kNumPlannedAgents)
    s[L.index("last_agent." + std::string(kAgentNames[history.back()]))] = 1.0;
  const auto id = spec_identifier(spec.description);
  std::copy(id.begin(), id.end(), s.begin() + kStructuralDim);
  return s;
}

// ------------------------------------------------------------------ actions

std::string_view focus_name(Focus f) { return kFocusNames[static_cast<int>(f)]; }

Focus parse_focus(std::string_view s) {
  for (int i = 0; i < kNumFocus; ++i)
    if (kFocusNames[i] == s) return static_cast<Focus>(i);
  throw ConfigError("unknown focus " + std::string(s));
}

Action::Action(int agent_, int focus_, double temperature_, double token_budget_, double rag_depth_,
               double retry_budget_)
    : agent(agent_),
      focus(focus_),
      temperature(temperature_),
      token_budget(token_budget_),
      rag_depth(rag_depth_),
      retry_budget(retry_budget_) {
  if (agent < 0 || agent >= kNumPlannedAgents) throw ConfigError("action agent out of range");
  if (focus < 0 || focus >= kNumFocus) throw ConfigError("action focus out of range");
  for (double v : {temperature, token_budget, rag_depth, retry_budget})
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("continuous action component outside [0,1]");
}

json action_to_json(const Action& a) {
  return {{"agent", a.agent},           {"focus", a.focus},         {"temperature", a.temperature},
          {"token_budget", a.token_budget}, {"rag_depth", a.rag_depth}, {"retry_budget", a.retry_budget}};
}

Action action_from_json(const json& j) {
  try {
    auto discrete = [&](const char* key, auto parse) {
      const auto& v = j.at(key);
      return v.is_string() ? parse(v.template get<std::string>()) : v.template get<int>();
    };
    const int agent = discrete("agent", [](const std::string& s) {
      for (int i = 0; i < kNumPlannedAgents; ++i)
        if (kAgentNames[i] == s) return i;
      throw ConfigError("unknown planned agent " + s);
    });
    const int focus = discrete("focus", [](const std::string& s) { return static_cast<int>(parse_focus(s)); });
    return Action(agent, focus, j.at("temperature").get<double>(), j.at("token_budget").get<double>(),
                  j.at("rag_depth").get<double>(), j.at("retry_budget").get<double>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed action: ") + e.what());
  }
}

agents::AgentName planned_agent(int index) {
  static constexpr agents::AgentName table[] = {agents::AgentName::kGenius, agents::AgentName::kFast,
                                                agents::AgentName::kDebug, agents::AgentName::kOptimize};
  if (index < 0 || index >= kNumPlannedAgents) throw ConfigError("planned agent index out of range");
  return table[index];
}

GenerationConfig map_action(const Action& a) {
  GenerationConfig c;
  c.agent = planned_agent(a.agent);
  c.focus = static_cast<Focus>(a.focus);
  c.temperature = a.temperature;
  c.rag_k = static_cast<int>(std::lround(3.0 + 17.0 * a.rag_depth));
  c.max_tokens = static_cast<int>(std::lround(256.0 + 3840.0 * a.token_budget));
  c.retries = static_cast<int>(std::lround(1.0 + 4.0 * a.retry_budget));
  return c;
}

// ------------------------------------------------------------------- reward

json reward_to_json(const RewardBreakdown& r) {
  return {{"term", r.term}, {"eff", r.eff}, {"qual", r.qual}, {"prog", r.prog}, {"total", r.total}};
}

RewardBreakdown reward_from_json(const json& j) {
  try {
    return {j.at("term").get<double>(), j.at("eff").get<double>(), j.at("qual").get<double>(),
            j.at("prog").get<double>(), j.at("total").get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed reward: ") + e.what());
  }
}

const RewardConfig& RewardConfig::builtin() {
  static const RewardConfig c = from_json(json::parse(data::builtin("reward.json")));
  return c;
}

RewardConfig RewardConfig::from_json(const json& j) {
  RewardConfig c;
  try {
    c.low_area_factor = j.value("low_area_factor", 1.25);
    for (const auto& [k, v] : j.at("cell_baselines").items()) {
      const auto cat = parse_category(k);
      if (!cat) throw ConfigError("unknown category in reward baselines: " + k);
      c.cell_baselines[*cat] = v.get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed reward config: ") + e.what());
  }
  return c;
}

double RewardConfig::low_area_threshold(Category c) const {
  auto it = cell_baselines.find(c);
  if (it == cell_baselines.end()) it = cell_baselines.find(Category::kUnknown);
  return it == cell_baselines.end() ? 0.0 : low_area_factor * it->second;
}

RewardBreakdown compute_reward(const ValidationReport& report, const ValidationReport* previous,
                               long tokens_used, int /*iteration_index*/, bool first_attempt,
                               Category design, const RewardConfig& config) {
  RewardBreakdown r;
  const bool sim_passed = report.sim && report.sim->passed && report.stage_reached >= validation::Stage::kSimPassed;
  const bool lint_passed = report.stage_reached >= validation::Stage::kLintPassed;
  r.term = sim_passed ? kRewardSimPass : lint_passed ? kRewardLintPass : kRewardFailure;
  r.eff = (sim_passed && first_attempt ? kRewardFirstTry : 0.0) + kRewardPerToken * static_cast<double>(tokens_used);
  if (report.synth) {
    if (static_cast<double>(report.synth->cell_count) <= config.low_area_threshold(design)) r.qual += kRewardLowArea;
    if (report.synth->latch_warnings == 0 && !report.synth->combinational_loop) r.qual += kRewardTimingMet;
  }
  const int prev_stage = previous ? static_cast<int>(previous->stage_reached) : 0;
  const long prev_errors = previous ? static_cast<long>(previous->errors.size()) : 0;
  const int advanced = std::max(0, static_cast<int>(report.stage_reached) - prev_stage);
  const long fixed = std::max(0L, prev_errors - static_cast<long>(report.errors.size()));
  r.prog = kRewardPerStage * advanced + kRewardPerErrorFixed * static_cast<double>(fixed);
  r.total = r.term + r.eff + r.qual + r.prog;
  return r;
}

// ---------------------------------------------------------------- heuristic

const HeuristicPolicy& HeuristicPolicy::builtin() {
  static const HeuristicPolicy p = from_json(json::parse(data::builtin("heuristic_policy.json")));
  return p;
}

HeuristicPolicy HeuristicPolicy::from_json(const json& j) {
  HeuristicPolicy p;
  try {
    for (const auto& r : j.at("rules")) {
      HeuristicRule rule;
      rule.name = r.at("name").get<std::string>();
      const auto& w = r.at("when");
      for (const auto& [k, v] : w.items()) {
        if (k == "stage") {
          const auto s = v.get<std::string>();
          if (std::find(std::begin(kStageNames), std::end(kStageNames), s) == std::end(kStageNames))
            throw ConfigError("unknown stage in heuristic rule: " + s);
          rule.stage = s;
        } else if (k == "has_errors") rule.has_errors = v.get<bool>();
        else if (k == "sim_failed") rule.sim_failed = v.get<bool>();
        else if (k == "synth_warnings") rule.synth_warnings = v.get<bool>();
        else if (k == "iteration") rule.iteration = v.get<int>();
        else if (k == "min_complexity") rule.min_complexity = v.get<double>();
        else if (k == "max_complexity") rule.max_complexity = v.get<double>();
        else throw ConfigError("unknown heuristic condition " + k);
      }
      rule.action = action_from_json(r.at("action"));
      p.rules_.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed heuristic policy: ") + e.what());
  }
  auto catch_all = [](const HeuristicRule& r) {
    return !r.stage && !r.has_errors && !r.sim_failed && !r.synth_warnings && !r.iteration &&
           !r.min_complexity && !r.max_complexity;
  };
  if (p.rules_.empty() || !catch_all(p.rules_.back()))
    throw ConfigError("the last heuristic rule must have no conditions");
  return p;
}

const HeuristicRule& HeuristicPolicy::match(const State& s) const {
  const auto& L = StateLayout::builtin();
  const int stage = stage_index(s);
  const bool has_errors = error_total(s) > 0;
  const bool sim_failed = s[L.index("sim.failed")] > 0.5;
  const bool synth_warn = s[L.index("synth.warnings")] > 0.5;
  const int iteration = static_cast<int>(std::lround(s[L.index("iteration")] * 5.0));
  const double complexity = s[L.index("complexity")];
  for (const auto& r : rules_) {
    if (r.stage && (stage < 0 || kStageNames[stage] != *r.stage)) continue;
    if (r.has_errors && *r.has_errors != has_errors) continue;
    if (r.sim_failed && *r.sim_failed != sim_failed) continue;
    if (r.synth_warnings && *r.synth_warnings != synth_warn) continue;
    if (r.iteration && *r.iteration != iteration) continue;
    if (r.min_complexity && complexity < *r.min_complexity) continue;
    if (r.max_complexity && complexity > *r.max_complexity) continue;
    return r;
  }
  return rules_.back();
}

// ------------------------------------------------------------------- policy

void PpoHyper::validate() const {
  for (double v : {gamma, gae_lambda, clip_ratio, epsilon0, epsilon_decay})
    if (!(v > 0.0 && v <= 1.0)) throw ConfigError("PPO hyperparameters must lie in (0,1]");
  if (warm_start_episodes < 0 || epochs < 1 || minibatch < 1 || !(lr > 0))
    throw ConfigError("invalid PPO schedule settings");
}

double epsilon_schedule(int episode, const PpoHyper& hyper) {
  return hyper.epsilon0 * std::pow(hyper.epsilon_decay, std::max(0, episode));
}

PolicyNetwork::PolicyNetwork() {
  const int H = kHidden;
  const std::vector<std::pair<std::string, std::vector<int>>> layout = {
      {"trunk1.weight", {H, kStateDim}}, {"trunk1.bias", {H}},  {"norm1.gain", {H}},
      {"norm1.bias", {H}},               {"trunk2.weight", {H, H}}, {"trunk2.bias", {H}},
      {"norm2.gain", {H}},               {"norm2.bias", {H}},   {"discrete.weight", {kNumPlannedAgents + kNumFocus, H}},
      {"discrete.bias", {kNumPlannedAgents + kNumFocus}}, {"continuous.weight", {kNumContinuous, H}},
      {"continuous.bias", {kNumContinuous}}, {"value.weight", {1, H}}, {"value.bias", {1}}};
  std::size_t off = 0;
  for (const auto& [name, shape] : layout) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    blocks_.push_back({name, shape, off, n});
    off += n;
  }
  params_.assign(off, 0.0);
}

const PolicyNetwork::Block& PolicyNetwork::block(std::string_view name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw ShapeMismatch("no policy block " + std::string(name));
}

void PolicyNetwork::init(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (const auto& b : blocks_) {
    if (b.shape.size() == 2) {
      const double bound = std::sqrt(6.0 / (b.shape[0] + b.shape[1]));
      for (std::size_t i = 0; i < b.size; ++i) params_[b.offset + i] = rng.uniform(-bound, bound);
    } else if (b.name.ends_with(".gain")) {
      std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size, 1.0);
    }
  }
}

namespace {

// y = W x + b for a row-major block pair.
void affine(const double* w, const double* b, std::span<const double> x, std::vector<double>& y, int out) {
  const std::size_t in = x.size();
  y.assign(static_cast<std::size_t>(out), 0.0);
  for (int o = 0; o < out; ++o) {
    const double* row = w + static_cast<std::size_t>(o) * in;
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[static_cast<std::size_t>(o)] = acc;
  }
}

double layer_norm(const std::vector<double>& a, std::vector<double>& n) {
  const double k = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / k;
  double var = 0;
  for (double v : a) var += (v - mean) * (v - mean);
  var /= k;
  const double s = std::sqrt(var + kLayerNormEps);
  n.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) n[i] = (a[i] - mean) / s;
  return s;
}

}  // namespace

PolicyOutput PolicyNetwork::forward(std::span<const double> state) const {
  Trace t;
  return forward(state, t);
}

PolicyOutput PolicyNetwork::forward(std::span<const double> state, Trace& t) const {
  if (state.size() != static_cast<std::size_t>(kStateDim))
    throw ShapeMismatch("policy expects " + std::to_string(kStateDim) + " inputs, got " + std::to_string(state.size()));
  const double* p = params_.data();
  auto at = [&](std::string_view name) { return p + block(name).offset; };
  t.x.assign(state.begin(), state.end());
  affine(at("trunk1.weight"), at("trunk1.bias"), t.x, t.a1, kHidden);
  t.s1 = layer_norm(t.a1, t.n1);
  t.h1.resize(kHidden);
  const double* g1 = at("norm1.gain");
  const double* c1 = at("norm1.bias");
  for (int i = 0; i < kHidden; ++i) t.h1[i] = std::max(0.0, g1[i] * t.n1[i] + c1[i]);
  affine(at("trunk2.weight"), at("trunk2.bias"), t.h1, t.a2, kHidden);
  t.s2 = layer_norm(t.a2, t.n2);
  t.h2.resize(kHidden);
  const double* g2 = at("norm2.gain");
  const double* c2 = at("norm2.bias");
  for (int i = 0; i < kHidden; ++i) t.h2[i] = std::max(0.0, g2[i] * t.n2[i] + c2[i]);

  PolicyOutput out;
  std::vector<double> y;
  affine(at("discrete.weight"), at("discrete.bias"), t.h2, y, kNumPlannedAgents + kNumFocus);
  std::copy_n(y.begin(), kNumPlannedAgents, out.agent_logits.begin());
  std::copy_n(y.begin() + kNumPlannedAgents, kNumFocus, out.focus_logits.begin());
  affine(at("continuous.weight"), at("continuous.bias"), t.h2, y, kNumContinuous);
  for (int i = 0; i < kNumContinuous; ++i) {
    out.pre_means[i] = y[i];
    out.means[i] = nn::sigmoid(y[i]);
  }
  affine(at("value.weight"), at("value.bias"), t.h2, y, 1);
  out.value = y[0];
  return out;
}

void PolicyNetwork::backward(const Trace& t, std::span<const double> d_logits,
                             std::span<const double> d_pre_means, double d_value, std::span<double> grad) const {
  const double* p = params_.data();
  auto off = [&](std::string_view name) { return block(name).offset; };
  const int H = kHidden;
  std::vector<double> dh2(H, 0.0);
  auto head = [&](std::string_view w, std::string_view b, std::span<const double> dy) {
    const std::size_t wo = off(w), bo = off(b);
    for (std::size_t o = 0; o < dy.size(); ++o) {
      if (dy[o] == 0.0) continue;
      grad[bo + o] += dy[o];
      for (int i = 0; i < H; ++i) {
        grad[wo + o * H + i] += dy[o] * t.h2[i];
        dh2[i] += p[wo + o * H + i] * dy[o];
      }
    }
  };
  head("discrete.weight", "discrete.bias", d_logits);
  head("continuous.weight", "continuous.bias", d_pre_means);
  const double dv[1] = {d_value};
  head("value.weight", "value.bias", dv);

  // Back through relu(g * n + c) and the normalization, then the affine map.
  auto norm_back = [&](const std::vector<double>& h, const std::vector<double>& n, double s,
                       std::string_view gain, std::string_view bias, const std::vector<double>& dh) {
    const std::size_t go = off(gain), co = off(bias);
    std::vector<double> dn(H);
    double mean_dn = 0, mean_dn_n = 0;
    for (int i = 0; i < H; ++i) {
      const double dy = h[i] > 0.0 ? dh[i] : 0.0;
      grad[go + i] += dy * n[i];
      grad[co + i] += dy;
      dn[i] = dy * p[go + i];
      mean_dn += dn[i];
      mean_dn_n += dn[i] * n[i];
    }
    mean_dn /= H;
    mean_dn_n /= H;
    std::vector<double> da(H);
    for (int i = 0; i < H; ++i) da[i] = (dn[i] - mean_dn - n[i] * mean_dn_n) / s;
    return da;
  };
  const auto da2 = norm_back(t.h2, t.n2, t.s2, "norm2.gain", "norm2.bias", dh2);
  std::vector<double> dh1(H, 0.0);
  {
    const std::size_t wo = off("trunk2.weight"), bo = off("trunk2.bias");
    for (int o = 0; o < H; ++o) {
      if (da2[o] == 0.0) continue;
      grad[bo + o] += da2[o];
      for (int i = 0; i < H; ++i) {
        grad[wo + static_cast<std::size_t>(o) * H + i] += da2[o] * t.h1[i];
        dh1[i] += p[wo + static_cast<std::size_t>(o) * H + i] * da2[o];
      }
    }
  }
  const auto da1 = norm_back(t.h1, t.n1, t.s1, "norm1.gain", "norm1.bias", dh1);
  const std::size_t wo = off("trunk1.weight"), bo = off("trunk1.bias");
  const std::size_t in = t.x.size();
  for (int o = 0; o < H; ++o) {
    if (da1[o] == 0.0) continue;
    grad[bo + o] += da1[o];
    for (std::size_t i = 0; i < in; ++i) grad[wo + o * in + i] += da1[o] * t.x[i];
  }
}

std::vector<nn::Tensor> PolicyNetwork::to_tensors() const {
  std::vector<nn::Tensor> out;
  for (const auto& b : blocks_)
    out.push_back({b.name, b.shape,
                   std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                       params_.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size))});
  return out;
}

void PolicyNetwork::load_tensors(const std::vector<nn::Tensor>& tensors) {
  if (tensors.size() != blocks_.size())
    throw ShapeMismatch("policy checkpoint holds " + std::to_string(tensors.size()) + " tensors, expected " +
                        std::to_string(blocks_.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].name != blocks_[i].name || tensors[i].shape != blocks_[i].shape)
      throw ShapeMismatch("policy tensor " + tensors[i].name + " does not match " + blocks_[i].name);
  for (std::size_t i = 0; i < tensors.size(); ++i)
    std::copy(tensors[i].data.begin(), tensors[i].data.end(),
              params_.begin() + static_cast<std::ptrdiff_t>(blocks_[i].offset));
}

void PolicyNetwork::save(const std::string& path) const { nn::save_tensors(path, kPolicyKind, to_tensors()); }

PolicyNetwork PolicyNetwork::load(const std::string& path) {
  PolicyNetwork p;
  p.load_tensors(nn::load_tensors(path, kPolicyKind));
  return p;
}

SampledAction sample_action(const PolicyOutput& out, double epsilon, Rng& rng) {
  epsilon = clamp01(epsilon);
  SampledAction s;
  s.explored = rng.uniform() < epsilon;
  if (s.explored) {
    s.action.agent = rng.index(kNumPlannedAgents);
    s.action.focus = rng.index(kNumFocus);
  } else {
    s.action.agent = argmax(out.agent_logits);
    s.action.focus = argmax(out.focus_logits);
  }
  s.sigma = 0.1 * epsilon;
  std::array<double, kNumContinuous> v{};
  for (int i = 0; i < kNumContinuous; ++i) {
    double noise = 0;
    if (s.sigma > 0) noise = std::clamp(s.sigma * rng.normal(), -2.0 * s.sigma, 2.0 * s.sigma);
    s.pre_sigmoid[i] = out.pre_means[i] + noise;
    v[i] = s.sigma > 0 ? clamp01(nn::sigmoid(s.pre_sigmoid[i])) : out.means[i];
  }
  s.action.temperature = v[0];
  s.action.token_budget = v[1];
  s.action.rag_depth = v[2];
  s.action.retry_budget = v[3];
  return s;
}

SampledAction sample_action(const PolicyOutput& out, double epsilon, std::uint64_t seed) {
  Rng rng(seed);
  return sample_action(out, epsilon, rng);
}

double action_log_prob(const PolicyOutput& out, int agent, int focus, std::span<const double> z, double sigma) {
  const auto pa = softmax(out.agent_logits);
  const auto pf = softmax(out.focus_logits);
  double lp = std::log(std::max(pa[agent], 1e-300)) + std::log(std::max(pf[focus], 1e-300));
  if (sigma > 0)
    for (int i = 0; i < kNumContinuous; ++i) lp += gaussian_log_density(z[i], out.pre_means[i], sigma);
  return lp;
}

// -------------------------------------------------------------- transitions

json transition_to_json(const Transition& t) {
  return {{"state", array_json(t.state)},
          {"action", action_to_json(t.sampled.action)},
          {"pre_sigmoid", array_json(t.sampled.pre_sigmoid)},
          {"sigma", t.sampled.sigma},
          {"explored", t.sampled.explored},
          {"log_prob", t.log_prob},
          {"value", t.value},
          {"reward", reward_to_json(t.reward)},
          {"tokens", t.tokens},
          {"next_state", array_json(t.next_state)},
          {"done", t.done},
          {"episode", t.episode}};
}

Transition transition_from_json(const json& j) {
  try {
    Transition t;
    t.state = array_from<kStateDim>(j.at("state"));
    t.sampled.action = action_from_json(j.at("action"));
    t.sampled.pre_sigmoid = array_from<kNumContinuous>(j.at("pre_sigmoid"));
    t.sampled.sigma = j.at("sigma").get<double>();
    t.sampled.explored = j.value("explored", false);
    t.log_prob = j.at("log_prob").get<double>();
    t.value = j.at("value").get<double>();
    t.reward = reward_from_json(j.at("reward"));
    t.tokens = j.value("tokens", 0L);
    t.next_state = array_from<kStateDim>(j.at("next_state"));
    t.done = j.at("done").get<bool>();
    t.episode = j.at("episode").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed transition: ") + e.what());
  }
}

void TransitionBuffer::append(Transition t) {
  std::lock_guard lock(mu_);
  items_.push_back(std::move(t));
}

std::vector<Transition> TransitionBuffer::snapshot() const {
  std::lock_guard lock(mu_);
  return items_;
}

std::vector<std::vector<Transition>> TransitionBuffer::completed_episodes() const {
  const auto items = snapshot();
  std::vector<std::string> order;
  std::map<std::string, std::vector<Transition>> by_id;
  for (const auto& t : items) {
    auto [it, fresh] = by_id.try_emplace(t.episode);
    if (fresh) order.push_back(t.episode);
    it->second.push_back(t);
  }
  std::vector<std::vector<Transition>> out;
  for (const auto& id : order) {
    auto& ep = by_id[id];
    auto end = std::find_if(ep.begin(), ep.end(), [](const Transition& t) { return t.done; });
    if (end == ep.end()) continue;
    ep.erase(end + 1, ep.end());
    out.push_back(std::move(ep));
  }
  return out;
}

std::size_t TransitionBuffer::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

void TransitionBuffer::clear() {
  std::lock_guard lock(mu_);
  items_.clear();
}

void TransitionBuffer::save_jsonl(const std::string& path) const {
  std::string out;
  for (const auto& t : snapshot()) out += transition_to_json(t).dump() + "\n";
  text::write_file(path, out);
}

std::unique_ptr<TransitionBuffer> TransitionBuffer::load_jsonl(const std::string& path) {
  auto buf = std::make_unique<TransitionBuffer>();
  int n = 0;
  for (const auto& line : text::split_lines(text::read_file(path))) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      buf->append(transition_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return buf;
}

// ---------------------------------------------------------------------- ppo

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values, bool terminal,
                                double last_value, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw ShapeMismatch("rewards and values differ in length");
  const std::size_t n = rewards.size();
  std::vector<double> adv(n, 0.0);
  double next_adv = 0;
  for (std::size_t k = n; k-- > 0;) {
    const double next_value = k + 1 < n ? values[k + 1] : (terminal ? 0.0 : last_value);
    const double delta = rewards[k] + gamma * next_value - values[k];
    next_adv = delta + gamma * lambda * next_adv;
    adv[k] = next_adv;
  }
  return adv;
}

PpoLoss ppo_loss(const PolicyNetwork& policy, std::span<const PpoSample> batch, const PpoHyper& hyper,
                 std::span<double> grad) {
  PpoLoss loss;
  if (batch.empty()) return loss;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != policy.num_params()) throw ShapeMismatch("gradient buffer has the wrong size");
  PolicyNetwork::Trace trace;
  for (const auto& s : batch) {
    const auto out = policy.forward(s.state, trace);
    const auto pa = softmax(out.agent_logits);
    const auto pf = softmax(out.focus_logits);
    const double lp = action_log_prob(out, s.agent, s.focus, s.z, s.sigma);
    const double ratio = std::exp(lp - s.log_prob_old);
    const double lo = 1.0 - hyper.clip_ratio, hi = 1.0 + hyper.clip_ratio;
    const double unclipped = ratio * s.advantage;
    const double clipped = std::clamp(ratio, lo, hi) * s.advantage;
    const double obj = std::min(unclipped, clipped);
    // d obj / d log-prob: zero when the clipped branch is active and saturated.
    double d_obj = ratio * s.advantage;
    if (clipped < unclipped && (ratio < lo || ratio > hi)) d_obj = 0.0;

    double ha = 0, hf = 0;
    for (double p : pa) ha -= p > 0 ? p * std::log(p) : 0.0;
    for (double p : pf) hf -= p > 0 ? p * std::log(p) : 0.0;
    const double err = out.value - s.ret;
    loss.policy += -obj * inv_n;
    loss.value += err * err * inv_n;
    loss.entropy += (ha + hf) * inv_n;
    if (!want_grad) continue;

    const double d_lp = -d_obj * inv_n;
    const double ce = hyper.entropy_coef * inv_n;
    std::array<double, kNumPlannedAgents + kNumFocus> dl{};
    for (int j = 0; j < kNumPlannedAgents; ++j) {
      dl[j] = d_lp * ((j == s.agent ? 1.0 : 0.0) - pa[j]);
      if (pa[j] > 0) dl[j] += ce * pa[j] * (std::log(pa[j]) + ha);
    }
    for (int j = 0; j < kNumFocus; ++j) {
      double& d = dl[kNumPlannedAgents + j];
      d = d_lp * ((j == s.focus ? 1.0 : 0.0) - pf[j]);
      if (pf[j] > 0) d += ce * pf[j] * (std::log(pf[j]) + hf);
    }
    std::array<double, kNumContinuous> dmu{};
    if (s.sigma > 0)
      for (int i = 0; i < kNumContinuous; ++i) dmu[i] = d_lp * (s.z[i] - out.pre_means[i]) / (s.sigma * s.sigma);
    const double dv = 2.0 * hyper.value_coef * err * inv_n;
    policy.backward(trace, dl, dmu, dv, grad);
  }
  loss.total = loss.policy + hyper.value_coef * loss.value - hyper.entropy_coef * loss.entropy;
  return loss;
}

PpoTrainer::PpoTrainer(std::shared_ptr<PolicyNetwork> policy, PpoHyper hyper, std::uint64_t seed)
    : policy_(std::move(policy)), hyper_(hyper), adam_(policy_->num_params(), hyper.lr), rng_(seed) {
  hyper_.validate();
}

PpoStats PpoTrainer::update(const TransitionBuffer& buffer) {
  const auto episodes = buffer.completed_episodes();
  return update(episodes);
}

PpoStats PpoTrainer::update(std::span<const std::vector<Transition>> episodes) {
  std::lock_guard lock(mu_);
  std::vector<PpoSample> samples;
  for (const auto& ep : episodes) {
    if (ep.empty()) continue;
    std::vector<double> rewards, values;
    for (const auto& t : ep) {
      rewards.push_back(t.reward.total);
      values.push_back(t.value);
    }
    const bool terminal = ep.back().done;
    const double last_value = terminal ? 0.0 : policy_->forward(ep.back().next_state).value;
    const auto adv = compute_gae(rewards, values, terminal, last_value, hyper_.gamma, hyper_.gae_lambda);
    for (std::size_t i = 0; i < ep.size(); ++i) {
      const auto& t = ep[i];
      PpoSample s;
      s.state = t.state;
      s.agent = t.sampled.action.agent;
      s.focus = t.sampled.action.focus;
      s.z = t.sampled.pre_sigmoid;
      s.sigma = t.sampled.sigma;
      s.log_prob_old = t.log_prob;
      s.advantage = adv[i];
      s.ret = adv[i] + t.value;
      samples.push_back(s);
    }
  }
  if (samples.empty()) throw EmptyBuffer();
  PpoStats stats;
  stats.samples = static_cast<int>(samples.size());
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> grad(policy_->num_params());
  std::vector<PpoSample> batch;
  for (int epoch = 0; epoch < hyper_.epochs; ++epoch) {
    shuffle(idx, rng_);
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(hyper_.minibatch)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(hyper_.minibatch));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(samples[idx[k]]);
      std::fill(grad.begin(), grad.end(), 0.0);
      stats.loss = ppo_loss(*policy_, batch, hyper_, grad);
      adam_.step(policy_->params(), grad);
      ++stats.steps;
    }
  }
  return stats;
}

std::shared_ptr<const PolicyNetwork> PpoTrainer::snapshot() const {
  std::lock_guard lock(mu_);
  return std::make_shared<const PolicyNetwork>(*policy_);
}

// -------------------------------------------------------------- world model

std::array<double, kActionDim> encode_action(const Action& a) {
  std::array<double, kActionDim> v{};
  v[a.agent] = 1.0;
  v[kNumPlannedAgents + a.focus] = 1.0;
  v[kNumPlannedAgents + kNumFocus + 0] = a.temperature;
  v[kNumPlannedAgents + kNumFocus + 1] = a.token_budget;
  v[kNumPlannedAgents + kNumFocus + 2] = a.rag_depth;
  v[kNumPlannedAgents + kNumFocus + 3] = a.retry_budget;
  return v;
}

namespace {

std::vector<double> world_input(const State& s, const Action& a) {
  std::vector<double> x(s.begin(), s.end());
  const auto e = encode_action(a);
  x.insert(x.end(), e.begin(), e.end());
  return x;
}

}  // namespace

MlpWorldModel::MlpWorldModel() : net_({kStateDim + kActionDim, 64, 4}, nn::Activation::kRelu, nn::Activation::kIdentity) {}

Prediction MlpWorldModel::predict(const State& state, const Action& action) const {
  const auto y = net_.forward(world_input(state, action));
  return {y[0] / kWorldScale[0], y[1] / kWorldScale[1], y[2] / kWorldScale[2], y[3] / kWorldScale[3]};
}

double MlpWorldModel::loss(std::span<const WorldSample> data, std::span<double> grad) const {
  if (data.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  double total = 0;
  nn::Mlp::Trace trace;
  for (const auto& s : data) {
    const auto y = net_.forward(world_input(s.state, s.action), trace);
    const std::array<double, 4> t = {s.target.stage_delta * kWorldScale[0], s.target.error_delta * kWorldScale[1],
                                     s.target.token_cost * kWorldScale[2], s.target.reward * kWorldScale[3]};
    std::array<double, 4> d{};
    for (int k = 0; k < 4; ++k) {
      const double e = y[k] - t[k];
      total += e * e * inv_n;
      d[k] = 2.0 * e * inv_n;
    }
    if (!grad.empty()) net_.backward(trace, d, grad);
  }
  return total;
}

double MlpWorldModel::train(std::span<const WorldSample> data, int epochs, double lr, std::uint64_t seed) {
  if (data.empty()) throw EmptyDataset("world model training needs at least one transition");
  Rng rng(seed);
  if (std::all_of(net_.params().begin(), net_.params().end(), [](double v) { return v == 0.0; })) net_.init(rng);
  nn::Adam adam(net_.num_params(), lr);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> grad(net_.num_params());
  std::vector<WorldSample> batch;
  for (int e = 0; e < epochs; ++e) {
    shuffle(idx, rng);
    for (std::size_t start = 0; start < idx.size(); start += 32) {
      batch.clear();
      for (std::size_t k = start; k < std::min(idx.size(), start + 32); ++k) batch.push_back(data[idx[k]]);
      std::fill(grad.begin(), grad.end(), 0.0);
      loss(batch, grad);
      adam.step(net_.params(), grad);
    }
  }
  return loss(data);
}

void MlpWorldModel::save(const std::string& path) const { nn::save_tensors(path, kWorldKind, net_.to_tensors()); }

std::unique_ptr<MlpWorldModel> MlpWorldModel::load(const std::string& path) {
  auto m = std::make_unique<MlpWorldModel>();
  m->net_.load_tensors(nn::load_tensors(path, kWorldKind));
  return m;
}

std::vector<WorldSample> world_samples(std::span<const Transition> transitions) {
  std::vector<WorldSample> out;
  for (const auto& t : transitions) {
    WorldSample s;
    s.state = t.state;
    s.action = t.sampled.action;
    s.target.stage_delta = std::max(0, stage_index(t.next_state)) - std::max(0, stage_index(t.state));
    s.target.error_delta = error_total(t.next_state) - error_total(t.state);
    s.target.token_cost = static_cast<double>(t.tokens);
    s.target.reward = t.reward.total;
    out.push_back(s);
  }
  return out;
}

State advance_state(const State& state, const Action& action, const Prediction& p) {
  const auto& L = StateLayout::builtin();
  State s = state;
  s[L.index("iteration")] = clamp01(s[L.index("iteration")] + 0.2);
  s[L.index("refining")] = 1.0;
  const int stage = std::clamp(std::max(0, stage_index(state)) + static_cast<int>(std::lround(p.stage_delta)), 0, 3);
  for (int i = 0; i < 4; ++i) s[L.index("stage." + std::string(kStageNames[i]))] = i == stage ? 1.0 : 0.0;
  const double total = error_total(state);
  const double next = std::max(0.0, total + p.error_delta);
  for (auto n : kErrorNames) {
    auto& f = s[L.index("errors." + std::string(n))];
    f = total > 0 ? clamp01(f * next / total) : 0.0;
  }
  if (total == 0 && next > 0) s[L.index("errors.Other")] = clamp01(next / 10.0);
  auto& count = s[L.index("agent_count." + std::string(kAgentNames[action.agent]))];
  count = std::min(1.0, count + 0.2);
  for (int a = 0; a < kNumPlannedAgents; ++a)
    s[L.index("last_agent." + std::string(kAgentNames[a]))] = a == action.agent ? 1.0 : 0.0;
  return s;
}

MpcResult mpc_plan(const State& state, const WorldModel* model, const MpcConfig& config, std::uint64_t seed) {
  if (!model) throw ModelMissing();
  if (config.candidates < 1 || config.horizon < 1) throw ConfigError("MPC needs at least one candidate and step");
  Rng rng(seed);
  MpcResult best;
  bool have = false;
  for (int c = 0; c < config.candidates; ++c) {
    std::vector<Action> seq;
    for (int h = 0; h < config.horizon; ++h) {
      Action a;
      a.agent = rng.index(kNumPlannedAgents);
      a.focus = rng.index(kNumFocus);
      a.temperature = rng.uniform();
      a.token_budget = rng.uniform();
      a.rag_depth = rng.uniform();
      a.retry_budget = rng.uniform();
      seq.push_back(a);
    }
    State s = state;
    double score = 0, discount = 1;
    for (const auto& a : seq) {
      const auto p = model->predict(s, a);
      ++best.model_calls;
      score += discount * p.reward;
      discount *= config.gamma;
      s = advance_state(s, a, p);
    }
    if (!have || score > best.score) {
      have = true;
      best.score = score;
      best.best_index = c;
      best.action = seq.front();
    }
  }
  return best;
}

// ------------------------------------------------------------------ planner

std::string_view planner_name(PlannerKind k) {
  switch (k) {
    case PlannerKind::kPpo: return "ppo";
    case PlannerKind::kMpc: return "mpc";
    case PlannerKind::kHeuristic: return "heuristic";
  }
  return "heuristic";
}

PlannerKind parse_planner(std::string_view s) {
  const auto l = text::to_lower(s);
  if (l == "ppo") return PlannerKind::kPpo;
  if (l == "mpc") return PlannerKind::kMpc;
  if (l == "heuristic") return PlannerKind::kHeuristic;
  throw ConfigError("unknown planner " + std::string(s));
}

Planner::Planner(PlannerKind kind, std::shared_ptr<const PolicyNetwork> policy, std::shared_ptr<const WorldModel> world,
                 PpoHyper hyper, MpcConfig mpc)
    : kind_(kind), policy_(std::move(policy)), world_(std::move(world)), hyper_(hyper), mpc_(mpc) {
  hyper_.validate();
  if (kind_ == PlannerKind::kPpo && !policy_) throw ConfigError("the ppo planner needs a policy");
}

namespace {

SampledAction deterministic(const Action& a) {
  SampledAction s;
  s.action = a;
  s.pre_sigmoid = {logit(a.temperature), logit(a.token_budget), logit(a.rag_depth), logit(a.retry_budget)};
  return s;
}

}  // namespace

Decision Planner::decide(const State& state, int episode, std::uint64_t seed) const {
  Decision d;
  std::optional<PolicyOutput> out;
  if (policy_) out = policy_->forward(state);
  const bool warm = kind_ == PlannerKind::kPpo && episode < hyper_.warm_start_episodes;
  if (kind_ == PlannerKind::kHeuristic || warm || (kind_ == PlannerKind::kMpc && !world_)) {
    const auto& rule = HeuristicPolicy::builtin().match(state);
    d.sampled = deterministic(rule.action);
    d.source = "heuristic";
    d.rule = rule.name;
  } else if (kind_ == PlannerKind::kMpc) {
    d.sampled = deterministic(mpc_plan(state, world_.get(), mpc_, seed).action);
    d.source = "mpc";
  } else {
    d.epsilon = epsilon_schedule(episode, hyper_);
    d.sampled = sample_action(*out, d.epsilon, seed);
    d.source = "policy";
  }
  if (out) {
    d.value = out->value;
    d.log_prob = action_log_prob(*out, d.sampled.action.agent, d.sampled.action.focus, d.sampled.pre_sigmoid,
                                 d.sampled.sigma);
  }
  return d;
}

}  // namespace rtlforge::rl
