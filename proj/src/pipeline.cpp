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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "rtlforge/errors.hpp"
#include "rtlforge/hierarchy.hpp"
#include "rtlforge/text.hpp"
#include "rtlforge/verilog.hpp"

namespace rtlforge::pipeline {

using nlohmann::json;
using validation::Stage;
using validation::ValidationReport;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kThoughtNames[kNumThoughtCategories] = {
    "Analysis", "Bottleneck", "Proposal", "Retrieval", "Generation",
    "Validation", "Decision", "Error", "Progress"};

double wall_clock() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ------------------------------------------------------------ run wrappers

class RunBackend : public agents::Backend {
 public:
  RunBackend(agents::Backend* inner, ThoughtStream& trace, std::vector<CallRecord>& calls)
      : inner_(inner), trace_(trace), calls_(calls) {}

  agents::CompletionResult complete(const agents::CompletionRequest& r) override {
    if (!inner_) throw ConfigError("no backend configured");
    agents::CompletionResult out;
    try {
      out = inner_->complete(r);
    } catch (const std::exception& e) {
      calls_.push_back({purpose, r.model, 0, 0});
      trace_.emit(ThoughtCategory::kError, purpose + " call to " + r.model + " failed: " + e.what(), 1.0,
                  {"model:" + r.model});
      throw;
    }
    calls_.push_back({purpose, r.model, out.input_tokens, out.output_tokens});
    trace_.emit(ThoughtCategory::kGeneration,
                purpose + " call to " + r.model + ": " + std::to_string(out.input_tokens) + " tokens in, " +
                    std::to_string(out.output_tokens) + " out",
                1.0, {"model:" + r.model});
    return out;
  }
  std::string name() const override { return inner_ ? inner_->name() : "none"; }

  std::string purpose = "generation";

 private:
  agents::Backend* inner_;
  ThoughtStream& trace_;
  std::vector<CallRecord>& calls_;
};

class RunTools : public validation::ToolRunner {
 public:
  RunTools(std::shared_ptr<validation::ToolRunner> inner, ThoughtStream& trace)
      : inner_(std::move(inner)), trace_(trace) {}

  bool available(std::string_view tool) const override { return inner_->available(tool); }
  validation::ToolOutput run(const validation::ToolInvocation& inv) override {
    try {
      auto out = inner_->run(inv);
      trace_.emit(ThoughtCategory::kValidation,
                  inv.tool + " " + inv.step + " exited " + std::to_string(out.exit_code) +
                      (out.timed_out ? " (timed out)" : ""),
                  1.0, {"tool:" + inv.tool});
      return out;
    } catch (const std::exception& e) {
      trace_.emit(ThoughtCategory::kError, inv.tool + " " + inv.step + " failed: " + e.what(), 1.0,
                  {"tool:" + inv.tool});
      throw;
    }
  }

 private:
  std::shared_ptr<validation::ToolRunner> inner_;
  ThoughtStream& trace_;
};

// ------------------------------------------------------------------ helpers

kb::Focus kb_focus(rl::Focus f) {
  switch (f) {
    case rl::Focus::kFull: return kb::Focus::kComprehensive;
    case rl::Focus::kMinimal: return kb::Focus::kPatternFocused;
    case rl::Focus::kError: return kb::Focus::kErrorFocused;
    case rl::Focus::kSynthesis: return kb::Focus::kSynthesisFocused;
    case rl::Focus::kArchitecture: return kb::Focus::kArchitectureFocused;
  }
  return kb::Focus::kComprehensive;
}

bool wants_systemverilog(const Spec& s) {
  static const std::vector<std::string> words = {"logic", "always_ff", "always_comb", "typedef", "interface"};
  for (const auto* t : {&s.interface_header, &s.context_rtl})
    if (*t)
      for (const auto& w : words)
        if (verilog::uses_word(**t, w)) return true;
  return false;
}

std::string module_name_for(const Spec& s) {
  if (s.interface_header) {
    try {
      return verilog::parse_header(*s.interface_header).name;
    } catch (const VerilogParseFailure&) {
    }
  }
  return text::is_identifier(s.name) ? s.name : "TopModule";
}

std::string stage_str(Stage s) { return std::string(validation::stage_name(s)); }

ValidationReport error_report(validation::ErrorCategory c, const std::string& message) {
  ValidationReport r;
  validation::CategorizedError e;
  e.category = c;
  e.message = message;
  r.errors.push_back(e);
  return r;
}

std::vector<std::string> error_evidence(const ValidationReport& r) {
  std::vector<std::string> out;
  for (const auto& e : r.errors) {
    if (out.size() == 5) break;
    out.push_back(std::string(validation::category_name(e.category)) +
                  (e.line ? " line " + std::to_string(*e.line) : "") + ": " + e.message);
  }
  return out;
}

std::string path_under(const fs::path& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

}  // namespace

// ------------------------------------------------------------------ thoughts

std::string_view thought_category_name(ThoughtCategory c) { return kThoughtNames[static_cast<int>(c)]; }

ThoughtCategory parse_thought_category(std::string_view s) {
  for (int i = 0; i < kNumThoughtCategories; ++i)
    if (kThoughtNames[i] == s) return static_cast<ThoughtCategory>(i);
  throw ConfigError("unknown thought category: " + std::string(s));
}

json thought_to_json(const ThoughtEvent& e) {
  return {{"category", thought_category_name(e.category)},
          {"message", e.message},
          {"confidence", e.confidence},
          {"evidence", e.evidence},
          {"timestamp", e.timestamp}};
}

ThoughtEvent thought_from_json(const json& j) {
  ThoughtEvent e;
  e.category = parse_thought_category(j.at("category").get<std::string>());
  e.message = j.at("message").get<std::string>();
  e.confidence = j.at("confidence").get<double>();
  e.evidence = j.at("evidence").get<std::vector<std::string>>();
  e.timestamp = j.at("timestamp").get<double>();
  return e;
}

void emit_thought(const ThoughtEvent& e, std::ostream& sink) {
  sink << thought_to_json(e).dump() << '\n';
  sink.flush();
}

ThoughtStream::ThoughtStream(std::ostream* sink, Clock clock)
    : sink_(sink), clock_(clock ? std::move(clock) : Clock(wall_clock)) {}

void ThoughtStream::emit(ThoughtCategory c, std::string message, double confidence,
                         std::vector<std::string> evidence) {
  std::lock_guard lock(mu_);
  ThoughtEvent e;
  e.category = c;
  e.message = std::move(message);
  e.confidence = std::clamp(confidence, 0.0, 1.0);
  e.evidence = std::move(evidence);
  last_ = std::max(last_, clock_());
  e.timestamp = last_;
  if (sink_) emit_thought(e, *sink_);
  events_.push_back(std::move(e));
}

std::vector<ThoughtEvent> ThoughtStream::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t ThoughtStream::count(ThoughtCategory c) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [&](const ThoughtEvent& e) { return e.category == c; }));
}

// -------------------------------------------------------------------- config

PriceTable price_table_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("price table must be an object keyed by model");
  PriceTable t;
  for (const auto& [model, p] : j.items()) {
    if (!p.is_object() || !p.contains("input") || !p.contains("output"))
      throw ConfigError("price for " + model + " needs input and output");
    Price price{p["input"].get<double>(), p["output"].get<double>()};
    if (price.input < 0 || price.output < 0) throw ConfigError("negative price for " + model);
    t[model] = price;
  }
  return t;
}

void PipelineConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (backend != "mock" && backend != "remote") throw ConfigError("backend must be mock or remote");
  if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
  if (max_tokens < 0) throw ConfigError("max_tokens must not be negative");
  if (max_wall_s < 0) throw ConfigError("max_wall_s must not be negative");
  if (sim_timeout_s <= 0) throw ConfigError("sim_timeout_s must be positive");
  if (episode_offset < 0) throw ConfigError("episode_offset must not be negative");
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  PipelineConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "max_iterations") c.max_iterations = v.get<int>();
      else if (key == "planner") c.planner = rl::parse_planner(v.get<std::string>());
      else if (key == "backend") c.backend = v.get<std::string>();
      else if (key == "backend_url") c.backend_url = v.get<std::string>();
      else if (key == "backend_key_env") c.backend_key_env = v.get<std::string>();
      else if (key == "tools") {
        for (const auto& [tool, path] : v.items()) {
          const auto p = path.get<std::string>();
          if (tool == "iverilog") c.tools.iverilog = p;
          else if (tool == "vvp") c.tools.vvp = p;
          else if (tool == "verilator") c.tools.verilator = p;
          else if (tool == "yosys") c.tools.yosys = p;
          else throw ConfigError("unknown tool: " + tool);
        }
      } else if (key == "tool_fixtures") c.tool_fixtures = v.get<std::string>();
      else if (key == "kb_path") c.kb_path = v.get<std::string>();
      else if (key == "registry_path") c.registry_path = v.get<std::string>();
      else if (key == "profiles_path") c.profiles_path = v.get<std::string>();
      else if (key == "reference_index") c.reference_index = v.get<std::string>();
      else if (key == "reference_root") c.reference_root = v.get<std::string>();
      else if (key == "policy_checkpoint") c.policy_checkpoint = v.get<std::string>();
      else if (key == "world_model_checkpoint") c.world_model_checkpoint = v.get<std::string>();
      else if (key == "gate_checkpoint") c.gate_checkpoint = v.get<std::string>();
      else if (key == "transitions_out") c.transitions_out = v.get<std::string>();
      else if (key == "max_tokens") c.max_tokens = v.get<long>();
      else if (key == "max_wall_s") c.max_wall_s = v.get<double>();
      else if (key == "sim_timeout_s") c.sim_timeout_s = v.get<double>();
      else if (key == "generate_testbench") c.generate_testbench = v.get<bool>();
      else if (key == "parallelism") c.parallelism = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "episode_offset") c.episode_offset = v.get<int>();
      else if (key == "prices") c.prices = price_table_from_json(v);
      else throw ConfigError("unknown configuration key: " + key);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json j = {{"max_iterations", c.max_iterations},
            {"planner", rl::planner_name(c.planner)},
            {"backend", c.backend},
            {"backend_url", c.backend_url},
            {"backend_key_env", c.backend_key_env},
            {"tools",
             {{"iverilog", c.tools.iverilog}, {"vvp", c.tools.vvp}, {"verilator", c.tools.verilator},
              {"yosys", c.tools.yosys}}},
            {"tool_fixtures", c.tool_fixtures},
            {"kb_path", c.kb_path},
            {"registry_path", c.registry_path},
            {"profiles_path", c.profiles_path},
            {"reference_index", c.reference_index},
            {"reference_root", c.reference_root},
            {"policy_checkpoint", c.policy_checkpoint},
            {"world_model_checkpoint", c.world_model_checkpoint},
            {"gate_checkpoint", c.gate_checkpoint},
            {"transitions_out", c.transitions_out},
            {"max_tokens", c.max_tokens},
            {"max_wall_s", c.max_wall_s},
            {"sim_timeout_s", c.sim_timeout_s},
            {"generate_testbench", c.generate_testbench},
            {"parallelism", c.parallelism},
            {"seed", c.seed},
            {"episode_offset", c.episode_offset}};
  if (c.prices) {
    json p = json::object();
    for (const auto& [m, price] : *c.prices) p[m] = {{"input", price.input}, {"output", price.output}};
    j["prices"] = p;
  }
  return j;
}

PipelineConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  auto c = config_from_json(j);
  const fs::path base = fs::path(path).parent_path();
  for (auto* p : {&c.tool_fixtures, &c.kb_path, &c.registry_path, &c.profiles_path, &c.reference_index,
                  &c.reference_root, &c.policy_checkpoint, &c.world_model_checkpoint, &c.gate_checkpoint,
                  &c.transitions_out})
    *p = path_under(base, *p);
  return c;
}

// ---------------------------------------------------------------- run record

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kSolved: return "Solved";
    case Outcome::kExhausted: return "Exhausted";
    case Outcome::kError: return "Error";
  }
  return "Error";
}

json run_record_to_json(const RunRecord& r) {
  json iters = json::array();
  for (const auto& it : r.iterations)
    iters.push_back({{"index", it.index},
                     {"action", rl::action_to_json(it.action)},
                     {"agent", it.agent},
                     {"decision_source", it.decision_source},
                     {"rule", it.rule},
                     {"tokens_in", it.tokens_in},
                     {"tokens_out", it.tokens_out},
                     {"retries", it.retries},
                     {"reward", rl::reward_to_json(it.reward)},
                     {"report", validation::report_to_json(it.report)},
                     {"error", it.error}});
  json calls = json::array();
  long tin = 0, tout = 0;
  for (const auto& c : r.calls) {
    calls.push_back({{"purpose", c.purpose}, {"model", c.model}, {"tokens_in", c.tokens_in},
                     {"tokens_out", c.tokens_out}});
    tin += c.tokens_in;
    tout += c.tokens_out;
  }
  return {{"spec_id", r.spec_id},
          {"category", category_name(r.category)},
          {"routing",
           {{"tier", tier_name(r.routing.tier)},
            {"hierarchical", r.routing.hierarchical},
            {"component_keywords", r.routing.matched_component_keywords},
            {"trigger_keywords", r.routing.matched_trigger_keywords}}},
          {"fired_detectors", r.fired_detectors},
          {"gate_config", r.gate_config},
          {"testbench", r.testbench},
          {"required_stage", validation::stage_name(r.required_stage)},
          {"outcome", outcome_name(r.outcome)},
          {"iterations_used", r.iterations_used},
          {"generation_calls", r.generation_calls},
          {"backend_calls", r.calls.size()},
          {"tokens_in", tin},
          {"tokens_out", tout},
          {"calls", calls},
          {"iterations", iters},
          {"final_report", r.final_report ? validation::report_to_json(*r.final_report) : json(nullptr)},
          {"cost_usd", r.cost_usd ? json(*r.cost_usd) : json(nullptr)},
          {"hierarchy", r.hierarchy},
          {"error", r.error},
          {"timing", {{"wall_s", r.wall_s}, {"started_at", r.started_at}}}};
}

json without_timing(json record) {
  record.erase("timing");
  return record;
}

double estimate_cost(const RunRecord& record, const PriceTable& prices) {
  double total = 0.0;
  for (const auto& c : record.calls) {
    auto it = prices.find(c.model);
    if (it == prices.end()) throw UnpricedModel(c.model);
    total += static_cast<double>(c.tokens_in) * it->second.input +
             static_cast<double>(c.tokens_out) * it->second.output;
  }
  return total;
}

// ------------------------------------------------------------------ pipeline

namespace {

PipelineConfig checked(PipelineConfig c) {
  c.validate();
  return c;
}

template <typename F>
auto loading(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("cannot load " + what + ": " + e.what());
  }
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<agents::Backend> backend,
                   std::shared_ptr<validation::ToolRunner> tools)
    : config_(checked(std::move(config))),
      backend_(std::move(backend)),
      tools_(std::move(tools)),
      profiles_(loading("agent profiles", [&] { return agents::AgentProfiles::load(config_.profiles_path); })) {
  if (!backend_ && config_.backend == "remote") {
    agents::RemoteConfig rc;
    if (!config_.backend_url.empty()) {
      rc.url = config_.backend_url;
      if (const char* key = std::getenv(config_.backend_key_env.c_str())) rc.api_key = key;
    } else {
      rc = agents::RemoteConfig::from_env();
    }
    backend_ = std::make_shared<agents::RemoteBackend>(rc);
  }
  if (!tools_) {
    if (!config_.tool_fixtures.empty())
      tools_ = loading("tool fixtures", [&] { return validation::FixtureRunner::load(config_.tool_fixtures); });
    else
      tools_ = std::make_shared<validation::ProcessRunner>(config_.tools);
  }
  kb_ = loading("knowledge base", [&] { return kb::KnowledgeBase::load(config_.kb_path); });
  if (!config_.reference_index.empty())
    library_ = loading("reference index", [&] {
      const auto root = config_.reference_root.empty() ? fs::path(config_.reference_index).parent_path().string()
                                                       : config_.reference_root;
      return kb::load_index(config_.reference_index, root);
    });
  registry_ = loading("guidance registry", [&] { return guidance::Registry::load(config_.registry_path); });
  if (!config_.gate_checkpoint.empty())
    gate_ = loading("gate checkpoint", [&] { return guidance::GateModel::load(config_.gate_checkpoint); });
  policy_ = config_.policy_checkpoint.empty()
                ? std::make_shared<rl::PolicyNetwork>()
                : loading("policy checkpoint", [&] {
                    return std::make_shared<rl::PolicyNetwork>(rl::PolicyNetwork::load(config_.policy_checkpoint));
                  });
  if (!config_.world_model_checkpoint.empty())
    world_ = loading("world model", [&] {
      return std::shared_ptr<rl::WorldModel>(rl::MlpWorldModel::load(config_.world_model_checkpoint));
    });
  planner_ = std::make_unique<rl::Planner>(config_.planner, policy_, world_);
  buffer_ = std::make_unique<rl::TransitionBuffer>();
}

std::vector<kmap::TruthFunction> symbolic_functions(std::string_view description) {
  const bool table_first = text::contains_keyword(description, "truth table");
  auto kmap_fn = [&] { return std::vector<kmap::TruthFunction>{kmap::parse_kmap(description)}; };
  auto table_fn = [&] { return kmap::parse_truth_tables(description); };
  try {
    return table_first ? table_fn() : kmap_fn();
  } catch (const ParseError& first) {
    try {
      return table_first ? kmap_fn() : table_fn();
    } catch (const ParseError&) {
      throw first;
    }
  }
}

RunResult Pipeline::generate_module(const Problem& problem, int episode, ThoughtStream* trace_in) const {
  const auto t0 = std::chrono::steady_clock::now();
  ThoughtStream local;
  ThoughtStream& trace = trace_in ? *trace_in : local;
  const Spec& spec = problem.spec;
  spec.validate();

  RunResult res;
  RunRecord& rec = res.record;
  rec.spec_id = problem.id.empty() ? spec.name : problem.id;
  rec.started_at = wall_clock();
  rec.category = effective_category(spec);
  trace.emit(ThoughtCategory::kProgress, "run started for " + rec.spec_id);

  std::unique_ptr<agents::MockBackend> scripted;
  agents::Backend* inner = backend_.get();
  if (!problem.script.empty()) {
    scripted = std::make_unique<agents::MockBackend>(problem.script);
    inner = scripted.get();
  }
  RunBackend backend(inner, trace, rec.calls);
  auto tools = std::make_shared<RunTools>(problem.tools ? problem.tools : tools_, trace);
  validation::ValidatorConfig vcfg;
  vcfg.sim_timeout_s = config_.sim_timeout_s;
  validation::Validator validator(tools, vcfg);

  const auto finish = [&](RunResult& r) {
    if (config_.prices) r.record.cost_usd = estimate_cost(r.record, *config_.prices);
    r.record.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.emit(ThoughtCategory::kProgress,
               "run finished: " + std::string(outcome_name(r.record.outcome)) + " after " +
                   std::to_string(r.record.iterations_used) + " iterations",
               1.0, {"outcome:" + std::string(outcome_name(r.record.outcome))});
    return std::move(r);
  };

  // enrichment, routing and gate
  const auto enrichment = guidance::enrich_spec(spec, registry_);
  const Spec& enriched = enrichment.spec;
  rec.fired_detectors = enrichment.fired;
  trace.emit(ThoughtCategory::kAnalysis,
             enrichment.fired.empty() ? "no guidance detectors fired"
                                      : "guidance detectors fired: " + text::join(enrichment.fired, ", "),
             1.0, enrichment.fired);
  rec.routing = route(spec);
  {
    std::vector<std::string> ev(rec.routing.matched_trigger_keywords.begin(),
                                rec.routing.matched_trigger_keywords.end());
    ev.insert(ev.end(), rec.routing.matched_component_keywords.begin(),
              rec.routing.matched_component_keywords.end());
    trace.emit(ThoughtCategory::kDecision,
               "routed to " + std::string(tier_name(rec.routing.tier)) +
                   (rec.routing.hierarchical ? " (hierarchical)" : ""),
               1.0, ev);
  }
  const auto probs = guidance::gate_forward(guidance::gate_features(spec, &history_), gate_);
  const auto gate = guidance::select_config(probs, rec.routing.tier == Tier::kSymbolic);
  rec.gate_config = std::string(guidance::gate_config_name(gate));
  trace.emit(ThoughtCategory::kDecision, "gate selected " + rec.gate_config, probs[static_cast<int>(gate)],
             {"gate:" + rec.gate_config});

  const bool have_yosys = tools->available("yosys");
  const auto required_for = [&](bool tb) {
    return tb ? Stage::kSimPassed : (have_yosys ? Stage::kSynthPassed : Stage::kLintPassed);
  };
  const std::string top = module_name_for(spec);

  // symbolic tier
  if (rec.routing.tier == Tier::kSymbolic) {
    try {
      const auto fns = symbolic_functions(spec.description);
      std::vector<kmap::OutputLogic> outs;
      std::vector<std::string> ev;
      for (const auto& f : fns) {
        outs.push_back(kmap::solve(f));
        ev.push_back(f.output_name + " = " + kmap::expression_text(f, outs.back().sop, outs.back().parity));
      }
      res.source = kmap::emit_verilog(outs, top, spec.interface_header);
      trace.emit(ThoughtCategory::kGeneration,
                 "symbolic solver produced " + std::to_string(outs.size()) + " output(s) without a backend call",
                 1.0, ev);
      rec.testbench = problem.testbench ? "provided" : "none";
      rec.required_stage = required_for(problem.testbench.has_value());
      rec.iterations_used = 0;
      if (tools->available("iverilog") || tools->available("verilator")) {
        std::string design = res.source;
        if (problem.testbench) design = agents::adapt_testbench(design, *problem.testbench, top);
        std::optional<std::string_view> tb;
        if (problem.testbench) tb = *problem.testbench;
        rec.final_report = validator.validate(design, tb);
        trace.emit(ThoughtCategory::kValidation, "symbolic module reached " + stage_str(rec.final_report->stage_reached),
                   1.0, error_evidence(*rec.final_report));
        rec.outcome = rec.final_report->stage_reached >= rec.required_stage ? Outcome::kSolved : Outcome::kExhausted;
      } else {
        trace.emit(ThoughtCategory::kValidation, "no lint tool available; symbolic result accepted unvalidated", 0.9);
        rec.outcome = Outcome::kSolved;
      }
      return finish(res);
    } catch (const ParseError& e) {
      trace.emit(ThoughtCategory::kError, std::string("symbolic parse failed, using the general loop: ") + e.what(),
                 1.0);
    } catch (const EmitError& e) {
      trace.emit(ThoughtCategory::kError, std::string("symbolic emission failed, using the general loop: ") + e.what(),
                 1.0);
    }
  }

  if (!inner) throw ConfigError("no backend configured for " + rec.spec_id + " (mock backend needs a script)");

  // testbench: provided, else generated once, else none
  std::optional<std::string> testbench = problem.testbench;
  rec.testbench = testbench ? "provided" : "none";
  if (!testbench && config_.generate_testbench && spec.interface_header) {
    backend.purpose = "testbench";
    try {
      const auto tb = agents::generate_testbench(backend, spec, *spec.interface_header, 1, profiles_);
      if (tb.compliance.ok) {
        testbench = tb.source;
        rec.testbench = "generated";
        trace.emit(ThoughtCategory::kProgress, "generated a compliant testbench", 1.0);
      } else {
        trace.emit(ThoughtCategory::kBottleneck, "generated testbench rejected; continuing without one", 1.0,
                   tb.compliance.problems);
      }
    } catch (const std::exception& e) {
      trace.emit(ThoughtCategory::kError, std::string("testbench generation failed: ") + e.what(), 1.0);
    }
  }
  rec.required_stage = required_for(testbench.has_value());
  std::optional<std::string_view> tb_view;
  if (testbench) tb_view = *testbench;
  const auto mode = wants_systemverilog(spec) ? validation::LintMode::kSystemVerilog
                                              : validation::LintMode::kStrict2001;

  // hierarchical dispatch
  if (rec.routing.hierarchical) {
    backend.purpose = "hierarchy";
    hier::HierarchyOptions ho;
    ho.max_iterations = config_.max_iterations;
    ho.profiles = &profiles_;
    ho.decompose.model = profiles_.get(agents::AgentName::kGenius).model_id;
    ho.on_event = [&](std::string_view kind, std::string_view msg) {
      const auto cat = kind == "plan"       ? ThoughtCategory::kAnalysis
                       : kind == "module"   ? ThoughtCategory::kProposal
                                            : ThoughtCategory::kValidation;
      trace.emit(cat, std::string(msg), 1.0);
    };
    try {
      const auto h = hier::generate_hierarchical(enriched, backend, validator, ho);
      rec.hierarchy = hier::hierarchical_to_json(h);
      for (const auto& m : h.modules) {
        rec.iterations_used = std::max(rec.iterations_used, m.iterations);
        rec.generation_calls += m.iterations;
      }
      res.source = h.combined_source;
      if (h.passed) {
        std::string design = res.source;
        if (testbench) design = agents::adapt_testbench(design, *testbench, top);
        rec.final_report = validator.validate(design, tb_view, {}, validation::LintMode::kSystemVerilog);
      } else {
        ValidationReport r;
        r.errors = h.combined_lint.errors;
        for (const auto& m : h.modules)
          if (!m.lint_passed) r.errors.insert(r.errors.end(), m.errors.begin(), m.errors.end());
        r.tool_logs["lint"] = h.combined_lint.log;
        rec.final_report = r;
      }
      trace.emit(ThoughtCategory::kValidation, "hierarchical design reached " + stage_str(rec.final_report->stage_reached),
                 1.0, error_evidence(*rec.final_report));
      rec.outcome = rec.final_report->stage_reached >= rec.required_stage ? Outcome::kSolved : Outcome::kExhausted;
    } catch (const DecompositionMalformed& e) {
      rec.outcome = Outcome::kError;
      rec.error = e.what();
      trace.emit(ThoughtCategory::kError, rec.error, 1.0);
    } catch (const CycleError& e) {
      rec.outcome = Outcome::kError;
      rec.error = e.what();
      trace.emit(ThoughtCategory::kError, rec.error, 1.0);
    }
    return finish(res);
  }

  // iterative loop
  std::vector<int> history;
  std::vector<agents::ErrorFeedback> feedback;
  std::optional<ValidationReport> prev;
  std::string current;
  long tokens_total = 0;
  const std::string episode_id = rec.spec_id + "@" + std::to_string(episode);
  for (int i = 0; i < config_.max_iterations; ++i) {
    rl::IterationContext ctx;
    ctx.iteration = i;
    ctx.max_iterations = config_.max_iterations;
    ctx.testbench_available = testbench.has_value();
    ctx.current_source = current;
    ctx.previous_report = prev;
    const auto state = rl::encode_state(spec, ctx, prev ? &*prev : nullptr, history);
    const auto seed = text::fnv1a64(rec.spec_id + "#" + std::to_string(i), 1469598103934665603ULL ^ config_.seed);
    const auto decision = planner_->decide(state, episode + config_.episode_offset, seed);
    const auto& action = decision.sampled.action;
    auto gen = rl::map_action(action);
    if (rec.routing.tier == Tier::kWaveformSpecialist && i == 0) {
      const auto& wf = profiles_.get(agents::AgentName::kWaveform);
      gen.agent = agents::AgentName::kWaveform;
      gen.temperature = wf.default_temperature;
      gen.rag_k = wf.default_rag_k;
    }
    const auto& profile = profiles_.get(gen.agent);
    trace.emit(ThoughtCategory::kDecision,
               "iteration " + std::to_string(i + 1) + ": " + std::string(agents::agent_name(gen.agent)) + " agent, " +
                   std::string(rl::focus_name(gen.focus)) + " focus, T=" + fmt(gen.temperature, 2) + " (" +
                   decision.source + ")",
               decision.source == "heuristic" ? 1.0 : std::exp(std::min(0.0, decision.log_prob)),
               decision.rule.empty() ? std::vector<std::string>{} : std::vector<std::string>{"rule:" + decision.rule});

    IterationRecord it;
    it.index = i;
    it.action = action;
    it.agent = std::string(agents::agent_name(gen.agent));
    it.decision_source = decision.source;
    it.rule = decision.rule;

    std::string rag;
    if (!kb_.empty() || !library_.empty()) {
      kb::RetrievalQuery q;
      q.spec_text = spec.description;
      if (!feedback.empty()) q.error_context = agents::format_error_feedback(feedback);
      q.focus = kb_focus(gen.focus);
      q.k = std::clamp(gen.rag_k, kb::kMinK, kb::kMaxK);
      try {
        const auto hits = kb::retrieve(kb_, library_, q);
        std::vector<std::string> ids;
        for (const auto& h : hits) ids.push_back(h.entry.id);
        rag = kb::format_context(hits);
        trace.emit(ThoughtCategory::kRetrieval, "retrieved " + std::to_string(hits.size()) + " entries",
                   hits.empty() ? 0.0 : hits.front().score, ids);
      } catch (const EmptyKnowledgeBase&) {
      }
    }

    agents::PromptOptions po;
    po.temperature = gen.temperature;
    po.max_tokens = gen.max_tokens;
    std::optional<agents::GenerationResult> g;
    backend.purpose = "generation";
    ++rec.generation_calls;
    for (int attempt = 0; attempt <= gen.retries; ++attempt) {
      if (attempt > 0) {
        backend.purpose = "retry";
        ++it.retries;
      }
      try {
        g = agents::generate(backend, profile, enriched, rag, feedback, po);
        it.tokens_in += g->tokens_in;
        it.tokens_out += g->tokens_out;
        if (!g->extraction_failed) break;
        trace.emit(ThoughtCategory::kBottleneck, "response held no Verilog module", 1.0);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        it.error = e.what();
        g.reset();
      }
    }
    tokens_total += it.tokens_in + it.tokens_out;

    ValidationReport report;
    if (!g) {
      report = error_report(validation::ErrorCategory::kOther, "backend error: " + it.error);
    } else if (g->extraction_failed) {
      report = error_report(validation::ErrorCategory::kSyntax, "response contained no Verilog module");
      it.error = "extraction failed";
    } else {
      current = g->source;
      try {
        std::string design = current;
        if (testbench) design = agents::adapt_testbench(design, *testbench, top);
        report = validator.validate(design, tb_view, {}, mode);
      } catch (const PortMismatchError& e) {
        report = error_report(validation::ErrorCategory::kPortMismatch, e.what());
      } catch (const ToolMissing& e) {
        it.error = e.what();
        report = error_report(validation::ErrorCategory::kOther, e.what());
      } catch (const ToolCrash& e) {
        it.error = e.what();
        report = error_report(validation::ErrorCategory::kOther, e.what());
      }
    }
    trace.emit(ThoughtCategory::kValidation,
               "iteration " + std::to_string(i + 1) + " reached " + stage_str(report.stage_reached) + " with " +
                   std::to_string(report.errors.size()) + " errors",
               1.0, error_evidence(report));

    it.reward = rl::compute_reward(report, prev ? &*prev : nullptr, it.tokens_in + it.tokens_out, i, i == 0,
                                   rec.category);
    trace.emit(ThoughtCategory::kProgress, "reward " + fmt(it.reward.total), 1.0,
               {"term:" + fmt(it.reward.term), "eff:" + fmt(it.reward.eff), "qual:" + fmt(it.reward.qual),
                "prog:" + fmt(it.reward.prog)});

    history.push_back(static_cast<int>(action.agent));
    const bool solved = report.stage_reached >= rec.required_stage;
    const bool over_tokens = config_.max_tokens > 0 && tokens_total >= config_.max_tokens;
    const bool over_time =
        config_.max_wall_s > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= config_.max_wall_s;
    const bool done = solved || over_tokens || over_time || i + 1 == config_.max_iterations;

    rl::Transition tr;
    tr.state = state;
    tr.sampled = decision.sampled;
    tr.log_prob = decision.log_prob;
    tr.value = decision.value;
    tr.reward = it.reward;
    tr.tokens = it.tokens_in + it.tokens_out;
    ctx.iteration = i + 1;
    ctx.current_source = current;
    ctx.previous_report = report;
    tr.next_state = rl::encode_state(spec, ctx, &report, history);
    tr.done = done;
    tr.episode = episode_id;
    buffer_->append(std::move(tr));

    if (!solved) feedback = validation::to_feedback(report, rec.category);
    it.report = report;
    rec.iterations.push_back(std::move(it));
    rec.iterations_used = i + 1;
    prev = report;
    rec.final_report = report;
    if (solved) {
      rec.outcome = Outcome::kSolved;
      break;
    }
    if (over_tokens || over_time) {
      rec.error = over_tokens ? "token budget exhausted" : "wall-clock budget exhausted";
      trace.emit(ThoughtCategory::kBottleneck, rec.error, 1.0);
      break;
    }
  }
  if (rec.outcome != Outcome::kSolved) rec.outcome = Outcome::kExhausted;
  res.source = current;
  return finish(res);
}

// ----------------------------------------------------------------- benchmark

std::vector<Problem> load_problems(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("problem directory not found: " + dir);
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  std::vector<Problem> out;
  auto read_optional = [](const fs::path& p) -> std::optional<std::string> {
    if (fs::is_regular_file(p)) return text::read_file(p.string());
    return std::nullopt;
  };
  for (const auto& path : entries) {
    Problem p;
    if (fs::is_directory(path)) {
      fs::path spec_file;
      for (const char* name : {"spec.json", "spec.txt"})
        if (fs::is_regular_file(path / name)) {
          spec_file = path / name;
          break;
        }
      if (spec_file.empty()) continue;
      p.id = path.filename().string();
      p.spec = load_spec(spec_file.string());
      p.testbench = read_optional(path / "testbench.v");
      if (!p.testbench) p.testbench = read_optional(path / "testbench.sv");
      if (auto script = read_optional(path / "script.json")) {
        const auto j = json::parse(*script);
        const auto& arr = j.is_object() ? j.at("responses") : j;
        p.script = arr.get<std::vector<std::string>>();
      }
      if (fs::is_regular_file(path / "tools.json"))
        p.tools = validation::FixtureRunner::load((path / "tools.json").string());
    } else if (path.extension() == ".json") {
      json j = json::parse(text::read_file(path.string()), nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("name") || !j.contains("description")) continue;
      p.id = path.stem().string();
      p.spec = spec_from_json(j);
      p.testbench = read_optional(path.parent_path() / (path.stem().string() + "_tb.v"));
    } else {
      continue;
    }
    out.push_back(std::move(p));
  }
  if (out.empty()) throw ConfigError("no problems found in " + dir);
  return out;
}

json summary_to_json(const BenchmarkSummary& s) {
  json cats = json::object();
  for (const auto& [name, c] : s.per_category)
    cats[name] = {{"total", c.total}, {"solved", c.solved},
                  {"pass_at_1", c.total ? static_cast<double>(c.solved) / c.total : 0.0}};
  json ids = json::array();
  for (const auto& r : s.records) ids.push_back(r.spec_id);
  return {{"total", s.total},
          {"solved", s.solved},
          {"pass_at_1", s.pass_at_1},
          {"mean_iterations", s.mean_iterations},
          {"total_cost", s.total_cost ? json(*s.total_cost) : json(nullptr)},
          {"mean_cost", s.mean_cost ? json(*s.mean_cost) : json(nullptr)},
          {"per_category", cats},
          {"failures", s.failures},
          {"problems", ids}};
}

BenchmarkSummary run_benchmark(const std::string& problem_dir, Pipeline& pipeline, const BenchmarkOptions& opts) {
  return run_benchmark(load_problems(problem_dir), pipeline, opts);
}

BenchmarkSummary run_benchmark(const std::vector<Problem>& problems, Pipeline& pipeline,
                               const BenchmarkOptions& opts) {
  if (problems.empty()) throw ConfigError("no problems found");
  if (!opts.trace_dir.empty()) fs::create_directories(opts.trace_dir);
  std::vector<RunRecord> records(problems.size());
  std::vector<std::exception_ptr> fatal(problems.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < problems.size(); i = next++) {
      const auto& p = problems[i];
      const std::string id = p.id.empty() ? p.spec.name : p.id;
      std::ofstream file;
      if (!opts.trace_dir.empty()) file.open(fs::path(opts.trace_dir) / (id + ".jsonl"));
      ThoughtStream trace(file.is_open() ? &file : nullptr);
      try {
        records[i] = pipeline.generate_module(p, static_cast<int>(i), &trace).record;
      } catch (const ConfigError&) {
        fatal[i] = std::current_exception();
      } catch (const UnpricedModel&) {
        fatal[i] = std::current_exception();
      } catch (const std::exception& e) {
        records[i].spec_id = id;
        records[i].category = effective_category(p.spec);
        records[i].outcome = Outcome::kError;
        records[i].error = e.what();
        trace.emit(ThoughtCategory::kError, e.what(), 1.0);
      }
    }
  };
  const int n = std::min<int>(pipeline.config().parallelism, static_cast<int>(problems.size()));
  std::vector<std::thread> threads;
  for (int t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (const auto& f : fatal)
    if (f) std::rethrow_exception(f);

  BenchmarkSummary s;
  s.total = static_cast<int>(records.size());
  double iter_sum = 0.0, cost_sum = 0.0;
  bool costed = pipeline.config().prices.has_value();
  for (const auto& r : records) {
    const bool ok = r.outcome == Outcome::kSolved;
    pipeline.history().record(r.category, ok);
    auto& cat = s.per_category[std::string(category_name(r.category))];
    ++cat.total;
    if (ok) {
      ++s.solved;
      ++cat.solved;
      iter_sum += r.iterations_used;
    } else {
      s.failures.push_back(r.spec_id);
    }
    if (costed) cost_sum += r.cost_usd.value_or(0.0);
  }
  s.pass_at_1 = static_cast<double>(s.solved) / s.total;
  s.mean_iterations = s.solved ? iter_sum / s.solved : 0.0;
  if (costed) {
    s.total_cost = cost_sum;
    s.mean_cost = cost_sum / s.total;
  }
  s.records = std::move(records);

  if (!opts.out_dir.empty()) {
    fs::create_directories(fs::path(opts.out_dir) / "records");
    for (const auto& r : s.records)
      text::write_file((fs::path(opts.out_dir) / "records" / (r.spec_id + ".json")).string(),
                       run_record_to_json(r).dump(2) + "\n");
    text::write_file((fs::path(opts.out_dir) / "summary.json").string(), summary_to_json(s).dump(2) + "\n");
  }
  if (!pipeline.config().transitions_out.empty()) pipeline.transitions().save_jsonl(pipeline.config().transitions_out);
  return s;
}

}  // namespace rtlforge::pipeline
