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
#include "rtlforge/agents.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <set>
#include <thread>

#include "httplib.h"
#include "rtlforge/data.hpp"
#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::agents {

using nlohmann::json;

namespace {

constexpr std::string_view kAgentNames[] = {"Genius",   "Fast",     "Debug",
                                            "Optimize", "Waveform", "Testbench"};
constexpr std::string_view kSelectionNames[] = {"rl_policy", "keyword_rule", "explicit"};

constexpr std::string_view kCodingGuidelines =
    "- Write synthesizable Verilog-2001 unless the interface uses SystemVerilog types.\n"
    "- Use non-blocking assignments (<=) in clocked always blocks and blocking (=) in "
    "combinational ones.\n"
    "- Give every combinational output a value on every path; no inferred latches.\n"
    "- Declare every signal before use; no implicit nets.\n"
    "- Keep the module name and port list exactly as specified.";

constexpr std::string_view kSynthesisConstraints =
    "- No initial blocks, delays or system tasks in the design.\n"
    "- One clock domain unless the task names several.\n"
    "- Size every constant explicitly.\n"
    "- Avoid combinational loops.";

std::string section(std::string_view name, std::string_view body) {
  std::string out = "=== ";
  out += name;
  out += " ===\n";
  out += body;
  if (!body.empty() && body.back() != '\n') out += '\n';
  return out;
}

std::string system_prompt(const AgentProfile& agent) {
  std::string out = section("ROLE", agent.system_prompt_template);
  if (!agent.methodology.empty()) {
    std::string steps;
    for (std::size_t i = 0; i < agent.methodology.size(); ++i)
      steps += std::to_string(i + 1) + ". " + agent.methodology[i] + "\n";
    out += "\n" + section("METHODOLOGY", steps);
  }
  out += "\n" + section("CODING GUIDELINES", kCodingGuidelines);
  out += "\n" + section("SYNTHESIS CONSTRAINTS", kSynthesisConstraints);
  return out;
}

std::string spec_section(const Spec& spec) {
  return section("SPECIFICATION", "Module: " + spec.name + "\n\n" + spec.description);
}

// Index of the parenthesis closing the one at `open`.
std::size_t match_paren(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    else if (s[i] == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

void split_url(const std::string& url, std::string& base, std::string& path) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("backend URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  base = slash == std::string::npos ? url : url.substr(0, slash);
  path = slash == std::string::npos ? "/" : url.substr(slash);
}

}  // namespace

std::string_view agent_name(AgentName a) { return kAgentNames[static_cast<int>(a)]; }

AgentName parse_agent_name(std::string_view s) {
  for (int i = 0; i < kNumAgents; ++i)
    if (text::to_lower(kAgentNames[i]) == text::to_lower(s)) return static_cast<AgentName>(i);
  throw ConfigError("unknown agent: " + std::string(s));
}

std::string_view selection_name(Selection s) { return kSelectionNames[static_cast<int>(s)]; }

void AgentProfile::validate() const {
  if (model_id.empty()) throw ConfigError("agent " + std::string(agent_name(name)) + " has no model_id");
  if (!(default_temperature >= 0.0 && default_temperature <= 1.0))
    throw ConfigError("agent temperature must lie in [0, 1]");
  if (default_rag_k < 0) throw ConfigError("agent rag_k must be non-negative");
  if (system_prompt_template.empty()) throw ConfigError("agent system prompt is empty");
}

AgentProfile profile_from_json(const json& j) {
  try {
    AgentProfile p;
    p.name = parse_agent_name(j.at("name").get<std::string>());
    p.model_id = j.at("model_id").get<std::string>();
    p.default_temperature = j.at("default_temperature").get<double>();
    p.default_rag_k = j.at("default_rag_k").get<int>();
    const auto sel = j.at("selection").get<std::string>();
    const auto it = std::find(std::begin(kSelectionNames), std::end(kSelectionNames), sel);
    if (it == std::end(kSelectionNames)) throw ConfigError("unknown selection mode: " + sel);
    p.selection = static_cast<Selection>(it - std::begin(kSelectionNames));
    p.system_prompt_template = j.at("system_prompt_template").get<std::string>();
    if (j.contains("methodology")) p.methodology = j["methodology"].get<std::vector<std::string>>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed agent profile: ") + e.what());
  }
}

json profile_to_json(const AgentProfile& p) {
  json j = {{"name", agent_name(p.name)},
            {"model_id", p.model_id},
            {"default_temperature", p.default_temperature},
            {"default_rag_k", p.default_rag_k},
            {"selection", selection_name(p.selection)},
            {"system_prompt_template", p.system_prompt_template}};
  if (!p.methodology.empty()) j["methodology"] = p.methodology;
  return j;
}

AgentProfiles::AgentProfiles(std::vector<AgentProfile> profiles) {
  std::vector<std::optional<AgentProfile>> slots(kNumAgents);
  for (auto& p : profiles) {
    auto& slot = slots[static_cast<int>(p.name)];
    if (slot) throw ConfigError("duplicate agent profile " + std::string(agent_name(p.name)));
    slot = std::move(p);
  }
  for (int i = 0; i < kNumAgents; ++i) {
    if (!slots[i]) throw ConfigError("missing agent profile " + std::string(kAgentNames[i]));
    profiles_.push_back(std::move(*slots[i]));
  }
}

const AgentProfiles& AgentProfiles::builtin() {
  static const AgentProfiles p = from_json(json::parse(data::builtin("agents.json")));
  return p;
}

AgentProfiles AgentProfiles::from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("agent profiles must be a JSON array");
  std::vector<AgentProfile> ps;
  for (const auto& e : j) ps.push_back(profile_from_json(e));
  return AgentProfiles(std::move(ps));
}

AgentProfiles AgentProfiles::load(const std::string& path) {
  if (path.empty()) return builtin();
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid agent profile JSON in " + path + ": " + e.what());
  }
}

json AgentProfiles::to_json() const {
  json arr = json::array();
  for (const auto& p : profiles_) arr.push_back(profile_to_json(p));
  return arr;
}

const std::vector<std::string>& waveform_steps() {
  static const std::vector<std::string> steps = {
      "Extract all transitions",       "Identify pattern type", "Find exact wrap points",
      "Resolve temporal dependencies", "Derive logic",          "Verify"};
  return steps;
}

std::string format_error_feedback(std::span<const ErrorFeedback> errors) {
  std::string out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const auto& e = errors[i];
    if (i) out += "\n";
    out += "[" + std::to_string(i + 1) + "] " + e.category;
    if (!e.stage.empty()) out += " (" + e.stage + ")";
    if (e.line > 0) out += " at line " + std::to_string(e.line);
    out += ": " + e.message + "\n";
    if (!e.context.empty()) {
      out += e.context;
      if (e.context.back() != '\n') out += '\n';
    }
    if (!e.hint.empty()) out += "Hint: " + e.hint + "\n";
  }
  return out;
}

CompletionRequest build_prompt(const AgentProfile& agent, const Spec& spec,
                               std::string_view rag_context, std::span<const ErrorFeedback> errors,
                               const PromptOptions& opts) {
  CompletionRequest r;
  r.model = agent.model_id;
  r.temperature = opts.temperature.value_or(agent.default_temperature);
  r.max_tokens = opts.max_tokens.value_or(kDefaultMaxTokens);
  r.system_prompt = system_prompt(agent);
  r.user_prompt = spec_section(spec);
  if (spec.interface_header && !spec.interface_header->empty())
    r.user_prompt += "\n" + section("INTERFACE", *spec.interface_header);
  if (spec.context_rtl && !spec.context_rtl->empty())
    r.user_prompt += "\n" + section("EXISTING RTL", *spec.context_rtl);
  if (!text::trim(rag_context).empty())
    r.user_prompt += "\n" + section("REFERENCE CONTEXT", rag_context);
  if (!errors.empty())
    r.user_prompt += "\n" + section("ERRORS TO FIX", format_error_feedback(errors));
  return r;
}

// ------------------------------------------------------------------ backends

long count_tokens(std::string_view s) { return static_cast<long>(text::split_ws(s).size()); }

MockBackend::MockBackend(std::vector<std::string> script) : script_(std::move(script)) {}
MockBackend::MockBackend(Responder responder) : responder_(std::move(responder)) {}

CompletionResult MockBackend::complete(const CompletionRequest& request) {
  std::string reply;
  {
    std::lock_guard lock(mu_);
    log_.push_back(request);
    if (responder_) {
      reply = responder_(request);
    } else {
      if (next_ >= script_.size()) throw ScriptExhausted();
      reply = script_[next_++];
    }
  }
  CompletionResult r;
  r.input_tokens = count_tokens(request.system_prompt) + count_tokens(request.user_prompt);
  r.output_tokens = count_tokens(reply);
  r.text = std::move(reply);
  return r;
}

std::vector<CompletionRequest> MockBackend::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  const char* url = std::getenv("RTLFORGE_LLM_URL");
  if (!url || !*url) throw ConfigError("RTLFORGE_LLM_URL is not set");
  c.url = url;
  if (const char* key = std::getenv("RTLFORGE_LLM_KEY")) c.api_key = key;
  return c;
}

json remote_payload(const CompletionRequest& request) {
  return {{"model", request.model},
          {"system", request.system_prompt},
          {"messages", json::array({{{"role", "user"}, {"content", request.user_prompt}}})},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

CompletionResult parse_remote_response(const json& body) {
  CompletionResult r;
  try {
    if (body.contains("text")) {
      r.text = body["text"].get<std::string>();
    } else if (body.contains("choices")) {
      r.text = body["choices"].at(0).at("message").at("content").get<std::string>();
    } else if (body.contains("content")) {
      for (const auto& part : body["content"])
        if (part.contains("text")) r.text += part["text"].get<std::string>();
    } else {
      throw BackendError("response has no text field");
    }
    if (body.contains("usage")) {
      const auto& u = body["usage"];
      r.input_tokens = u.value("input_tokens", u.value("prompt_tokens", 0L));
      r.output_tokens = u.value("output_tokens", u.value("completion_tokens", 0L));
    }
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
  return r;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  split_url(config_.url, scheme_host_port_, path_);
  if (config_.attempts < 1) throw ConfigError("backend attempts must be at least 1");
  if (!config_.sleep)
    config_.sleep = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

CompletionResult RemoteBackend::attempt(const CompletionRequest& request) const {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration<double>(config_.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path_, headers, remote_payload(request).dump(), "application/json");
  if (!res) throw TransportError("request to " + config_.url + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
  if (res->status < 200 || res->status >= 300)
    throw BackendError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("endpoint returned invalid JSON: ") + e.what());
  }
  auto r = parse_remote_response(body);
  r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

CompletionResult RemoteBackend::complete(const CompletionRequest& request) {
  double delay = config_.backoff_s;
  for (int i = 1;; ++i) {
    try {
      return attempt(request);
    } catch (const TransportError& e) {
      if (i >= config_.attempts)
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(i) + " attempts)");
    }
    config_.sleep(delay);
    delay *= 2.0;
  }
}

// -------------------------------------------------------------- extraction

std::string extract_code(std::string_view response) {
  const std::string s(response);
  std::string fenced;
  std::size_t pos = 0;
  while (true) {
    const auto open = s.find("```", pos);
    if (open == std::string::npos) break;
    const auto body = s.find('\n', open);
    if (body == std::string::npos) break;
    const auto close = s.find("```", body + 1);
    if (close == std::string::npos) break;
    std::string inner = s.substr(body + 1, close - body - 1);
    // Drop indentation preceding the closing fence.
    const auto last_nl = inner.find_last_of('\n');
    const std::size_t tail_start = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (text::trim(std::string_view(inner).substr(tail_start)).empty()) inner.erase(tail_start);
    if (!verilog::find_modules(inner).empty()) fenced += inner;
    pos = close + 3;
  }
  if (!fenced.empty()) return fenced;

  static const std::regex header(R"(\bmodule\s+[A-Za-z_][A-Za-z0-9_$]*\s*[#(;])");
  std::smatch m;
  if (!std::regex_search(s, m, header)) throw ExtractionFailed();
  const std::size_t begin = static_cast<std::size_t>(m.position(0));
  std::size_t end = std::string::npos;
  static const std::regex endm(R"(\bendmodule\b)");
  for (auto it = std::sregex_iterator(s.begin() + static_cast<std::ptrdiff_t>(begin), s.end(), endm);
       it != std::sregex_iterator(); ++it)
    end = begin + static_cast<std::size_t>(it->position(0)) + 9;
  if (end == std::string::npos) throw ExtractionFailed();
  return s.substr(begin, end - begin) + "\n";
}

GenerationResult generate(Backend& backend, const AgentProfile& agent, const Spec& spec,
                          std::string_view rag_context, std::span<const ErrorFeedback> errors,
                          const PromptOptions& opts) {
  GenerationResult g;
  g.agent = agent.name;
  g.request = build_prompt(agent, spec, rag_context, errors, opts);
  const auto r = backend.complete(g.request);
  g.raw_response = r.text;
  g.tokens_in = r.input_tokens;
  g.tokens_out = r.output_tokens;
  try {
    g.source = extract_code(r.text);
  } catch (const ExtractionFailed&) {
    g.extraction_failed = true;
  }
  return g;
}

// --------------------------------------------------------------- testbench

namespace {

bool is_clock_port(const verilog::Port& p) {
  const auto n = text::to_lower(p.name);
  return p.direction == verilog::Direction::kInput && (n == "clk" || n == "clock" || n == "clk_i" ||
                                                       n == "i_clk" || n == "aclk" || n == "pclk");
}

bool is_reset_port(const verilog::Port& p) {
  const auto n = text::to_lower(p.name);
  return p.direction == verilog::Direction::kInput &&
         (n.find("rst") != std::string::npos || n.find("reset") != std::string::npos);
}

const std::vector<std::string>& sv_only_words() {
  static const std::vector<std::string> w = {
      "logic",   "always_ff", "always_comb", "always_latch", "typedef", "enum",
      "struct",  "interface", "class",       "int",          "bit",     "byte",
      "shortint", "longint",  "program",     "unique",       "priority", "assert"};
  return w;
}

}  // namespace

Compliance check_testbench(std::string_view testbench, const verilog::ModuleInfo& dut) {
  Compliance c;
  const std::string raw(testbench);
  const std::string masked = verilog::mask_comments(testbench);
  auto fail = [&](std::string p) {
    c.ok = false;
    c.problems.push_back(std::move(p));
  };
  for (const auto& w : sv_only_words())
    if (verilog::uses_word(testbench, w)) fail("uses SystemVerilog construct '" + w + "'");

  const std::regex inst("\\b" + dut.name + R"(\s*(#\s*\([^;]*?\)\s*)?[A-Za-z_][A-Za-z0-9_]*\s*\()");
  if (!std::regex_search(masked, inst)) fail("does not instantiate " + dut.name);

  const bool has_clock = std::any_of(dut.ports.begin(), dut.ports.end(), is_clock_port);
  if (has_clock) {
    static const std::regex toggle(
        R"((always|forever)\s*#\s*5(\.0+)?\s*([A-Za-z_]\w*)\s*=\s*(~|!)\s*([A-Za-z_]\w*))");
    std::smatch m;
    if (!std::regex_search(masked, m, toggle) || m[3] != m[5])
      fail("no 10ns clock (a toggle every 5 time units)");
  }
  const auto reset = std::find_if(dut.ports.begin(), dut.ports.end(), is_reset_port);
  if (reset != dut.ports.end()) {
    const std::regex drive("\\b" + reset->name + R"(\s*(<=|=)\s*)");
    std::ptrdiff_t n = std::distance(std::sregex_iterator(masked.begin(), masked.end(), drive),
                                     std::sregex_iterator());
    if (n < 2) fail("no reset sequence driving " + reset->name);
  }

  static const std::regex scenario(R"((?:test|scenario|case)\s*#?\s*(\d+))", std::regex::icase);
  std::set<std::string> labels;
  for (auto it = std::sregex_iterator(raw.begin(), raw.end(), scenario); it != std::sregex_iterator(); ++it)
    labels.insert((*it)[1]);
  if (static_cast<int>(labels.size()) < kMinScenarios)
    fail("only " + std::to_string(labels.size()) + " labelled test scenarios, need " +
         std::to_string(kMinScenarios));

  static const std::regex marker(
      R"(Mismatches:\s*%\w+\s+in\s+%\w+\s+samples|%\w+\s*/\s*%\w+\s+tests?\s+passed|STATUS:\s*(PASS|FAIL))");
  if (!std::regex_search(raw, marker)) fail("no recognised status marker");
  return c;
}

CompletionRequest testbench_request(const AgentProfile& agent, const Spec& spec,
                                    const verilog::ModuleInfo& dut,
                                    std::span<const std::string> problems) {
  CompletionRequest r;
  r.model = agent.model_id;
  r.temperature = agent.default_temperature;
  r.system_prompt = system_prompt(agent);
  r.user_prompt = spec_section(spec);
  r.user_prompt += "\n" + section("MODULE UNDER TEST", dut.header_text);
  std::string req =
      "- Use Verilog-2001 only: reg, wire, integer; no SystemVerilog keywords.\n"
      "- Instantiate " + dut.name + " and connect every port by name.\n"
      "- Apply a proper reset sequence before checking outputs.\n"
      "- Use a 10ns clock period: always #5 clk = ~clk;\n"
      "- Cover at least 5 test scenarios, each labelled \"Test N\".\n"
      "- Count mismatches and finish with exactly one status line:\n"
      "  $display(\"Mismatches: %0d in %0d samples\", errors, samples);\n";
  r.user_prompt += "\n" + section("TESTBENCH REQUIREMENTS", req);
  if (!problems.empty()) {
    std::string p;
    for (const auto& s : problems) p += "- " + s + "\n";
    r.user_prompt += "\n" + section("COMPLIANCE ISSUES", p);
  }
  return r;
}

TestbenchResult generate_testbench(Backend& backend, const Spec& spec, std::string_view module_header,
                                   int max_attempts, const AgentProfiles& profiles) {
  const auto dut = verilog::parse_header(module_header);
  const auto& agent = profiles.get(AgentName::kTestbench);
  TestbenchResult out;
  std::vector<std::string> problems;
  for (int i = 0; i < std::max(1, max_attempts); ++i) {
    const auto r = backend.complete(testbench_request(agent, spec, dut, problems));
    ++out.attempts;
    out.tokens_in += r.input_tokens;
    out.tokens_out += r.output_tokens;
    out.source = extract_code(r.text);
    out.compliance = check_testbench(out.source, dut);
    if (out.compliance.ok) break;
    problems = out.compliance.problems;
  }
  return out;
}

std::string adapt_testbench(std::string_view module_source, std::string_view testbench_source,
                            std::string_view expected_top) {
  const auto modules = verilog::parse_modules(module_source);
  if (modules.empty()) throw VerilogParseFailure("no module found in generated source");
  const std::string masked = verilog::mask_comments(module_source);
  const auto spans = verilog::find_modules(module_source);
  std::vector<const verilog::ModuleInfo*> tops;
  for (const auto& m : modules) {
    if (m.name == expected_top) return std::string(module_source);
    bool instantiated = false;
    for (const auto& other : modules) {
      if (&other == &m) continue;
      const std::regex inst("\\b" + m.name + R"(\s*(#\s*\([^;]*?\)\s*)?[A-Za-z_]\w*\s*\()");
      for (const auto& sp : spans)
        if (sp.name == other.name &&
            std::regex_search(masked.substr(sp.header_end, sp.end - sp.header_end), inst))
          instantiated = true;
    }
    if (!instantiated) tops.push_back(&m);
  }
  if (tops.size() != 1)
    throw VerilogParseFailure("expected exactly one top module, found " + std::to_string(tops.size()));
  const auto& top = *tops.front();

  // Ports the testbench connects by name on the expected top.
  std::vector<std::string> required;
  bool named = false;
  const std::string tb = verilog::mask_comments(testbench_source);
  const std::regex inst("\\b" + std::string(expected_top) +
                        R"(\s*(#\s*\([^;]*?\)\s*)?[A-Za-z_]\w*\s*\()");
  std::smatch m;
  if (std::regex_search(tb, m, inst)) {
    const std::size_t open = static_cast<std::size_t>(m.position(0) + m.length(0)) - 1;
    const std::size_t close = match_paren(tb, open);
    if (close != std::string::npos) {
      const std::string conns = tb.substr(open + 1, close - open - 1);
      static const std::regex port_ref(R"(\.\s*([A-Za-z_]\w*)\s*\()");
      for (auto it = std::sregex_iterator(conns.begin(), conns.end(), port_ref);
           it != std::sregex_iterator(); ++it) {
        required.push_back((*it)[1]);
        named = true;
      }
    }
  }
  if (!named)
    for (const auto& p : top.ports) required.push_back(p.name);

  std::vector<std::string> missing, extra;
  std::set<std::string> have;
  for (const auto& p : top.ports) have.insert(p.name);
  std::set<std::string> want(required.begin(), required.end());
  for (const auto& r : required)
    if (!have.count(r)) missing.push_back(r);
  for (const auto& p : top.ports)
    if (!want.count(p.name)) extra.push_back(p.name);
  if (!missing.empty() || !extra.empty()) throw PortMismatchError(missing, extra);

  std::string w = "\nmodule " + std::string(expected_top);
  if (!top.parameters.empty()) {
    w += " #(\n";
    for (std::size_t i = 0; i < top.parameters.size(); ++i) {
      const auto& p = top.parameters[i];
      w += "    parameter " + p.name + " = " + p.default_value;
      w += i + 1 < top.parameters.size() ? ",\n" : "\n";
    }
    w += ")";
  }
  w += " (\n";
  for (std::size_t i = 0; i < top.ports.size(); ++i) {
    w += "    " + top.ports[i].declaration(false);
    w += i + 1 < top.ports.size() ? ",\n" : "\n";
  }
  w += ");\n    " + top.name;
  if (!top.parameters.empty()) {
    w += " #(";
    for (std::size_t i = 0; i < top.parameters.size(); ++i) {
      if (i) w += ", ";
      w += "." + top.parameters[i].name + "(" + top.parameters[i].name + ")";
    }
    w += ")";
  }
  w += " u_dut (\n";
  for (std::size_t i = 0; i < top.ports.size(); ++i) {
    const auto& n = top.ports[i].name;
    w += "        ." + n + "(" + n + ")";
    w += i + 1 < top.ports.size() ? ",\n" : "\n";
  }
  w += "    );\nendmodule\n";
  std::string out(module_source);
  if (!out.empty() && out.back() != '\n') out += '\n';
  return out + w;
}

}  // namespace rtlforge::agents
