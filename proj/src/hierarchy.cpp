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

#include <algorithm>
#include <exception>
#include <functional>
#include <map>
#include <set>

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"
#include "rtlforge/verilog.hpp"

namespace rtlforge::hier {

using nlohmann::json;

namespace {

size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<size_t> row(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t diag = row[0];
    row[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

[[noreturn]] void malformed(const std::string& what) { throw DecompositionMalformed(what); }

PortSpec port_from_json(const json& j, const std::string& module) {
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
    malformed("sub-module '" + module + "': interface entry without a name");
  PortSpec p;
  p.name = j["name"].get<std::string>();
  if (!text::is_identifier(p.name))
    malformed("sub-module '" + module + "': port '" + p.name + "' is not an identifier");
  p.dir = text::to_lower(j.value("dir", j.value("direction", std::string("input"))));
  if (p.dir != "input" && p.dir != "output" && p.dir != "inout")
    malformed("sub-module '" + module + "': port '" + p.name + "' has direction '" + p.dir + "'");
  if (j.contains("width")) {
    if (!j["width"].is_number_integer() || j["width"].get<int>() < 1)
      malformed("sub-module '" + module + "': port '" + p.name + "' needs a positive width");
    p.width = j["width"].get<int>();
  }
  return p;
}

SubmoduleSpec sub_from_json(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
    malformed("sub-module entry without a name");
  SubmoduleSpec s;
  s.name = j["name"].get<std::string>();
  if (!text::is_identifier(s.name)) malformed("sub-module name '" + s.name + "' is not an identifier");
  if (j.contains("description")) {
    if (!j["description"].is_string()) malformed("sub-module '" + s.name + "': description must be text");
    s.description = j["description"].get<std::string>();
  }
  if (j.contains("interface")) {
    if (!j["interface"].is_array()) malformed("sub-module '" + s.name + "': interface must be a list");
    std::set<std::string> seen;
    for (const auto& p : j["interface"]) {
      s.interface.push_back(port_from_json(p, s.name));
      if (!seen.insert(s.interface.back().name).second)
        malformed("sub-module '" + s.name + "': duplicate port '" + s.interface.back().name + "'");
    }
  }
  if (j.contains("dependencies")) {
    if (!j["dependencies"].is_array()) malformed("sub-module '" + s.name + "': dependencies must be a list");
    for (const auto& d : j["dependencies"]) {
      if (!d.is_string()) malformed("sub-module '" + s.name + "': dependency is not a name");
      const auto name = d.get<std::string>();
      if (std::find(s.dependencies.begin(), s.dependencies.end(), name) == s.dependencies.end())
        s.dependencies.push_back(name);
    }
  }
  return s;
}

std::string fenced_body(std::string_view s, size_t open, size_t* next) {
  const size_t line_end = s.find('\n', open);
  if (line_end == std::string_view::npos) {
    *next = std::string_view::npos;
    return {};
  }
  const size_t close = s.find("```", line_end);
  *next = close == std::string_view::npos ? close : close + 3;
  return std::string(s.substr(line_end + 1, (close == std::string_view::npos ? s.size() : close) - line_end - 1));
}

std::optional<json> try_object(std::string_view s) {
  auto j = json::parse(s.begin(), s.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::string rebuilt_header(const verilog::ModuleInfo& info) {
  std::string out = "module " + info.name;
  if (!info.parameters.empty()) {
    out += " #(\n";
    for (size_t i = 0; i < info.parameters.size(); ++i) {
      const auto& p = info.parameters[i];
      out += "  parameter " + p.name;
      if (!p.default_value.empty()) out += " = " + p.default_value;
      out += i + 1 < info.parameters.size() ? ",\n" : "\n";
    }
    out += ")";
  }
  if (!info.ports.empty()) {
    out += " (\n";
    for (size_t i = 0; i < info.ports.size(); ++i)
      out += "  " + info.ports[i].declaration() + (i + 1 < info.ports.size() ? ",\n" : "\n");
    out += ")";
  }
  return out + ";";
}

std::set<std::string> defined_modules(std::string_view src) {
  std::set<std::string> out;
  for (const auto& s : verilog::find_modules(src)) out.insert(s.name);
  return out;
}

class CountingBackend : public agents::Backend {
 public:
  explicit CountingBackend(agents::Backend& inner) : inner_(inner) {}
  agents::CompletionResult complete(const agents::CompletionRequest& r) override {
    ++calls;
    return inner_.complete(r);
  }
  std::string name() const override { return inner_.name(); }
  int calls = 0;

 private:
  agents::Backend& inner_;
};

json errors_json(const std::vector<validation::CategorizedError>& errors) {
  json a = json::array();
  for (const auto& e : errors) {
    json o = {{"category", validation::category_name(e.category)}, {"message", e.message}};
    if (e.line) o["line"] = *e.line;
    a.push_back(std::move(o));
  }
  return a;
}

}  // namespace

const SubmoduleSpec* DecompositionPlan::find(std::string_view name) const {
  for (const auto& s : submodules)
    if (s.name == name) return &s;
  return nullptr;
}

json plan_to_json(const DecompositionPlan& plan) {
  json subs = json::array();
  for (const auto& s : plan.submodules) {
    json iface = json::array();
    for (const auto& p : s.interface) iface.push_back({{"name", p.name}, {"dir", p.dir}, {"width", p.width}});
    subs.push_back({{"name", s.name},
                    {"description", s.description},
                    {"interface", iface},
                    {"dependencies", s.dependencies}});
  }
  return {{"submodules", subs}, {"top", plan.top}};
}

DecompositionPlan plan_from_json(const json& j, std::string_view spec_name) {
  if (!j.is_object()) malformed("decomposition is not a JSON object");
  if (!j.contains("submodules") || !j["submodules"].is_array())
    malformed("decomposition has no submodules list");
  DecompositionPlan plan;
  std::set<std::string> names;
  for (const auto& e : j["submodules"]) {
    plan.submodules.push_back(sub_from_json(e));
    if (!names.insert(plan.submodules.back().name).second)
      malformed("duplicate sub-module '" + plan.submodules.back().name + "'");
  }
  const int n = static_cast<int>(plan.submodules.size());
  if (n < kMinSubmodules || n > kMaxSubmodules)
    malformed("decomposition has " + std::to_string(n) + " sub-modules; expected " +
              std::to_string(kMinSubmodules) + " to " + std::to_string(kMaxSubmodules));
  for (const auto& s : plan.submodules)
    for (const auto& d : s.dependencies)
      if (!names.count(d)) malformed("sub-module '" + s.name + "' depends on unknown '" + d + "'");

  if (auto cycle = find_cycle(plan); !cycle.empty()) throw CycleError(std::move(cycle));

  if (j.contains("top") && j["top"].is_string() && !j["top"].get<std::string>().empty()) {
    plan.top = j["top"].get<std::string>();
    if (!names.count(plan.top)) malformed("top '" + plan.top + "' is not a sub-module");
    return plan;
  }
  std::set<std::string> used;
  for (const auto& s : plan.submodules) used.insert(s.dependencies.begin(), s.dependencies.end());
  size_t best = std::string::npos;
  for (const auto& s : plan.submodules) {
    if (used.count(s.name)) continue;
    const size_t d = levenshtein(text::to_lower(s.name), text::to_lower(spec_name));
    if (plan.top.empty() || d < best) {
      plan.top = s.name;
      best = d;
    }
  }
  return plan;
}

std::vector<std::string> find_cycle(const DecompositionPlan& plan) {
  std::map<std::string, int> color;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::vector<std::string> found;
  std::function<bool(const SubmoduleSpec&)> visit = [&](const SubmoduleSpec& s) {
    color[s.name] = 1;
    stack.push_back(s.name);
    for (const auto& d : s.dependencies) {
      const auto* dep = plan.find(d);
      if (!dep) continue;
      if (color[d] == 1) {
        auto it = std::find(stack.begin(), stack.end(), d);
        found.assign(it, stack.end());
        found.push_back(d);
        return true;
      }
      if (color[d] == 0 && visit(*dep)) return true;
    }
    stack.pop_back();
    color[s.name] = 2;
    return false;
  };
  for (const auto& s : plan.submodules)
    if (color[s.name] == 0 && visit(s)) return found;
  return {};
}

std::vector<std::string> topo_order(const DecompositionPlan& plan) {
  std::map<std::string, int> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& s : plan.submodules) {
    pending[s.name] += 0;
    for (const auto& d : s.dependencies) {
      if (!plan.find(d)) continue;
      ++pending[s.name];
      dependents[d].push_back(s.name);
    }
  }
  std::set<std::string> ready;
  for (const auto& [name, n] : pending)
    if (n == 0) ready.insert(name);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto it = ready.begin();
    if (*it == plan.top && ready.size() > 1) ++it;
    const std::string next = *it;
    ready.erase(it);
    order.push_back(next);
    for (const auto& up : dependents[next])
      if (--pending[up] == 0) ready.insert(up);
  }
  if (order.size() != plan.submodules.size()) throw CycleError(find_cycle(plan));
  return order;
}

std::string interface_header(const SubmoduleSpec& sub) {
  if (sub.interface.empty()) return "module " + sub.name + ";";
  std::string out = "module " + sub.name + " (\n";
  for (size_t i = 0; i < sub.interface.size(); ++i) {
    const auto& p = sub.interface[i];
    out += "  " + p.dir;
    if (p.width > 1) out += " [" + std::to_string(p.width - 1) + ":0]";
    out += " " + p.name + (i + 1 < sub.interface.size() ? ",\n" : "\n");
  }
  return out + ");";
}

agents::CompletionRequest decompose_request(const Spec& spec, const DecomposeOptions& opts,
                                            std::string_view problem) {
  agents::CompletionRequest r;
  r.model = opts.model;
  r.temperature = opts.temperature;
  r.max_tokens = opts.max_tokens;
  r.system_prompt =
      "You are a hardware architect. Partition a design into sub-modules and reply with one "
      "JSON object and nothing else.";
  r.user_prompt =
      "=== DESIGN ===\n" + spec.name + "\n" + spec.description +
      "\n=== FORMAT ===\n"
      "{\"submodules\": [{\"name\": \"<identifier>\", \"description\": \"<behaviour>\",\n"
      "  \"interface\": [{\"name\": \"<port>\", \"dir\": \"input|output|inout\", \"width\": <bits>}],\n"
      "  \"dependencies\": [\"<sub-modules it instantiates>\"]}],\n"
      " \"top\": \"<name of the top sub-module>\"}\n"
      "=== RULES ===\n"
      "- Between " + std::to_string(kMinSubmodules) + " and " + std::to_string(kMaxSubmodules) +
      " sub-modules with distinct Verilog identifiers.\n"
      "- Dependencies name other sub-modules only and must not form a cycle.\n"
      "- The top sub-module instantiates the others, directly or indirectly.\n";
  if (!problem.empty())
    r.user_prompt += "=== PROBLEM ===\nThe previous plan was rejected: " + std::string(problem) +
                     "\nReturn a corrected plan.\n";
  return r;
}

json extract_json(std::string_view response) {
  size_t pos = 0;
  while ((pos = response.find("```", pos)) != std::string_view::npos) {
    size_t next = 0;
    const auto body = fenced_body(response, pos, &next);
    if (auto j = try_object(text::trim(body))) return *j;
    if (next == std::string_view::npos) break;
    pos = next;
  }
  const size_t open = response.find('{');
  const size_t close = response.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open)
    if (auto j = try_object(response.substr(open, close - open + 1))) return *j;
  malformed("response holds no JSON object");
}

DecompositionPlan decompose(const Spec& spec, agents::Backend& backend, const DecomposeOptions& opts) {
  std::string problem;
  std::exception_ptr last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto result = backend.complete(decompose_request(spec, opts, problem));
    try {
      return plan_from_json(extract_json(result.text), spec.name);
    } catch (const CycleError& e) {
      problem = e.what();
      last = std::current_exception();
    } catch (const DecompositionMalformed& e) {
      problem = e.what();
      last = std::current_exception();
    }
  }
  try {
    std::rethrow_exception(last);
  } catch (const CycleError&) {
    throw;
  } catch (const DecompositionMalformed& e) {
    malformed(std::string("decomposition rejected after retry: ") + e.what());
  }
}

std::string extract_header(std::string_view module_source) {
  const auto spans = verilog::find_modules(module_source);
  if (spans.empty()) throw VerilogParseFailure("no module definition found");
  std::string out;
  for (const auto& span : spans) {
    const auto info = verilog::parse_module(module_source, span);
    bool verbatim = info.ansi;
    for (const auto& p : info.parameters)
      if (!verilog::uses_word(info.header_text, p.name)) verbatim = false;
    out += verbatim ? info.header_text : rebuilt_header(info);
    out += "\nendmodule\n";
  }
  return out;
}

std::string dedupe_modules(std::string_view src) {
  const auto spans = verilog::find_modules(src);
  std::map<std::string, size_t> keep;
  for (size_t i = 0; i < spans.size(); ++i) {
    auto it = keep.find(spans[i].name);
    if (it == keep.end())
      keep[spans[i].name] = i;
    else if (!spans[it->second].has_body && spans[i].has_body)
      it->second = i;
  }
  if (keep.size() == spans.size()) return std::string(src);
  std::string out;
  size_t cursor = 0;
  for (size_t i = 0; i < spans.size(); ++i) {
    if (keep[spans[i].name] == i) continue;
    out.append(src.substr(cursor, spans[i].begin - cursor));
    cursor = spans[i].end;
    if (src.substr(cursor, 2) == "\r\n")
      cursor += 2;
    else if (cursor < src.size() && src[cursor] == '\n')
      ++cursor;
  }
  out.append(src.substr(cursor));
  return out;
}

json hierarchical_to_json(const HierarchicalResult& r) {
  json mods = json::array();
  for (const auto& m : r.modules)
    mods.push_back({{"name", m.name},
                    {"lint_passed", m.lint_passed},
                    {"iterations", m.iterations},
                    {"loc", m.loc},
                    {"tokens_in", m.tokens_in},
                    {"tokens_out", m.tokens_out},
                    {"errors", errors_json(m.errors)}});
  return {{"plan", plan_to_json(r.plan)},
          {"order", r.order},
          {"modules", mods},
          {"combined_lint", {{"passed", r.combined_lint.passed}, {"errors", errors_json(r.combined_lint.errors)}}},
          {"passed", r.passed},
          {"backend_calls", r.backend_calls}};
}

HierarchicalResult generate_hierarchical(const Spec& spec, agents::Backend& backend,
                                         validation::Validator& validator,
                                         const HierarchyOptions& opts, const DecompositionPlan* plan) {
  const auto emit = [&](std::string_view kind, const std::string& msg) {
    if (opts.on_event) opts.on_event(kind, msg);
  };
  const auto& profiles = opts.profiles ? *opts.profiles : agents::AgentProfiles::builtin();
  const int max_iter = std::max(1, opts.max_iterations);
  CountingBackend counted(backend);

  HierarchicalResult r;
  r.plan = plan ? *plan : decompose(spec, counted, opts.decompose);
  r.order = topo_order(r.plan);
  emit("plan", std::to_string(r.order.size()) + " sub-modules, order " + text::join(r.order, ", ") +
                   ", top " + r.plan.top);

  std::vector<std::string> headers;  // one entry per finished sub-module
  for (const auto& name : r.order) {
    const auto& sub = *r.plan.find(name);
    Spec s;
    s.name = sub.name;
    s.description = sub.description;
    if (!sub.dependencies.empty())
      s.description += "\nInstantiate these existing modules: " + text::join(sub.dependencies, ", ") + ".";
    s.description += "\nSystemVerilog constructs are allowed.";
    s.category = infer_category(sub.description);
    s.interface_header = interface_header(sub);
    if (!headers.empty()) s.context_rtl = text::join(headers, "\n");

    ModuleResult m;
    m.name = name;
    std::vector<agents::ErrorFeedback> feedback;
    for (int it = 0; it < max_iter; ++it) {
      const auto agent = it == 0 ? agents::AgentName::kGenius : agents::AgentName::kDebug;
      emit("module", name + ": iteration " + std::to_string(it + 1) + " (" +
                         std::string(agents::agent_name(agent)) + ")");
      const auto g = agents::generate(counted, profiles.get(agent), s, {}, feedback);
      m.iterations = it + 1;
      m.tokens_in += g.tokens_in;
      m.tokens_out += g.tokens_out;
      if (g.extraction_failed) {
        validation::CategorizedError e;
        e.category = validation::ErrorCategory::kSyntax;
        e.message = "response contained no Verilog module";
        m.errors = {e};
        feedback = {agents::ErrorFeedback{"Syntax", "lint", 0, "response contained no Verilog module", "", ""}};
        continue;
      }
      m.source = g.source;
      const auto own = defined_modules(m.source);
      std::vector<std::string> deps;
      for (const auto& h : headers) {
        const auto names = defined_modules(h);
        if (std::none_of(names.begin(), names.end(), [&](const auto& n) { return own.count(n) > 0; }))
          deps.push_back(h);
      }
      auto lint = validator.lint(m.source, deps, validation::LintMode::kSystemVerilog);
      m.errors = lint.errors;
      emit("lint", name + (lint.passed ? ": lint passed" : ": lint failed with " +
                                                             std::to_string(lint.errors.size()) + " errors"));
      if (lint.passed) {
        m.lint_passed = true;
        break;
      }
      validation::ValidationReport rep;
      rep.errors = lint.errors;
      feedback = validation::to_feedback(rep, s.category);
    }
    m.loc = verilog::count_code_lines(m.source);

    std::string header;
    try {
      if (!m.source.empty()) header = extract_header(m.source);
    } catch (const VerilogParseFailure&) {
    }
    // stubs for modules an earlier header already declares are dropped
    std::set<std::string> known;
    for (const auto& h : headers)
      for (const auto& n : defined_modules(h)) known.insert(n);
    std::string fresh;
    for (const auto& span : verilog::find_modules(header))
      if (!known.count(span.name)) fresh += header.substr(span.begin, span.end - span.begin) + "\n";
    headers.push_back(fresh.empty() ? interface_header(sub) + "\nendmodule\n" : fresh);
    r.modules.push_back(std::move(m));
  }

  std::string combined;
  for (const auto& m : r.modules) {
    if (m.source.empty()) continue;
    if (!combined.empty()) combined += "\n";
    combined += m.source;
    if (combined.back() != '\n') combined += '\n';
  }
  r.combined_source = dedupe_modules(combined);
  r.combined_lint = validator.lint(r.combined_source, {}, validation::LintMode::kSystemVerilog);
  r.passed = r.combined_lint.passed &&
             std::all_of(r.modules.begin(), r.modules.end(), [](const auto& m) { return m.lint_passed; });
  r.backend_calls = counted.calls;
  emit("combined", r.combined_lint.passed ? "combined lint passed"
                                          : "combined lint failed with " +
                                                std::to_string(r.combined_lint.errors.size()) + " errors");
  return r;
}

}  // namespace rtlforge::hier
