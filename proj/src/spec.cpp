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
#include "rtlforge/spec.hpp"

#include <array>
#include <utility>

#include "rtlforge/data.hpp"
#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Category, std::string_view>, 7> kCategoryNames = {{
    {Category::kCombinational, "combinational"},
    {Category::kSequential, "sequential"},
    {Category::kFsm, "fsm"},
    {Category::kMemory, "memory"},
    {Category::kBus, "bus"},
    {Category::kProcessor, "processor"},
    {Category::kUnknown, "unknown"},
}};

// Checked in order; the first category with any hit wins.
const std::vector<std::pair<Category, std::vector<std::string>>>& category_rules() {
  static const std::vector<std::pair<Category, std::vector<std::string>>> rules = {
      {Category::kFsm,
       {"state machine", "fsm", "state transition", "moore", "mealy",
        "next state", "next-state"}},
      {Category::kMemory,
       {"ram", "rom", "memory", "fifo", "register file", "regfile", "sram",
        "cache", "lifo"}},
      {Category::kProcessor,
       {"cpu", "processor", "risc-v", "riscv", "alu", "pipeline",
        "instruction", "soc"}},
      {Category::kBus,
       {"apb", "axi", "ahb", "wishbone", "bus", "uart", "spi", "i2c",
        "handshake", "arbiter", "interconnect"}},
      {Category::kSequential,
       {"clock", "clk", "register", "counter", "flip-flop", "flip flop",
        "shift register", "posedge", "negedge", "latch", "synchronous",
        "dff", "sequential"}},
      {Category::kCombinational,
       {"mux", "multiplexer", "adder", "decoder", "encoder", "combinational",
        "gate", "truth table", "k-map", "karnaugh map", "comparator",
        "parity", "xor", "boolean"}},
  };
  return rules;
}

}  // namespace

std::string_view category_name(Category c) {
  for (const auto& [cat, name] : kCategoryNames)
    if (cat == c) return name;
  return "unknown";
}

std::optional<Category> parse_category(std::string_view s) {
  const std::string lower = text::to_lower(s);
  for (const auto& [cat, name] : kCategoryNames)
    if (name == lower) return cat;
  return std::nullopt;
}

void Spec::validate() const {
  if (text::trim(name).empty()) throw ParseError("spec name is empty");
  if (text::trim(description).empty())
    throw ParseError("spec description is empty");
}

Spec spec_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("spec JSON must be an object");
  Spec s;
  if (!j.contains("name") || !j["name"].is_string())
    throw ParseError("spec JSON requires a string \"name\"");
  if (!j.contains("description") || !j["description"].is_string())
    throw ParseError("spec JSON requires a string \"description\"");
  s.name = j["name"].get<std::string>();
  s.description = j["description"].get<std::string>();
  if (j.contains("category") && !j["category"].is_null()) {
    auto cat = parse_category(j["category"].get<std::string>());
    if (!cat) throw ParseError("unknown category", j["category"].get<std::string>());
    s.category = *cat;
  }
  if (j.contains("context_rtl") && j["context_rtl"].is_string())
    s.context_rtl = j["context_rtl"].get<std::string>();
  if (j.contains("interface_header") && j["interface_header"].is_string())
    s.interface_header = j["interface_header"].get<std::string>();
  s.validate();
  return s;
}

json spec_to_json(const Spec& s) {
  json j = {{"name", s.name}, {"description", s.description}};
  if (s.category != Category::kUnknown)
    j["category"] = std::string(category_name(s.category));
  if (s.context_rtl) j["context_rtl"] = *s.context_rtl;
  if (s.interface_header) j["interface_header"] = *s.interface_header;
  return j;
}

Spec parse_spec_text(std::string_view content, bool as_json) {
  if (as_json) {
    json j;
    try {
      j = json::parse(content);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid spec JSON: ") + e.what());
    }
    return spec_from_json(j);
  }
  Spec s;
  const size_t nl = content.find('\n');
  s.name = std::string(text::trim(content.substr(0, nl)));
  if (nl != std::string_view::npos)
    s.description = std::string(text::trim(content.substr(nl + 1)));
  s.validate();
  return s;
}

Spec load_spec(const std::string& path) {
  const std::string content = text::read_file(path);
  const bool as_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return parse_spec_text(content, as_json);
}

const ComponentDictionary& ComponentDictionary::builtin() {
  static const ComponentDictionary dict =
      from_json(json::parse(data::builtin("components.json")));
  return dict;
}

ComponentDictionary ComponentDictionary::from_json(const json& j) {
  ComponentDictionary d;
  const json& comps = j.contains("components") ? j["components"] : j;
  if (!comps.is_object())
    throw ConfigError("component dictionary must map keyword -> aliases");
  for (const auto& [key, aliases] : comps.items()) {
    std::vector<std::string> list;
    list.push_back(text::to_lower(key));
    for (const auto& a : aliases) {
      std::string alias = text::to_lower(a.get<std::string>());
      if (alias != list.front()) list.push_back(std::move(alias));
    }
    d.entries_[text::to_lower(key)] = std::move(list);
  }
  return d;
}

std::set<std::string> ComponentDictionary::match(std::string_view text_in) const {
  std::set<std::string> hits;
  for (const auto& [key, aliases] : entries_) {
    for (const auto& alias : aliases) {
      if (text::contains_keyword(text_in, alias)) {
        hits.insert(key);
        break;
      }
    }
  }
  return hits;
}

std::string_view tier_name(Tier t) {
  switch (t) {
    case Tier::kSymbolic: return "Symbolic";
    case Tier::kWaveformSpecialist: return "WaveformSpecialist";
    case Tier::kGeneral: return "General";
  }
  return "General";
}

const std::vector<std::string>& symbolic_keywords() {
  static const std::vector<std::string> kw = {"karnaugh map", "k-map",
                                              "truth table"};
  return kw;
}

const std::vector<std::string>& waveform_keywords() {
  static const std::vector<std::string> kw = {
      "waveform", "timing diagram", "determine what the circuit does"};
  return kw;
}

namespace {

std::set<std::string> matched(std::string_view description,
                              const std::vector<std::string>& keywords) {
  std::set<std::string> hits;
  for (const auto& k : keywords)
    if (text::contains_keyword(description, k)) hits.insert(k);
  return hits;
}

}  // namespace

bool detect_symbolic(const Spec& spec) {
  return !matched(spec.description, symbolic_keywords()).empty();
}

bool detect_waveform(const Spec& spec) {
  return !matched(spec.description, waveform_keywords()).empty();
}

std::set<std::string> count_components(const Spec& spec,
                                       const ComponentDictionary& dict) {
  return dict.match(spec.description);
}

RoutingDecision route(const Spec& spec, const ComponentDictionary& dict) {
  RoutingDecision d;
  d.matched_component_keywords = count_components(spec, dict);
  auto symbolic = matched(spec.description, symbolic_keywords());
  auto waveform = matched(spec.description, waveform_keywords());
  if (!symbolic.empty()) {
    d.tier = Tier::kSymbolic;
    d.matched_trigger_keywords = std::move(symbolic);
  } else if (!waveform.empty()) {
    d.tier = Tier::kWaveformSpecialist;
    d.matched_trigger_keywords = std::move(waveform);
  } else {
    d.tier = Tier::kGeneral;
  }
  d.hierarchical = d.tier != Tier::kSymbolic &&
                   static_cast<int>(d.matched_component_keywords.size()) >=
                       kHierarchicalComponentThreshold;
  return d;
}

Category infer_category(std::string_view description) {
  for (const auto& [cat, keys] : category_rules())
    for (const auto& k : keys)
      if (text::contains_keyword(description, k)) return cat;
  return Category::kUnknown;
}

Category effective_category(const Spec& spec) {
  return spec.category != Category::kUnknown ? spec.category
                                             : infer_category(spec.description);
}

}  // namespace rtlforge
