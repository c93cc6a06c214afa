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
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rtlforge {

enum class Category {
  kCombinational,
  kSequential,
  kFsm,
  kMemory,
  kBus,
  kProcessor,
  kUnknown,
};

inline constexpr int kNumKnownCategories = 6;

std::string_view category_name(Category c);
/// Accepts the lower-case names produced by category_name.
std::optional<Category> parse_category(std::string_view s);

/// A named natural-language hardware specification.
struct Spec {
  std::string name;
  std::string description;
  Category category = Category::kUnknown;
  std::optional<std::string> context_rtl;
  std::optional<std::string> interface_header;

  /// Throws ParseError when name or description is empty.
  void validate() const;
};

Spec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const Spec& s);

/// Loads a spec from a `.json` file, or from plain text whose first line is
/// the name and whose remaining lines form the description.
Spec load_spec(const std::string& path);
Spec parse_spec_text(std::string_view content, bool as_json);

/// Maps canonical component keywords to the aliases that count as a hit.
class ComponentDictionary {
 public:
  /// The shipped dictionary (data/components.json).
  static const ComponentDictionary& builtin();
  static ComponentDictionary from_json(const nlohmann::json& j);

  /// Distinct canonical keywords present in `text`.
  std::set<std::string> match(std::string_view text) const;
  const std::map<std::string, std::vector<std::string>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

enum class Tier { kSymbolic, kWaveformSpecialist, kGeneral };
std::string_view tier_name(Tier t);

struct RoutingDecision {
  Tier tier = Tier::kGeneral;
  bool hierarchical = false;
  std::set<std::string> matched_component_keywords;
  std::set<std::string> matched_trigger_keywords;

  bool operator==(const RoutingDecision&) const = default;
};

inline constexpr int kHierarchicalComponentThreshold = 3;

const std::vector<std::string>& symbolic_keywords();
const std::vector<std::string>& waveform_keywords();

bool detect_symbolic(const Spec& spec);
bool detect_waveform(const Spec& spec);
std::set<std::string> count_components(
    const Spec& spec,
    const ComponentDictionary& dict = ComponentDictionary::builtin());

/// Symbolic > WaveformSpecialist > General; hierarchical when at least three
/// component keywords match and the tier is not symbolic.
RoutingDecision route(
    const Spec& spec,
    const ComponentDictionary& dict = ComponentDictionary::builtin());

/// Keyword heuristic over the description; kUnknown when nothing matches.
Category infer_category(std::string_view description);
/// spec.category when known, otherwise infer_category(description).
Category effective_category(const Spec& spec);

}  // namespace rtlforge
