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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rtlforge::kb {

enum class EntryCategory { kPattern, kArchitecture, kOptimization };
std::string_view entry_category_name(EntryCategory c);

struct KnowledgeEntry {
  std::string id;
  std::string title;
  std::string description;
  std::vector<std::string> keywords;  // lower-cased, distinct
  std::optional<std::string> template_code;
  EntryCategory category = EntryCategory::kPattern;

  void validate() const;
};

KnowledgeEntry entry_from_json(const nlohmann::json& j);
nlohmann::json entry_to_json(const KnowledgeEntry& e);

enum class Focus {
  kComprehensive,
  kPatternFocused,
  kErrorFocused,
  kSynthesisFocused,
  kArchitectureFocused,
};
inline constexpr int kNumFocus = 5;
std::string_view focus_name(Focus f);

inline constexpr int kMinK = 3;
inline constexpr int kMaxK = 20;
inline constexpr double kFocusBoost = 1.5;

struct RetrievalQuery {
  std::string spec_text;
  std::optional<std::string> error_context;
  Focus focus = Focus::kComprehensive;
  int k = 5;

  /// Throws ConfigError when k is outside [3, 20].
  void validate() const;
};

struct PortRecord {
  std::string name;
  std::string direction;
  int width = 1;
};

struct ReferenceModule {
  std::string id;  // relative path without extension
  std::string name;
  std::vector<PortRecord> ports;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::string synopsis;
  std::string domain;
  std::string source_attribution;
  std::string body_path;  // relative to the library root
  std::string body;
};

/// The fourteen reference-library domains.
const std::vector<std::string>& reference_domains();

class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  explicit KnowledgeBase(std::vector<KnowledgeEntry> entries);

  /// The shipped seed corpus (data/kb_seed.json).
  static const KnowledgeBase& builtin();
  static KnowledgeBase from_json(const nlohmann::json& j);
  /// Empty path loads the builtin corpus.
  static KnowledgeBase load(const std::string& path);

  const std::vector<KnowledgeEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<KnowledgeEntry> entries_;
};

/// 0.4 title + 0.2 description + 0.3 keyword + 0.1 template; in [0, 1].
/// Title and description terms are the fraction of the query's content
/// words found in the field; the keyword term is the fraction of the
/// entry's keywords present in the query text.
double score_entry(const KnowledgeEntry& entry, const RetrievalQuery& query);

struct ScoredEntry {
  KnowledgeEntry entry;
  double score = 0.0;
  bool from_reference = false;
};

/// Ranked by (score desc, id asc), truncated to query.k. Entries with a
/// zero score are never returned. Throws EmptyKnowledgeBase.
std::vector<ScoredEntry> retrieve(const KnowledgeBase& kb,
                                  std::span<const ReferenceModule> library,
                                  const RetrievalQuery& query);

/// Reference modules take part in Comprehensive retrieval as pattern entries.
KnowledgeEntry reference_entry(const ReferenceModule& m);

std::string format_context(std::span<const ScoredEntry> entries);

struct IndexOptions {
  std::size_t max_lines = 2000;
  /// Returns an error message when the file fails lint; unset skips lint.
  std::function<std::optional<std::string>(const std::string& rel_path,
                                           const std::string& body)>
      lint;
};

struct Rejection {
  std::string path;
  std::string reason;  // "lint", "size", "parse" or "io"
  std::string detail;
};

struct IndexResult {
  std::vector<ReferenceModule> modules;
  std::vector<Rejection> rejected;
};

/// Indexes every .v/.sv file below `source_dir` in path order. Attribution
/// and domain come from an optional attribution.json at the root.
IndexResult index_reference_library(const std::string& source_dir,
                                    const IndexOptions& opts = {});

/// JSON-lines, one module per line; bodies are referenced by body_path.
std::string index_to_jsonl(std::span<const ReferenceModule> modules);
/// Reads the index and loads each body from `library_root`.
std::vector<ReferenceModule> load_index(const std::string& jsonl_path,
                                        const std::string& library_root);

}  // namespace rtlforge::kb
