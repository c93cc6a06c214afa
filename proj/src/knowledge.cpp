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
#include "rtlforge/knowledge.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <unordered_set>

#include "rtlforge/data.hpp"
#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"
#include "rtlforge/verilog.hpp"

namespace rtlforge::kb {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<EntryCategory, std::string_view> kCategoryNames[] = {
    {EntryCategory::kPattern, "pattern"},
    {EntryCategory::kArchitecture, "architecture"},
    {EntryCategory::kOptimization, "optimization"},
};

constexpr std::string_view kFocusNames[] = {
    "Comprehensive", "PatternFocused", "ErrorFocused", "SynthesisFocused",
    "ArchitectureFocused"};

double overlap(const std::vector<std::string>& terms, std::string_view field) {
  if (terms.empty()) return 0.0;
  const auto w = text::words(field);
  const std::unordered_set<std::string> present(w.begin(), w.end());
  int hit = 0;
  for (const auto& t : terms) hit += present.count(t) ? 1 : 0;
  return std::clamp(static_cast<double>(hit) / static_cast<double>(terms.size()), 0.0, 1.0);
}

std::string query_text(const RetrievalQuery& q) {
  if (q.focus == Focus::kErrorFocused && q.error_context && !q.error_context->empty())
    return q.spec_text + "\n" + *q.error_context;
  return q.spec_text;
}

double score_text(const KnowledgeEntry& e, std::string_view qtext) {
  const auto terms = text::content_terms(qtext);
  const double title = overlap(terms, e.title);
  const double desc = overlap(terms, e.description);
  double kw = 0.0;
  if (!e.keywords.empty()) {
    int hit = 0;
    for (const auto& k : e.keywords) hit += text::contains_keyword(qtext, k) ? 1 : 0;
    kw = static_cast<double>(hit) / static_cast<double>(e.keywords.size());
  }
  const bool any = title > 0.0 || desc > 0.0 || kw > 0.0;
  const double tmpl = (e.template_code && !e.template_code->empty() && any) ? 1.0 : 0.0;
  return (4.0 * title + 2.0 * desc + 3.0 * kw + tmpl) / 10.0;
}

std::string infer_domain(std::string_view hay) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> rules = {
      {"Arbitration", {"arbiter", "arb", "round robin", "grant"}},
      {"Error correction", {"ecc", "hamming", "secded", "bch", "reed"}},
      {"Cryptographic cores", {"aes", "sha", "des", "crypto", "cipher", "md5"}},
      {"SerDes / line coding", {"8b10b", "serdes", "serializer", "deserializer", "manchester", "lfsr"}},
      {"Clock and reset", {"clk", "clock", "reset", "synchronizer", "cdc", "pll"}},
      {"Protocol bridges", {"axi", "apb", "ahb", "wishbone", "bridge", "avalon"}},
      {"Network / packet", {"eth", "ethernet", "packet", "udp", "mac", "frame"}},
      {"Peripheral controllers", {"uart", "spi", "i2c", "gpio", "timer", "pwm"}},
      {"Flow control", {"fifo", "skid", "credit", "handshake", "queue"}},
      {"Memory", {"ram", "rom", "sram", "memory", "mem", "cache"}},
      {"DSP", {"fir", "iir", "fft", "dsp", "filter", "cordic", "mac"}},
      {"CPU building blocks", {"alu", "regfile", "decoder", "cpu", "core", "pipeline", "branch"}},
      {"System infrastructure", {"interconnect", "crossbar", "interrupt", "dma", "bus"}},
  };
  std::string spaced;
  for (char c : hay) spaced.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : ' ');
  for (const auto& [domain, keys] : rules)
    for (const auto& k : keys)
      if (text::contains_keyword(spaced, k)) return domain;
  return "Datapath";
}

std::string leading_comment(std::string_view src) {
  std::string out;
  for (const auto& raw : text::split_lines(src)) {
    std::string_view l = text::trim(raw);
    if (l.empty()) {
      if (!out.empty()) break;
      continue;
    }
    if (l.substr(0, 2) == "//") l.remove_prefix(2);
    else if (l.substr(0, 2) == "/*") l.remove_prefix(2);
    else if (l.front() == '*') l.remove_prefix(1);
    else break;
    if (l.size() >= 2 && l.substr(l.size() - 2) == "*/") l.remove_suffix(2);
    l = text::trim(l);
    if (l.empty()) continue;
    if (!out.empty()) out += ' ';
    out += l;
  }
  if (out.size() > 200) out = out.substr(0, 197) + "...";
  return out;
}

std::string direction_text(verilog::Direction d) {
  return std::string(verilog::direction_name(d));
}

json module_to_json(const ReferenceModule& m) {
  json ports = json::array();
  for (const auto& p : m.ports)
    ports.push_back({{"name", p.name}, {"dir", p.direction}, {"width", p.width}});
  json params = json::array();
  for (const auto& [n, d] : m.parameters) params.push_back({{"name", n}, {"default", d}});
  return {{"id", m.id},
          {"name", m.name},
          {"ports", ports},
          {"parameters", params},
          {"synopsis", m.synopsis},
          {"domain", m.domain},
          {"source_attribution", m.source_attribution},
          {"body_path", m.body_path}};
}

}  // namespace

std::string_view entry_category_name(EntryCategory c) {
  for (const auto& [cat, name] : kCategoryNames)
    if (cat == c) return name;
  return "pattern";
}

std::string_view focus_name(Focus f) { return kFocusNames[static_cast<int>(f)]; }

void KnowledgeEntry::validate() const {
  if (text::trim(id).empty()) throw ConfigError("knowledge entry without id");
  if (text::trim(title).empty()) throw ConfigError("knowledge entry " + id + " has no title");
  if (text::trim(description).empty())
    throw ConfigError("knowledge entry " + id + " has no description");
  std::set<std::string> seen;
  for (const auto& k : keywords) {
    if (k != text::to_lower(k))
      throw ConfigError("knowledge entry " + id + " keyword not lower-case: " + k);
    if (!seen.insert(k).second)
      throw ConfigError("knowledge entry " + id + " repeats keyword " + k);
  }
}

KnowledgeEntry entry_from_json(const json& j) {
  KnowledgeEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.title = j.at("title").get<std::string>();
    e.description = j.at("description").get<std::string>();
    std::set<std::string> seen;
    for (const auto& k : j.value("keywords", json::array())) {
      std::string kw = text::to_lower(k.get<std::string>());
      if (seen.insert(kw).second) e.keywords.push_back(std::move(kw));
    }
    if (j.contains("template") && j["template"].is_string())
      e.template_code = j["template"].get<std::string>();
    const std::string cat = j.value("category", "pattern");
    bool found = false;
    for (const auto& [c, name] : kCategoryNames)
      if (name == cat) {
        e.category = c;
        found = true;
      }
    if (!found) throw ConfigError("unknown knowledge category " + cat);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed knowledge entry: ") + ex.what());
  }
  e.validate();
  return e;
}

json entry_to_json(const KnowledgeEntry& e) {
  json j = {{"id", e.id},
            {"title", e.title},
            {"description", e.description},
            {"keywords", e.keywords},
            {"category", std::string(entry_category_name(e.category))}};
  if (e.template_code) j["template"] = *e.template_code;
  return j;
}

void RetrievalQuery::validate() const {
  if (k < kMinK || k > kMaxK)
    throw ConfigError("retrieval k must lie in [3, 20], got " + std::to_string(k));
}

const std::vector<std::string>& reference_domains() {
  static const std::vector<std::string> d = {
      "CPU building blocks", "Datapath",          "Protocol bridges",
      "Network / packet",    "Peripheral controllers", "DSP",
      "Flow control",        "Memory",            "Cryptographic cores",
      "System infrastructure", "Clock and reset", "SerDes / line coding",
      "Arbitration",         "Error correction"};
  return d;
}

KnowledgeBase::KnowledgeBase(std::vector<KnowledgeEntry> entries)
    : entries_(std::move(entries)) {
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    e.validate();
    if (!ids.insert(e.id).second) throw ConfigError("duplicate knowledge entry id " + e.id);
  }
}

const KnowledgeBase& KnowledgeBase::builtin() {
  static const KnowledgeBase kb = from_json(json::parse(data::builtin("kb_seed.json")));
  return kb;
}

KnowledgeBase KnowledgeBase::from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("knowledge base file must be a JSON array");
  std::vector<KnowledgeEntry> entries;
  for (const auto& e : j) entries.push_back(entry_from_json(e));
  return KnowledgeBase(std::move(entries));
}

KnowledgeBase KnowledgeBase::load(const std::string& path) {
  if (path.empty()) return builtin();
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid knowledge base JSON in " + path + ": " + e.what());
  }
}

double score_entry(const KnowledgeEntry& entry, const RetrievalQuery& query) {
  return score_text(entry, query_text(query));
}

KnowledgeEntry reference_entry(const ReferenceModule& m) {
  KnowledgeEntry e;
  e.id = "ref:" + m.id;
  e.title = m.name;
  e.description = m.synopsis.empty() ? m.name : m.synopsis;
  std::set<std::string> seen;
  for (const auto& w : text::words(m.name + " " + m.domain)) {
    if (w.size() >= 3 && seen.insert(w).second) e.keywords.push_back(w);
  }
  if (!m.body.empty()) e.template_code = m.body;
  e.category = EntryCategory::kPattern;
  return e;
}

std::vector<ScoredEntry> retrieve(const KnowledgeBase& kb,
                                  std::span<const ReferenceModule> library,
                                  const RetrievalQuery& query) {
  query.validate();
  if (kb.empty()) throw EmptyKnowledgeBase();
  const std::string qtext = query_text(query);
  std::vector<ScoredEntry> scored;
  for (const auto& e : kb.entries()) {
    if (query.focus == Focus::kPatternFocused && e.category != EntryCategory::kPattern)
      continue;
    double s = score_text(e, qtext);
    if ((query.focus == Focus::kSynthesisFocused && e.category == EntryCategory::kOptimization) ||
        (query.focus == Focus::kArchitectureFocused &&
         e.category == EntryCategory::kArchitecture))
      s *= kFocusBoost;
    if (s > 0.0) scored.push_back({e, s, false});
  }
  if (query.focus == Focus::kComprehensive) {
    for (const auto& m : library) {
      KnowledgeEntry e = reference_entry(m);
      const double s = score_text(e, qtext);
      if (s > 0.0) scored.push_back({std::move(e), s, true});
    }
  }
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry.id < b.entry.id;
  });
  if (scored.size() > static_cast<std::size_t>(query.k)) scored.resize(query.k);
  return scored;
}

std::string format_context(std::span<const ScoredEntry> entries) {
  std::ostringstream os;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i].entry;
    if (i) os << '\n';
    os << "### [" << (i + 1) << "] " << e.title << '\n' << e.description << '\n';
    if (e.template_code && !e.template_code->empty()) {
      os << "```verilog\n" << *e.template_code;
      if (e.template_code->back() != '\n') os << '\n';
      os << "```\n";
    }
  }
  return os.str();
}

IndexResult index_reference_library(const std::string& source_dir, const IndexOptions& opts) {
  IndexResult result;
  const fs::path root(source_dir);
  if (!fs::is_directory(root)) throw ConfigError("not a directory: " + source_dir);

  json attribution = json::object();
  const fs::path attr_path = root / "attribution.json";
  if (fs::exists(attr_path)) {
    try {
      attribution = json::parse(text::read_file(attr_path.string()));
    } catch (const json::parse_error& e) {
      throw ConfigError("invalid attribution.json: " + std::string(e.what()));
    }
  }
  const json defaults = attribution.value("default", json::object());
  const json per_file = attribution.value("files", json::object());

  std::vector<std::string> files;
  for (const auto& ent : fs::recursive_directory_iterator(root)) {
    if (!ent.is_regular_file()) continue;
    const auto ext = ent.path().extension().string();
    if (ext == ".v" || ext == ".sv")
      files.push_back(fs::relative(ent.path(), root).generic_string());
  }
  std::sort(files.begin(), files.end());

  for (const auto& rel : files) {
    std::string body;
    try {
      body = text::read_file((root / rel).string());
    } catch (const Error& e) {
      result.rejected.push_back({rel, "io", e.what()});
      continue;
    }
    const auto lines = static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n')) +
                       (!body.empty() && body.back() != '\n' ? 1 : 0);
    if (lines > opts.max_lines) {
      result.rejected.push_back({rel, "size", std::to_string(lines) + " lines"});
      continue;
    }
    if (opts.lint) {
      if (auto err = opts.lint(rel, body)) {
        result.rejected.push_back({rel, "lint", *err});
        continue;
      }
    }
    std::vector<verilog::ModuleInfo> mods;
    try {
      mods = verilog::parse_modules(body);
    } catch (const Error& e) {
      result.rejected.push_back({rel, "parse", e.what()});
      continue;
    }
    if (mods.empty()) {
      result.rejected.push_back({rel, "parse", "no module definition"});
      continue;
    }
    const auto& top = mods.front();
    ReferenceModule m;
    m.id = rel.substr(0, rel.rfind('.'));
    m.name = top.name;
    int nin = 0, nout = 0;
    for (const auto& p : top.ports) {
      m.ports.push_back({p.name, direction_text(p.direction), p.width});
      (p.direction == verilog::Direction::kInput ? nin : nout) += 1;
    }
    for (const auto& p : top.parameters) m.parameters.emplace_back(p.name, p.default_value);
    m.synopsis = leading_comment(body);
    if (m.synopsis.empty())
      m.synopsis = top.name + ": " + std::to_string(nin) + " inputs, " + std::to_string(nout) +
                   " outputs";
    const json meta = per_file.value(rel, json::object());
    m.source_attribution = meta.value("source", defaults.value("source", std::string()));
    m.domain = meta.value("domain", defaults.value("domain", std::string()));
    if (m.domain.empty()) m.domain = infer_domain(rel + " " + top.name);
    m.body_path = rel;
    m.body = std::move(body);
    result.modules.push_back(std::move(m));
  }
  return result;
}

std::string index_to_jsonl(std::span<const ReferenceModule> modules) {
  std::string out;
  for (const auto& m : modules) out += module_to_json(m).dump() + "\n";
  return out;
}

std::vector<ReferenceModule> load_index(const std::string& jsonl_path,
                                        const std::string& library_root) {
  std::vector<ReferenceModule> out;
  for (const auto& line : text::split_lines(text::read_file(jsonl_path))) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      ReferenceModule m;
      m.id = j.at("id").get<std::string>();
      m.name = j.at("name").get<std::string>();
      for (const auto& p : j.at("ports"))
        m.ports.push_back({p.at("name").get<std::string>(), p.at("dir").get<std::string>(),
                           p.at("width").get<int>()});
      for (const auto& p : j.at("parameters"))
        m.parameters.emplace_back(p.at("name").get<std::string>(),
                                  p.at("default").get<std::string>());
      m.synopsis = j.value("synopsis", "");
      m.domain = j.value("domain", "");
      m.source_attribution = j.value("source_attribution", "");
      m.body_path = j.at("body_path").get<std::string>();
      m.body = text::read_file((fs::path(library_root) / m.body_path).string());
      out.push_back(std::move(m));
    } catch (const json::exception& e) {
      throw ConfigError("malformed reference index line: " + std::string(e.what()));
    }
  }
  return out;
}

}  // namespace rtlforge::kb
