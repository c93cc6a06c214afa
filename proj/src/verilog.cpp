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
#include "rtlforge/verilog.hpp"

#include <cctype>
#include <cstdlib>
#include <optional>

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::verilog {
namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool word_at(std::string_view s, size_t pos, std::string_view word) {
  if (s.compare(pos, word.size(), word) != 0) return false;
  if (pos > 0 && is_ident_char(s[pos - 1])) return false;
  const size_t end = pos + word.size();
  return end >= s.size() || !is_ident_char(s[end]);
}

size_t find_word(std::string_view s, std::string_view word, size_t from) {
  for (size_t pos = s.find(word, from); pos != std::string_view::npos;
       pos = s.find(word, pos + 1)) {
    if (word_at(s, pos, word)) return pos;
  }
  return std::string_view::npos;
}

size_t skip_ws(std::string_view s, size_t i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return i;
}

// Index of the bracket closing the one at `open`, or npos.
size_t match_close(std::string_view s, size_t open) {
  int depth = 0;
  for (size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::vector<std::string> split_top_level(std::string_view s, char sep) {
  std::vector<std::string> parts;
  int depth = 0;
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == sep && depth == 0) {
      parts.emplace_back(text::trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  auto last = text::trim(s.substr(start));
  if (!last.empty() || !parts.empty()) parts.emplace_back(last);
  return parts;
}

struct DeclTokens {
  std::vector<std::string> words;   // keywords and identifiers in order
  std::vector<std::string> ranges;  // packed ranges seen before the name
  std::string default_value;
};

DeclTokens tokenize_decl(std::string_view s) {
  DeclTokens out;
  size_t i = 0;
  while (i < s.size()) {
    i = skip_ws(s, i);
    if (i >= s.size()) break;
    const char c = s[i];
    if (c == '[') {
      size_t close = match_close(s, i);
      if (close == std::string_view::npos) close = s.size() - 1;
      std::string range(s.substr(i, close - i + 1));
      // Unpacked dimensions after the name are not part of the port type.
      if (out.words.empty() || text::is_verilog_keyword(out.words.back()) ||
          out.ranges.empty())
        out.ranges.push_back(range);
      i = close + 1;
    } else if (c == '=') {
      out.default_value = std::string(text::trim(s.substr(i + 1)));
      break;
    } else if (is_ident_char(c)) {
      size_t j = i;
      while (j < s.size() && (is_ident_char(s[j]) || s[j] == '.')) ++j;
      out.words.emplace_back(s.substr(i, j - i));
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

std::optional<Direction> as_direction(std::string_view w) {
  if (w == "input") return Direction::kInput;
  if (w == "output") return Direction::kOutput;
  if (w == "inout") return Direction::kInout;
  return std::nullopt;
}

bool is_net_type(std::string_view w) {
  return w == "wire" || w == "reg" || w == "logic" || w == "tri" ||
         w == "var" || w == "bit" || w == "integer" || w == "wand" ||
         w == "wor" || w == "supply0" || w == "supply1";
}

// Applies the keywords of one declaration to `port`; returns the declared
// name (last identifier that is not a keyword).
std::string apply_decl(const DeclTokens& t, Port& port, bool& saw_direction) {
  std::string name;
  saw_direction = false;
  for (const auto& w : t.words) {
    if (auto d = as_direction(w)) {
      port.direction = *d;
      port.net_type.clear();
      port.is_signed = false;
      port.range.clear();
      saw_direction = true;
    } else if (is_net_type(w)) {
      port.net_type = w;
    } else if (w == "signed") {
      port.is_signed = true;
    } else if (w == "unsigned") {
      port.is_signed = false;
    } else {
      name = w;
    }
  }
  if (!t.ranges.empty()) port.range = t.ranges.front();
  port.width = port.range.empty() ? 1 : range_width(port.range);
  return name;
}

std::vector<Parameter> parse_parameter_list(std::string_view s) {
  std::vector<Parameter> params;
  for (const auto& item : split_top_level(s, ',')) {
    if (item.empty()) continue;
    DeclTokens t = tokenize_decl(item);
    std::string name;
    for (const auto& w : t.words) {
      if (w == "parameter" || w == "localparam" || w == "integer" ||
          w == "real" || w == "signed" || w == "int" || w == "logic" ||
          w == "type")
        continue;
      name = w;
    }
    if (!name.empty()) params.push_back({name, t.default_value});
  }
  return params;
}

}  // namespace

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kInput: return "input";
    case Direction::kOutput: return "output";
    case Direction::kInout: return "inout";
  }
  return "input";
}

std::string Port::declaration(bool keep_net_type) const {
  std::string out(direction_name(direction));
  if (keep_net_type && !net_type.empty()) out += " " + net_type;
  if (is_signed) out += " signed";
  if (!range.empty()) out += " " + range;
  out += " " + name;
  return out;
}

int range_width(std::string_view range) {
  std::string_view inner = text::trim(range);
  if (inner.size() < 2 || inner.front() != '[' || inner.back() != ']') return 0;
  inner = inner.substr(1, inner.size() - 2);
  const size_t colon = inner.find(':');
  if (colon == std::string_view::npos) return 0;
  const std::string msb(text::trim(inner.substr(0, colon)));
  const std::string lsb(text::trim(inner.substr(colon + 1)));
  auto numeric = [](const std::string& v) {
    if (v.empty()) return false;
    for (char c : v)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
  };
  if (!numeric(msb) || !numeric(lsb)) return 0;
  return std::abs(std::atoi(msb.c_str()) - std::atoi(lsb.c_str())) + 1;
}

std::string mask_comments(std::string_view src) {
  std::string out(src);
  size_t i = 0;
  while (i < out.size()) {
    if (out.compare(i, 2, "//") == 0) {
      while (i < out.size() && out[i] != '\n') out[i++] = ' ';
    } else if (out.compare(i, 2, "/*") == 0) {
      out[i] = out[i + 1] = ' ';
      i += 2;
      while (i < out.size() && out.compare(i, 2, "*/") != 0) {
        if (out[i] != '\n') out[i] = ' ';
        ++i;
      }
      if (i < out.size()) {
        out[i] = out[i + 1] = ' ';
        i += 2;
      }
    } else if (out[i] == '"') {
      ++i;
      while (i < out.size() && out[i] != '"' && out[i] != '\n') {
        if (out[i] == '\\' && i + 1 < out.size()) out[i++] = ' ';
        out[i++] = ' ';
      }
      if (i < out.size()) ++i;
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<ModuleSpan> find_modules(std::string_view src) {
  const std::string masked = mask_comments(src);
  const std::string_view m(masked);
  std::vector<ModuleSpan> spans;
  size_t pos = 0;
  while (true) {
    size_t kw = find_word(m, "module", pos);
    const size_t macro = find_word(m, "macromodule", pos);
    size_t kw_len = 6;
    if (macro != std::string_view::npos &&
        (kw == std::string_view::npos || macro < kw)) {
      kw = macro;
      kw_len = 11;
    }
    if (kw == std::string_view::npos) break;
    size_t i = skip_ws(m, kw + kw_len);
    size_t j = i;
    while (j < m.size() && is_ident_char(m[j])) ++j;
    if (j == i) {
      pos = kw + kw_len;
      continue;
    }
    ModuleSpan span;
    span.name = std::string(m.substr(i, j - i));
    span.begin = kw;
    i = skip_ws(m, j);
    if (i < m.size() && m[i] == '#') {
      i = skip_ws(m, i + 1);
      if (i < m.size() && m[i] == '(') {
        const size_t close = match_close(m, i);
        if (close == std::string_view::npos) break;
        i = skip_ws(m, close + 1);
      }
    }
    if (i < m.size() && m[i] == '(') {
      const size_t close = match_close(m, i);
      if (close == std::string_view::npos) break;
      i = skip_ws(m, close + 1);
    }
    const size_t semi = m.find(';', i);
    if (semi == std::string_view::npos) break;
    span.header_end = semi + 1;
    const size_t endm = find_word(m, "endmodule", span.header_end);
    if (endm == std::string_view::npos) break;
    span.end = endm + 9;
    span.has_body = !text::trim(m.substr(span.header_end, endm - span.header_end)).empty();
    spans.push_back(std::move(span));
    pos = spans.back().end;
  }
  return spans;
}

ModuleInfo parse_module(std::string_view src, const ModuleSpan& span) {
  const std::string masked = mask_comments(src);
  const std::string_view m(masked);
  ModuleInfo info;
  info.name = span.name;
  info.header_text = std::string(src.substr(span.begin, span.header_end - span.begin));

  size_t i = span.begin;
  while (i < m.size() && is_ident_char(m[i])) ++i;  // module keyword
  i = skip_ws(m, i);
  while (i < m.size() && is_ident_char(m[i])) ++i;  // module name
  i = skip_ws(m, i);
  if (i < span.header_end && m[i] == '#') {
    i = skip_ws(m, i + 1);
    const size_t close = match_close(m, i);
    info.parameters = parse_parameter_list(m.substr(i + 1, close - i - 1));
    i = skip_ws(m, close + 1);
  }
  std::vector<std::string> items;
  if (i < span.header_end && m[i] == '(') {
    const size_t close = match_close(m, i);
    items = split_top_level(m.substr(i + 1, close - i - 1), ',');
  }

  const std::string_view body =
      m.substr(span.header_end, span.end - 9 - span.header_end);

  bool ansi = false;
  Port current;
  for (const auto& item : items) {
    if (item.empty()) continue;
    DeclTokens t = tokenize_decl(item);
    if (t.words.empty()) continue;
    if (as_direction(t.words.front())) ansi = true;
    if (!ansi) {
      Port p;
      p.name = t.words.back();
      info.ports.push_back(p);
      continue;
    }
    // Items without a direction inherit the previous declaration's type.
    bool saw_direction = false;
    Port p = current;
    p.name = apply_decl(t, p, saw_direction);
    current = p;
    info.ports.push_back(p);
  }
  info.ansi = ansi || items.empty();

  // Non-ANSI: directions, types and ranges come from body declarations.
  for (const auto& stmt : split_top_level(body, ';')) {
    DeclTokens t = tokenize_decl(stmt);
    if (t.words.empty()) continue;
    const std::string& head = t.words.front();
    if (head == "parameter") {
      auto more = parse_parameter_list(std::string_view(stmt));
      for (auto& p : more) info.parameters.push_back(p);
      continue;
    }
    if (info.ansi) continue;
    const bool is_dir = as_direction(head).has_value();
    const bool is_type = head == "reg" || head == "wire" || head == "logic";
    if (!is_dir && !is_type) continue;
    // Split "input [3:0] a, b" into the shared prefix and each name.
    std::vector<std::string> names;
    DeclTokens prefix;
    prefix.ranges = t.ranges;
    for (const auto& w : t.words) {
      if (as_direction(w) || is_net_type(w) || w == "signed")
        prefix.words.push_back(w);
      else
        names.push_back(w);
    }
    for (const auto& name : names) {
      for (auto& p : info.ports) {
        if (p.name != name) continue;
        if (is_dir) {
          bool saw = false;
          apply_decl(prefix, p, saw);
        } else if (p.net_type.empty()) {
          p.net_type = head;
        }
      }
    }
  }
  return info;
}

std::vector<ModuleInfo> parse_modules(std::string_view src) {
  std::vector<ModuleInfo> out;
  for (const auto& span : find_modules(src)) out.push_back(parse_module(src, span));
  return out;
}

ModuleInfo parse_header(std::string_view header) {
  std::string src(header);
  const std::string masked = mask_comments(src);
  if (find_word(masked, "module", 0) == std::string_view::npos)
    throw VerilogParseFailure("no module keyword in header");
  if (find_word(masked, "endmodule", 0) == std::string_view::npos)
    src += "\nendmodule\n";
  auto spans = find_modules(src);
  if (spans.empty()) throw VerilogParseFailure("unterminated module header");
  return parse_module(src, spans.front());
}

int count_always_blocks(std::string_view src) {
  const std::string masked = mask_comments(src);
  int n = 0;
  for (std::string_view w : {"always", "always_ff", "always_comb", "always_latch"}) {
    for (size_t pos = find_word(masked, w, 0); pos != std::string_view::npos;
         pos = find_word(masked, w, pos + 1))
      ++n;
  }
  return n;
}

int count_code_lines(std::string_view src) {
  int n = 0;
  for (const auto& line : text::split_lines(mask_comments(src)))
    if (!text::trim(line).empty()) ++n;
  return n;
}

bool uses_word(std::string_view src, std::string_view word) {
  const std::string masked = mask_comments(src);
  return find_word(masked, word, 0) != std::string_view::npos;
}

}  // namespace rtlforge::verilog
