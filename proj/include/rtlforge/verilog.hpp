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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rtlforge::verilog {

enum class Direction { kInput, kOutput, kInout };
std::string_view direction_name(Direction d);

struct Port {
  std::string name;
  Direction direction = Direction::kInput;
  std::string net_type;  // "wire", "reg", "logic" or empty
  bool is_signed = false;
  std::string range;     // e.g. "[7:0]"; empty for scalars
  int width = 1;         // 0 when the range is not a numeric constant

  /// "input wire [7:0] a" style declaration (no trailing punctuation).
  std::string declaration(bool keep_net_type = true) const;
};

struct Parameter {
  std::string name;
  std::string default_value;
};

/// Location of one module...endmodule definition in a source buffer.
struct ModuleSpan {
  std::string name;
  size_t begin = 0;       // offset of the `module` keyword
  size_t header_end = 0;  // one past the ';' closing the header
  size_t end = 0;         // one past `endmodule`
  bool has_body = false;  // anything other than whitespace before endmodule
};

struct ModuleInfo {
  std::string name;
  std::vector<Port> ports;
  std::vector<Parameter> parameters;
  std::string header_text;  // verbatim `module ... ;`
  bool ansi = true;
};

/// Copy of `src` with comments and string-literal contents blanked out.
/// Offsets and newlines are preserved.
std::string mask_comments(std::string_view src);

/// Complete module definitions in source order.
std::vector<ModuleSpan> find_modules(std::string_view src);

ModuleInfo parse_module(std::string_view src, const ModuleSpan& span);
std::vector<ModuleInfo> parse_modules(std::string_view src);

/// Parses a bare header such as "module top(input a, output b);".
/// Throws VerilogParseFailure when no module keyword is present.
ModuleInfo parse_header(std::string_view header);

/// Width of a numeric range like "[7:0]"; 0 when not constant.
int range_width(std::string_view range);

int count_always_blocks(std::string_view src);
int count_code_lines(std::string_view src);

/// Words used outside comments, for SystemVerilog-construct checks.
bool uses_word(std::string_view src, std::string_view word);

}  // namespace rtlforge::verilog
