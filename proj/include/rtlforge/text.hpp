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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rtlforge::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Case-folded keyword test. A keyword made of a single alphanumeric word
/// must match on word boundaries; anything containing spaces, hyphens or
/// other punctuation is matched as a plain substring.
bool contains_keyword(std::string_view haystack, std::string_view keyword);

/// Lower-cased distinct words of length >= 3 that are not stop words, in
/// first-occurrence order.
std::vector<std::string> content_terms(std::string_view s);

/// All lower-cased alphanumeric words (no filtering), used for membership.
std::vector<std::string> words(std::string_view s);

std::uint64_t fnv1a64(std::string_view s,
                      std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t v);

bool is_verilog_keyword(std::string_view word);
/// Plain Verilog identifier that is not a reserved word.
bool is_identifier(std::string_view s);

}  // namespace rtlforge::text
