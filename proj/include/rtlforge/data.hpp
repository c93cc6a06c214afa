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
#include <map>
#include <string>
#include <string_view>

namespace rtlforge::data {

/// Seed data files compiled into the library (see data/ in the source tree).
const std::map<std::string, std::string_view, std::less<>>& embedded_files();

/// Returns the embedded copy of `name` (e.g. "agents.json").
/// Throws ConfigError for unknown names.
std::string_view builtin(std::string_view name);

/// Reads `path` when non-empty, otherwise the embedded file `name`.
std::string load_or_builtin(const std::string& path, std::string_view name);

}  // namespace rtlforge::data
