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
#include "rtlforge/data.hpp"

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::data {

std::string_view builtin(std::string_view name) {
  const auto& files = embedded_files();
  auto it = files.find(name);
  if (it == files.end())
    throw ConfigError("no embedded data file named " + std::string(name));
  return it->second;
}

std::string load_or_builtin(const std::string& path, std::string_view name) {
  if (!path.empty()) return text::read_file(path);
  return std::string(builtin(name));
}

}  // namespace rtlforge::data
