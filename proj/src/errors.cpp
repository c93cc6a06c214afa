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
#include "rtlforge/errors.hpp"

#include "rtlforge/text.hpp"

namespace rtlforge {

namespace {

std::string port_message(const std::vector<std::string>& missing,
                         const std::vector<std::string>& extra) {
  std::string msg = "port mismatch";
  if (!missing.empty()) msg += "; missing: " + text::join(missing, ", ");
  if (!extra.empty()) msg += "; extra: " + text::join(extra, ", ");
  return msg;
}

}  // namespace

PortMismatchError::PortMismatchError(std::vector<std::string> missing,
                                     std::vector<std::string> extra)
    : Error(port_message(missing, extra)),
      missing_(std::move(missing)),
      extra_(std::move(extra)) {}

CycleError::CycleError(std::vector<std::string> cycle)
    : Error("dependency cycle: " + text::join(cycle, " -> ")),
      cycle_(std::move(cycle)) {}

}  // namespace rtlforge
