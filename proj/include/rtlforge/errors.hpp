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

#include <stdexcept>
#include <string>
#include <vector>

namespace rtlforge {

/// Base of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed specification text (K-map grids, truth tables, JSON inputs).
/// `line` carries the offending source line when one is known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, std::string line = {})
      : Error(line.empty() ? what : what + ": `" + line + "`"),
        line_(std::move(line)) {}
  const std::string& line() const { return line_; }

 private:
  std::string line_;
};

class EmitError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class EmptyKnowledgeBase : public Error {
 public:
  EmptyKnowledgeBase() : Error("knowledge base has zero entries") {}
};

/// Retryable failure talking to a completion endpoint.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Non-retryable rejection from a completion endpoint (4xx, bad payload).
class BackendError : public Error {
 public:
  using Error::Error;
};

class ScriptExhausted : public Error {
 public:
  ScriptExhausted() : Error("scripted backend has no responses left") {}
};

class ExtractionFailed : public Error {
 public:
  ExtractionFailed() : Error("response contains no module...endmodule span") {}
};

class PortMismatchError : public Error {
 public:
  PortMismatchError(std::vector<std::string> missing,
                    std::vector<std::string> extra);
  const std::vector<std::string>& missing() const { return missing_; }
  const std::vector<std::string>& extra() const { return extra_; }

 private:
  std::vector<std::string> missing_;
  std::vector<std::string> extra_;
};

class VerilogParseFailure : public Error {
 public:
  using Error::Error;
};

class ToolMissing : public Error {
 public:
  using Error::Error;
};

class ToolCrash : public Error {
 public:
  ToolCrash(const std::string& what, std::string stderr_text)
      : Error(what), stderr_(std::move(stderr_text)) {}
  const std::string& stderr_text() const { return stderr_; }

 private:
  std::string stderr_;
};

class DecompositionMalformed : public Error {
 public:
  using Error::Error;
};

class CycleError : public Error {
 public:
  explicit CycleError(std::vector<std::string> cycle);
  const std::vector<std::string>& cycle() const { return cycle_; }

 private:
  std::vector<std::string> cycle_;
};

class EmptyBuffer : public Error {
 public:
  EmptyBuffer() : Error("transition buffer holds no completed episode") {}
};

class ModelMissing : public Error {
 public:
  ModelMissing() : Error("world model not loaded") {}
};

class UnpricedModel : public Error {
 public:
  explicit UnpricedModel(const std::string& model)
      : Error("unpriced model: " + model) {}
};

}  // namespace rtlforge
