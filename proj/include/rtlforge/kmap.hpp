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

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rtlforge::kmap {

enum class Tri : std::uint8_t { kZero, kOne, kDontCare };

inline constexpr int kMaxVars = 6;

/// Boolean function over up to six inputs. Row index bits follow var_names
/// with the first name as the most significant bit.
struct TruthFunction {
  std::vector<std::string> var_names;
  std::string output_name = "f";
  std::vector<Tri> values;

  int num_vars() const { return static_cast<int>(var_names.size()); }
  /// Throws ParseError when sizes or names are inconsistent.
  void validate() const;

  std::vector<std::uint32_t> ones() const;
  std::vector<std::uint32_t> dont_cares() const;

  static TruthFunction from_minterms(std::vector<std::string> vars,
                                     std::span<const std::uint32_t> ones,
                                     std::span<const std::uint32_t> dont_cares = {},
                                     std::string output = "f");

  bool operator==(const TruthFunction&) const = default;
};

/// Product term. Bit positions match the row-index layout of the function.
struct Implicant {
  std::uint32_t fixed_mask = 0;
  std::uint32_t value_bits = 0;

  bool covers(std::uint32_t minterm) const {
    return (minterm & fixed_mask) == value_bits;
  }
  int literal_count() const;

  bool operator==(const Implicant&) const = default;
  /// Canonical order: smallest covered row first, then more literals first.
  std::strong_ordering operator<=>(const Implicant& o) const;
};

struct SopExpression {
  std::vector<Implicant> terms;        // canonical order
  std::optional<Tri> constant;         // set iff terms is empty

  bool evaluate(std::uint32_t row) const;
  int literal_count() const;
};

/// Output equals XOR over `var_mask` variables, inverted when `inverted`.
struct ParityForm {
  std::uint32_t var_mask = 0;
  bool inverted = false;

  bool operator==(const ParityForm&) const = default;
};

struct KmapParseOptions {
  /// Declared input order; when empty rows come before columns.
  std::vector<std::string> var_order;
  std::string output_name = "f";
};

TruthFunction parse_kmap(std::string_view text, const KmapParseOptions& opts = {});

/// One function per output column of the first table found in `text`.
std::vector<TruthFunction> parse_truth_tables(std::string_view text,
                                              const KmapParseOptions& opts = {});
/// Single-output convenience; the first output column.
TruthFunction parse_truth_table(std::string_view text,
                                const KmapParseOptions& opts = {});

struct MinimizeOptions {
  /// Residues larger than this use greedy covering instead of Petrick.
  int exact_residue_limit = 22;
  /// Petrick expansion falls back to greedy past this many partial products.
  std::size_t petrick_term_limit = 200000;
};

std::vector<Implicant> prime_implicants(const TruthFunction& tf);
SopExpression quine_mccluskey(const TruthFunction& tf,
                              const MinimizeOptions& opts = {});
std::optional<ParityForm> detect_xor(const TruthFunction& tf);

/// Right-hand side of the continuous assignment for one output.
std::string expression_text(const TruthFunction& tf, const SopExpression& sop,
                            const std::optional<ParityForm>& parity);

struct OutputLogic {
  TruthFunction function;
  SopExpression sop;
  std::optional<ParityForm> parity;
};

OutputLogic solve(const TruthFunction& tf, const MinimizeOptions& opts = {});

/// Verilog-2001 module with one assignment per output. The header is used
/// verbatim when `interface_header` is given.
std::string emit_verilog(std::span<const OutputLogic> outputs,
                         std::string_view module_name,
                         const std::optional<std::string>& interface_header = std::nullopt);
std::string emit_verilog(const TruthFunction& tf, const SopExpression& sop,
                         const std::optional<ParityForm>& parity,
                         std::string_view module_name,
                         const std::optional<std::string>& interface_header = std::nullopt);

/// Text grid using the first `row_vars` variables as row labels.
std::string render_kmap(const TruthFunction& tf, int row_vars);
std::string render_truth_table(const TruthFunction& tf);

}  // namespace rtlforge::kmap
