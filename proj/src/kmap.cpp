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
#include "rtlforge/kmap.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"
#include "rtlforge/verilog.hpp"

namespace rtlforge::kmap {

namespace {

std::uint32_t var_bit(int num_vars, int var) {
  return 1u << (num_vars - 1 - var);
}

bool is_binary(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c != '0' && c != '1') return false;
  return true;
}

std::uint32_t parse_bits(std::string_view s) {
  std::uint32_t v = 0;
  for (char c : s) v = (v << 1) | static_cast<std::uint32_t>(c == '1');
  return v;
}

std::optional<Tri> parse_cell(std::string_view s) {
  if (s == "0") return Tri::kZero;
  if (s == "1") return Tri::kOne;
  if (s == "x" || s == "X" || s == "d" || s == "D" || s == "-")
    return Tri::kDontCare;
  return std::nullopt;
}

std::string strip_comment_prefix(std::string_view line) {
  std::string_view t = text::trim(line);
  if (t.substr(0, 2) == "//") t.remove_prefix(2);
  else if (!t.empty() && (t.front() == '#' || t.front() == '*')) t.remove_prefix(1);
  return std::string(text::trim(t));
}

std::string replace_pipes(std::string s) {
  std::replace(s.begin(), s.end(), '|', ' ');
  return s;
}

std::string default_name(int i) { return std::string(1, static_cast<char>('a' + i)); }

// "ab" -> {a,b}; "a,b" -> {a,b}; "x1x2" -> {x1,x2}.
std::vector<std::string> split_names(std::string_view token, int expected) {
  std::vector<std::string> out;
  if (token.find(',') != std::string_view::npos) {
    std::string cur;
    for (char c : token) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }
  if (static_cast<int>(token.size()) == expected) {
    for (char c : token) out.emplace_back(1, c);
    return out;
  }
  std::string cur;
  for (char c : token) {
    if (std::isalpha(static_cast<unsigned char>(c)) && !cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
    cur.push_back(c);
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool is_gray_sequence(const std::vector<std::uint32_t>& labels, int width) {
  const std::size_t n = labels.size();
  if (n != (std::size_t{1} << width)) return false;
  std::set<std::uint32_t> seen(labels.begin(), labels.end());
  if (seen.size() != n) return false;
  if (n == 1) return true;
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (std::popcount(labels[i] ^ labels[i + 1]) != 1) return false;
  return std::popcount(labels.front() ^ labels.back()) == 1;
}

// Index of the reordered row for `row` under the permutation new_order[i] =
// index in the old order of the i-th new variable.
std::uint32_t permute_row(std::uint32_t row, int n, const std::vector<int>& new_order) {
  std::uint32_t out = 0;
  for (int i = 0; i < n; ++i)
    if (row & var_bit(n, new_order[i])) out |= var_bit(n, i);
  return out;
}

TruthFunction apply_var_order(TruthFunction tf, const std::vector<std::string>& order) {
  if (order.empty() || order == tf.var_names) return tf;
  const int n = tf.num_vars();
  if (static_cast<int>(order.size()) != n)
    throw ParseError("declared input order has " + std::to_string(order.size()) +
                     " names but the table has " + std::to_string(n) + " variables");
  std::vector<int> new_order;
  for (const auto& name : order) {
    auto it = std::find(tf.var_names.begin(), tf.var_names.end(), name);
    if (it == tf.var_names.end())
      throw ParseError("declared input '" + name + "' does not label the table");
    new_order.push_back(static_cast<int>(it - tf.var_names.begin()));
  }
  std::vector<Tri> values(tf.values.size(), Tri::kDontCare);
  for (std::uint32_t row = 0; row < tf.values.size(); ++row)
    values[permute_row(row, n, new_order)] = tf.values[row];
  tf.var_names = order;
  tf.values = std::move(values);
  return tf;
}

void fill_default_names(std::vector<std::string>& rows, std::vector<std::string>& cols,
                        int wr, int wc) {
  std::set<std::string> used(rows.begin(), rows.end());
  used.insert(cols.begin(), cols.end());
  int next = 0;
  auto fresh = [&] {
    while (used.count(default_name(next))) ++next;
    used.insert(default_name(next));
    return default_name(next++);
  };
  if (rows.empty())
    for (int i = 0; i < wr; ++i) rows.push_back(fresh());
  if (cols.empty())
    for (int i = 0; i < wc; ++i) cols.push_back(fresh());
}

struct LabelLine {
  std::string lead;  // joined non-binary prefix tokens
  std::vector<std::string> labels;
};

std::optional<LabelLine> as_label_line(const std::string& line) {
  auto toks = text::split_ws(replace_pipes(line));
  if (toks.empty()) return std::nullopt;
  std::size_t i = toks.size();
  std::size_t width = 0;
  while (i > 0 && is_binary(toks[i - 1]) &&
         (width == 0 || toks[i - 1].size() == width)) {
    width = toks[i - 1].size();
    --i;
  }
  const std::size_t count = toks.size() - i;
  if (count < 2 || width > 3 || count != (std::size_t{1} << width)) return std::nullopt;
  LabelLine out;
  for (std::size_t j = 0; j < i; ++j) {
    if (is_binary(toks[j])) return std::nullopt;
    out.lead += toks[j];
  }
  out.labels.assign(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.end());
  return out;
}

}  // namespace

void TruthFunction::validate() const {
  const int n = num_vars();
  if (n < 1 || n > kMaxVars)
    throw ParseError("function must have 1 to 6 inputs, got " + std::to_string(n));
  if (values.size() != (std::size_t{1} << n))
    throw ParseError("value table has " + std::to_string(values.size()) +
                     " rows, expected " + std::to_string(1u << n));
  std::set<std::string> names(var_names.begin(), var_names.end());
  if (static_cast<int>(names.size()) != n) throw ParseError("input names are not distinct");
  for (const auto& v : var_names)
    if (v.empty()) throw ParseError("empty input name");
}

std::vector<std::uint32_t> TruthFunction::ones() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < values.size(); ++i)
    if (values[i] == Tri::kOne) out.push_back(i);
  return out;
}

std::vector<std::uint32_t> TruthFunction::dont_cares() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < values.size(); ++i)
    if (values[i] == Tri::kDontCare) out.push_back(i);
  return out;
}

TruthFunction TruthFunction::from_minterms(std::vector<std::string> vars,
                                           std::span<const std::uint32_t> ones,
                                           std::span<const std::uint32_t> dont_cares,
                                           std::string output) {
  TruthFunction tf;
  tf.var_names = std::move(vars);
  tf.output_name = std::move(output);
  tf.values.assign(std::size_t{1} << tf.var_names.size(), Tri::kZero);
  for (auto m : dont_cares) tf.values.at(m) = Tri::kDontCare;
  for (auto m : ones) tf.values.at(m) = Tri::kOne;
  tf.validate();
  return tf;
}

int Implicant::literal_count() const { return std::popcount(fixed_mask); }

std::strong_ordering Implicant::operator<=>(const Implicant& o) const {
  if (auto c = value_bits <=> o.value_bits; c != 0) return c;
  return o.fixed_mask <=> fixed_mask;
}

bool SopExpression::evaluate(std::uint32_t row) const {
  if (constant) return *constant == Tri::kOne;
  for (const auto& t : terms)
    if (t.covers(row)) return true;
  return false;
}

int SopExpression::literal_count() const {
  int n = 0;
  for (const auto& t : terms) n += t.literal_count();
  return n;
}

// ---------------------------------------------------------------- parsing

TruthFunction parse_kmap(std::string_view text_in, const KmapParseOptions& opts) {
  std::vector<std::string> raw = text::split_lines(text_in);
  std::vector<std::string> lines;
  lines.reserve(raw.size());
  for (const auto& l : raw) lines.push_back(strip_comment_prefix(l));

  std::size_t label_idx = lines.size();
  LabelLine header;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (auto l = as_label_line(lines[i])) {
      header = std::move(*l);
      label_idx = i;
      break;
    }
  }
  if (label_idx == lines.size()) throw ParseError("no K-map grid found");

  const int wc = static_cast<int>(header.labels.front().size());
  std::vector<std::uint32_t> col_labels;
  for (const auto& l : header.labels) col_labels.push_back(parse_bits(l));
  if (!is_gray_sequence(col_labels, wc))
    throw ParseError("K-map column labels are not a Gray sequence", raw[label_idx]);

  // Data rows follow the label line.
  std::vector<std::uint32_t> row_labels;
  std::vector<std::vector<Tri>> cells;
  int wr = -1;
  std::size_t i = label_idx + 1;
  while (i < lines.size() && lines[i].empty()) ++i;
  for (; i < lines.size(); ++i) {
    auto toks = text::split_ws(replace_pipes(lines[i]));
    if (toks.size() < 2 || !is_binary(toks.front())) break;
    if (wr < 0) wr = static_cast<int>(toks.front().size());
    if (static_cast<int>(toks.front().size()) != wr)
      throw ParseError("K-map row label width differs from earlier rows", raw[i]);
    if (toks.size() - 1 != header.labels.size())
      throw ParseError("K-map row has " + std::to_string(toks.size() - 1) +
                           " cells, expected " + std::to_string(header.labels.size()),
                       raw[i]);
    std::vector<Tri> row;
    for (std::size_t c = 1; c < toks.size(); ++c) {
      auto v = parse_cell(toks[c]);
      if (!v) throw ParseError("unrecognized K-map cell '" + toks[c] + "'", raw[i]);
      row.push_back(*v);
    }
    row_labels.push_back(parse_bits(toks.front()));
    cells.push_back(std::move(row));
  }
  if (cells.empty()) throw ParseError("K-map has no data rows", raw[label_idx]);
  const std::size_t nrows = cells.size();
  if (std::popcount(nrows) != 1)
    throw ParseError("K-map has " + std::to_string(nrows) +
                         " rows, not a power of two",
                     raw[label_idx + nrows]);
  if (!is_gray_sequence(row_labels, wr))
    throw ParseError("K-map row labels are not a Gray sequence",
                     raw[label_idx + 1]);
  if (wr + wc > kMaxVars) throw ParseError("K-map has more than 6 variables");

  // Variable names.
  std::vector<std::string> row_names, col_names;
  const std::string& lead = header.lead;
  auto slash = lead.find_first_of("\\/");
  if (slash != std::string::npos) {
    row_names = split_names(lead.substr(0, slash), wr);
    col_names = split_names(lead.substr(slash + 1), wc);
  } else {
    if (!lead.empty()) row_names = split_names(lead, wr);
    // Column names may sit alone on the preceding line.
    for (std::size_t p = label_idx; p-- > 0;) {
      if (lines[p].empty()) continue;
      auto toks = text::split_ws(lines[p]);
      if (toks.size() == 1) {
        auto names = split_names(toks.front(), wc);
        bool ok = static_cast<int>(names.size()) == wc;
        for (const auto& nm : names) ok = ok && text::is_identifier(nm);
        if (ok) col_names = std::move(names);
      }
      break;
    }
  }
  if (!row_names.empty() && static_cast<int>(row_names.size()) != wr)
    throw ParseError("row variable names do not match the row label width", raw[label_idx]);
  if (!col_names.empty() && static_cast<int>(col_names.size()) != wc)
    throw ParseError("column variable names do not match the column label width",
                     raw[label_idx]);
  fill_default_names(row_names, col_names, wr, wc);

  TruthFunction tf;
  tf.output_name = opts.output_name;
  tf.var_names = row_names;
  tf.var_names.insert(tf.var_names.end(), col_names.begin(), col_names.end());
  tf.values.assign(std::size_t{1} << (wr + wc), Tri::kDontCare);
  for (std::size_t r = 0; r < nrows; ++r)
    for (std::size_t c = 0; c < col_labels.size(); ++c)
      tf.values[(row_labels[r] << wc) | col_labels[c]] = cells[r][c];
  tf.validate();
  return apply_var_order(std::move(tf), opts.var_order);
}

namespace {

struct SplitRow {
  std::vector<std::string> left;
  std::vector<std::string> right;
  bool has_separator = false;
};

bool replace_all(std::string& s, std::string_view from, std::string_view to) {
  bool any = false;
  for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) {
    s.replace(p, from.size(), to);
    any = true;
  }
  return any;
}

SplitRow split_row(std::string line) {
  SplitRow out;
  // Normalize arrows and double bars to a single marker.
  bool arrow = replace_all(line, "→", "\x01");
  arrow = replace_all(line, "->", "\x01") || arrow;
  arrow = replace_all(line, "=>", "\x01") || arrow;
  if (!arrow) arrow = replace_all(line, "||", "\x01");
  std::replace(line.begin(), line.end(), ',', ' ');
  auto marker = line.find('\x01');
  if (marker != std::string::npos) {
    out.left = text::split_ws(replace_pipes(line.substr(0, marker)));
    out.right = text::split_ws(replace_pipes(line.substr(marker + 1)));
    out.has_separator = true;
    return out;
  }
  if (line.find('|') != std::string::npos) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line + "|") {
      if (c == '|') {
        auto t = std::string(text::trim(cur));
        if (!t.empty()) cells.push_back(t);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (cells.size() >= 2) {
      for (std::size_t i = 0; i + 1 < cells.size(); ++i)
        for (auto& t : text::split_ws(cells[i])) out.left.push_back(t);
      out.right = text::split_ws(cells.back());
      out.has_separator = true;
      return out;
    }
    line = replace_pipes(line);
  }
  auto toks = text::split_ws(line);
  if (toks.size() >= 2) {
    out.right.push_back(toks.back());
    toks.pop_back();
    out.left = std::move(toks);
  }
  return out;
}

bool row_token(std::string_view t) {
  if (t.empty()) return false;
  if (parse_cell(t)) return true;
  return std::isdigit(static_cast<unsigned char>(t.front())) != 0;
}

bool is_row_line(const SplitRow& r) {
  if (r.left.empty() || r.right.empty()) return false;
  for (const auto& t : r.left)
    if (!row_token(t)) return false;
  for (const auto& t : r.right)
    if (!row_token(t)) return false;
  return true;
}

bool is_rule_line(std::string_view line) {
  bool any = false;
  for (char c : line) {
    if (c == '-' || c == '=' || c == '+') any = true;
    else if (c != '|' && c != ':' && c != ' ' && c != '\t') return false;
  }
  return any;
}

bool is_name(std::string_view t) {
  if (t.empty() || std::isdigit(static_cast<unsigned char>(t.front()))) return false;
  for (char c : t)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

bool is_time_column(std::string_view name) {
  const std::string n = text::to_lower(name);
  return n == "time" || n == "t" || n == "cycle" || n == "step" || n == "ns";
}

}  // namespace

std::vector<TruthFunction> parse_truth_tables(std::string_view text_in,
                                              const KmapParseOptions& opts) {
  std::vector<std::string> raw = text::split_lines(text_in);
  std::vector<std::string> lines;
  for (const auto& l : raw) lines.push_back(strip_comment_prefix(l));

  std::size_t first = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || is_rule_line(lines[i])) continue;
    if (is_row_line(split_row(lines[i]))) {
      first = i;
      break;
    }
  }
  if (first == lines.size()) throw ParseError("no truth table found");

  std::vector<std::size_t> row_idx;
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (is_rule_line(lines[i])) continue;
    if (lines[i].empty()) break;
    if (!is_row_line(split_row(lines[i]))) break;
    row_idx.push_back(i);
  }

  // Header: identifier-only line right above the rows (skipping rules).
  std::vector<std::string> head_left, head_right;
  bool head_sep = false;
  for (std::size_t p = first; p-- > 0;) {
    if (is_rule_line(lines[p])) continue;
    if (lines[p].empty()) break;
    SplitRow h = split_row(lines[p]);
    bool ok = !h.left.empty() || !h.right.empty();
    for (const auto& t : h.left) ok = ok && is_name(t);
    for (const auto& t : h.right) ok = ok && is_name(t);
    if (ok) {
      head_left = std::move(h.left);
      head_right = std::move(h.right);
      head_sep = h.has_separator;
    }
    break;
  }

  const SplitRow sample = split_row(lines[row_idx.front()]);
  const std::size_t n_left = sample.left.size();
  const std::size_t n_right = sample.right.size();
  if (!head_sep && !head_left.empty()) {
    // Header without a separator: the trailing names label the outputs.
    std::vector<std::string> all = head_left;
    all.insert(all.end(), head_right.begin(), head_right.end());
    if (all.size() == n_left + n_right) {
      head_left.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_left));
      head_right.assign(all.begin() + static_cast<std::ptrdiff_t>(n_left), all.end());
    }
  }

  std::vector<bool> drop(n_left, false);
  if (head_left.size() == n_left)
    for (std::size_t i = 0; i < n_left; ++i) drop[i] = is_time_column(head_left[i]);

  struct Row {
    std::uint32_t index;
    std::vector<Tri> outs;
    std::size_t line;
  };
  std::vector<Row> rows;
  int nv = -1;
  for (std::size_t li : row_idx) {
    SplitRow r = split_row(lines[li]);
    if (r.left.size() != n_left || r.right.size() != n_right)
      throw ParseError("truth table row has a different column count", raw[li]);
    std::string bits;
    for (std::size_t i = 0; i < n_left; ++i) {
      if (drop[i]) continue;
      if (!is_binary(r.left[i]))
        throw ParseError("non-binary input field '" + r.left[i] + "'", raw[li]);
      bits += r.left[i];
    }
    if (nv < 0) nv = static_cast<int>(bits.size());
    if (static_cast<int>(bits.size()) != nv)
      throw ParseError("truth table row has a different input width", raw[li]);
    Row row{parse_bits(bits), {}, li};
    for (const auto& t : r.right) {
      // "01" under a single column is read as two outputs.
      if (t.size() > 1 && is_binary(t)) {
        for (char c : t) row.outs.push_back(c == '1' ? Tri::kOne : Tri::kZero);
        continue;
      }
      auto v = parse_cell(t);
      if (!v) throw ParseError("unrecognized output value '" + t + "'", raw[li]);
      row.outs.push_back(*v);
    }
    if (!rows.empty() && row.outs.size() != rows.front().outs.size())
      throw ParseError("truth table row has a different output count", raw[li]);
    rows.push_back(std::move(row));
  }
  if (nv < 1 || nv > kMaxVars)
    throw ParseError("truth table must have 1 to 6 inputs, got " + std::to_string(nv));

  std::vector<std::string> names;
  for (std::size_t i = 0; i < head_left.size() && head_left.size() == n_left; ++i)
    if (!drop[i]) names.push_back(head_left[i]);
  if (static_cast<int>(names.size()) != nv) {
    names.clear();
    if (head_left.size() == 1 && static_cast<int>(head_left.front().size()) == nv)
      names = split_names(head_left.front(), nv);
    else
      for (int i = 0; i < nv; ++i) names.push_back(default_name(i));
  }

  const std::size_t n_out = rows.front().outs.size();
  std::vector<std::string> out_names;
  if (head_right.size() == n_out) out_names = head_right;
  else if (n_out == 1) out_names = {opts.output_name};
  else
    for (std::size_t o = 0; o < n_out; ++o)
      out_names.push_back(opts.output_name + std::to_string(o));

  std::vector<TruthFunction> result;
  for (std::size_t o = 0; o < n_out; ++o) {
    TruthFunction tf;
    tf.var_names = names;
    tf.output_name = out_names[o];
    tf.values.assign(std::size_t{1} << nv, Tri::kDontCare);
    std::vector<bool> seen(tf.values.size(), false);
    for (const auto& r : rows) {
      if (seen[r.index] && tf.values[r.index] != r.outs[o])
        throw ParseError("conflicting duplicate truth table row", raw[r.line]);
      seen[r.index] = true;
      tf.values[r.index] = r.outs[o];
    }
    tf.validate();
    result.push_back(apply_var_order(std::move(tf), opts.var_order));
  }
  return result;
}

TruthFunction parse_truth_table(std::string_view text_in, const KmapParseOptions& opts) {
  return parse_truth_tables(text_in, opts).front();
}

// ---------------------------------------------------------------- minimization

std::vector<Implicant> prime_implicants(const TruthFunction& tf) {
  tf.validate();
  const int n = tf.num_vars();
  const std::uint32_t full = (1u << n) - 1;
  std::set<Implicant> current;
  for (std::uint32_t m = 0; m < tf.values.size(); ++m)
    if (tf.values[m] != Tri::kZero) current.insert({full, m});

  std::vector<Implicant> primes;
  while (!current.empty()) {
    std::set<Implicant> next;
    std::set<Implicant> combined;
    std::map<std::uint32_t, std::unordered_set<std::uint32_t>> by_mask;
    for (const auto& imp : current) by_mask[imp.fixed_mask].insert(imp.value_bits);
    for (const auto& imp : current) {
      for (int b = 0; b < n; ++b) {
        const std::uint32_t bit = 1u << b;
        if (!(imp.fixed_mask & bit) || (imp.value_bits & bit)) continue;
        if (!by_mask[imp.fixed_mask].count(imp.value_bits | bit)) continue;
        next.insert({imp.fixed_mask & ~bit, imp.value_bits});
        combined.insert(imp);
        combined.insert({imp.fixed_mask, imp.value_bits | bit});
      }
    }
    for (const auto& imp : current)
      if (!combined.count(imp)) primes.push_back(imp);
    current = std::move(next);
  }

  std::vector<Implicant> useful;
  for (const auto& p : primes) {
    for (std::uint32_t m = 0; m < tf.values.size(); ++m) {
      if (tf.values[m] == Tri::kOne && p.covers(m)) {
        useful.push_back(p);
        break;
      }
    }
  }
  std::sort(useful.begin(), useful.end());
  return useful;
}

namespace {

using Bits = std::vector<std::uint64_t>;

bool bits_test(const Bits& b, std::size_t i) { return (b[i / 64] >> (i % 64)) & 1u; }
void bits_set(Bits& b, std::size_t i) { b[i / 64] |= std::uint64_t{1} << (i % 64); }
int bits_count(const Bits& b) {
  int c = 0;
  for (auto w : b) c += std::popcount(w);
  return c;
}
bool bits_subset(const Bits& a, const Bits& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] & ~b[i]) return false;
  return true;
}

struct CoverKey {
  std::size_t size;
  int literals;
  std::vector<Implicant> sorted;

  bool operator<(const CoverKey& o) const {
    if (size != o.size) return size < o.size;
    if (literals != o.literals) return literals < o.literals;
    return sorted < o.sorted;
  }
};

CoverKey make_key(std::vector<Implicant> cover) {
  std::sort(cover.begin(), cover.end());
  int lits = 0;
  for (const auto& c : cover) lits += c.literal_count();
  return {cover.size(), lits, std::move(cover)};
}

std::vector<std::size_t> greedy_cover(const std::vector<Implicant>& primes,
                                      const std::vector<std::uint32_t>& residue) {
  std::vector<bool> covered(residue.size(), false);
  std::size_t left = residue.size();
  std::vector<std::size_t> chosen;
  while (left > 0) {
    std::size_t best = primes.size();
    int best_gain = 0;
    for (std::size_t p = 0; p < primes.size(); ++p) {
      int gain = 0;
      for (std::size_t r = 0; r < residue.size(); ++r)
        if (!covered[r] && primes[p].covers(residue[r])) ++gain;
      if (gain == 0) continue;
      if (best == primes.size() || gain > best_gain ||
          (gain == best_gain &&
           primes[p].literal_count() < primes[best].literal_count())) {
        best = p;
        best_gain = gain;
      }
    }
    chosen.push_back(best);
    for (std::size_t r = 0; r < residue.size(); ++r)
      if (!covered[r] && primes[best].covers(residue[r])) {
        covered[r] = true;
        --left;
      }
  }
  // Drop members made redundant by later picks.
  for (std::size_t i = chosen.size(); i-- > 0;) {
    bool needed = false;
    for (auto m : residue) {
      if (!primes[chosen[i]].covers(m)) continue;
      bool other = false;
      for (std::size_t j = 0; j < chosen.size() && !other; ++j)
        other = j != i && primes[chosen[j]].covers(m);
      if (!other) {
        needed = true;
        break;
      }
    }
    if (!needed) chosen.erase(chosen.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return chosen;
}

// All irredundant covers of `residue` of size <= bound (Petrick's method).
std::optional<std::vector<Bits>> petrick(const std::vector<Implicant>& primes,
                                         const std::vector<std::uint32_t>& residue,
                                         int bound, std::size_t limit) {
  const std::size_t words = (primes.size() + 63) / 64;
  std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>> clauses;
  for (auto m : residue) {
    std::vector<std::size_t> s;
    for (std::size_t p = 0; p < primes.size(); ++p)
      if (primes[p].covers(m)) s.push_back(p);
    clauses.emplace_back(m, std::move(s));
  }
  std::stable_sort(clauses.begin(), clauses.end(), [](const auto& a, const auto& b) {
    return a.second.size() < b.second.size();
  });

  std::vector<Bits> terms{Bits(words, 0)};
  for (const auto& [m, sum] : clauses) {
    std::vector<Bits> next;
    for (const auto& t : terms) {
      bool hit = false;
      for (auto p : sum) hit = hit || bits_test(t, p);
      if (hit) {
        next.push_back(t);
        continue;
      }
      for (auto p : sum) {
        Bits u = t;
        bits_set(u, p);
        if (bits_count(u) <= bound) next.push_back(std::move(u));
      }
    }
    std::sort(next.begin(), next.end(), [](const Bits& a, const Bits& b) {
      const int ca = bits_count(a), cb = bits_count(b);
      return ca != cb ? ca < cb : a < b;
    });
    next.erase(std::unique(next.begin(), next.end()), next.end());
    std::vector<Bits> kept;
    for (auto& t : next) {
      bool absorbed = false;
      for (const auto& k : kept)
        if (bits_subset(k, t)) {
          absorbed = true;
          break;
        }
      if (!absorbed) kept.push_back(std::move(t));
    }
    if (kept.size() > limit) return std::nullopt;
    terms = std::move(kept);
  }
  return terms;
}

}  // namespace

SopExpression quine_mccluskey(const TruthFunction& tf, const MinimizeOptions& opts) {
  SopExpression out;
  const auto ones = tf.ones();
  if (ones.empty()) {
    tf.validate();
    out.constant = Tri::kZero;
    return out;
  }
  const auto primes = prime_implicants(tf);
  for (const auto& p : primes) {
    if (p.fixed_mask == 0) {
      out.constant = Tri::kOne;
      return out;
    }
  }

  std::vector<Implicant> cover;
  std::vector<bool> taken(primes.size(), false);
  for (auto m : ones) {
    std::size_t only = primes.size();
    int count = 0;
    for (std::size_t p = 0; p < primes.size(); ++p)
      if (primes[p].covers(m)) {
        only = p;
        ++count;
      }
    if (count == 1 && !taken[only]) {
      taken[only] = true;
      cover.push_back(primes[only]);
    }
  }
  std::vector<std::uint32_t> residue;
  for (auto m : ones) {
    bool hit = false;
    for (const auto& c : cover) hit = hit || c.covers(m);
    if (!hit) residue.push_back(m);
  }

  if (!residue.empty()) {
    std::vector<Implicant> cand;
    for (std::size_t p = 0; p < primes.size(); ++p)
      if (!taken[p]) cand.push_back(primes[p]);
    auto greedy = greedy_cover(cand, residue);
    std::vector<Implicant> best;
    for (auto i : greedy) best.push_back(cand[i]);

    if (static_cast<int>(residue.size()) <= opts.exact_residue_limit) {
      auto terms = petrick(cand, residue, static_cast<int>(greedy.size()),
                           opts.petrick_term_limit);
      if (terms) {
        std::optional<CoverKey> best_key;
        for (const auto& t : *terms) {
          std::vector<Implicant> choice;
          for (std::size_t p = 0; p < cand.size(); ++p)
            if (bits_test(t, p)) choice.push_back(cand[p]);
          std::vector<Implicant> full = cover;
          full.insert(full.end(), choice.begin(), choice.end());
          CoverKey key = make_key(std::move(full));
          if (!best_key || key < *best_key) {
            best_key = std::move(key);
            best = std::move(choice);
          }
        }
      }
    }
    cover.insert(cover.end(), best.begin(), best.end());
  }
  std::sort(cover.begin(), cover.end());
  out.terms = std::move(cover);
  return out;
}

std::optional<ParityForm> detect_xor(const TruthFunction& tf) {
  tf.validate();
  const int n = tf.num_vars();
  std::vector<std::uint32_t> masks;
  for (std::uint32_t s = 0; s < (1u << n); ++s)
    if (std::popcount(s) >= 2) masks.push_back(s);
  std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    return std::popcount(a) < std::popcount(b);
  });
  for (auto s : masks) {
    std::optional<bool> inverted;
    bool ok = true;
    for (std::uint32_t row = 0; row < tf.values.size() && ok; ++row) {
      if (tf.values[row] == Tri::kDontCare) continue;
      const bool parity = std::popcount(row & s) & 1;
      const bool inv = parity != (tf.values[row] == Tri::kOne);
      if (!inverted) inverted = inv;
      else ok = *inverted == inv;
    }
    if (ok && inverted) return ParityForm{s, *inverted};
    if (!inverted) return std::nullopt;  // nothing specified
  }
  return std::nullopt;
}

OutputLogic solve(const TruthFunction& tf, const MinimizeOptions& opts) {
  return {tf, quine_mccluskey(tf, opts), detect_xor(tf)};
}

// ---------------------------------------------------------------- emission

std::string expression_text(const TruthFunction& tf, const SopExpression& sop,
                            const std::optional<ParityForm>& parity) {
  const int n = tf.num_vars();
  if (parity) {
    std::vector<std::string> vars;
    for (int i = 0; i < n; ++i)
      if (parity->var_mask & var_bit(n, i)) vars.push_back(tf.var_names[i]);
    std::string x = text::join(vars, " ^ ");
    return parity->inverted ? "~(" + x + ")" : x;
  }
  if (sop.constant) return *sop.constant == Tri::kOne ? "1'b1" : "1'b0";
  std::vector<std::string> terms;
  for (const auto& t : sop.terms) {
    std::vector<std::string> lits;
    for (int i = 0; i < n; ++i) {
      const auto bit = var_bit(n, i);
      if (!(t.fixed_mask & bit)) continue;
      lits.push_back((t.value_bits & bit ? "" : "~") + tf.var_names[i]);
    }
    std::string s = text::join(lits, " & ");
    if (sop.terms.size() >= 2 && lits.size() >= 2) s = "(" + s + ")";
    terms.push_back(std::move(s));
  }
  return text::join(terms, " | ");
}

std::string emit_verilog(std::span<const OutputLogic> outputs, std::string_view module_name,
                         const std::optional<std::string>& interface_header) {
  if (!text::is_identifier(module_name))
    throw EmitError("invalid module name '" + std::string(module_name) + "'");
  if (outputs.empty()) throw EmitError("no outputs to emit");
  const auto& vars = outputs.front().function.var_names;
  for (const auto& o : outputs) {
    if (o.function.var_names != vars)
      throw EmitError("outputs disagree on input variables");
    if (!text::is_identifier(o.function.output_name))
      throw EmitError("invalid output name '" + o.function.output_name + "'");
  }
  for (const auto& v : vars)
    if (!text::is_identifier(v)) throw EmitError("invalid input name '" + v + "'");

  std::ostringstream os;
  std::vector<verilog::Port> header_outputs;
  if (interface_header) {
    std::string h(text::trim(*interface_header));
    if (h.empty() || h.back() != ';') h += ";";
    for (const auto& p : verilog::parse_header(h).ports)
      if (p.direction == verilog::Direction::kOutput) header_outputs.push_back(p);
    os << h << "\n";
  } else {
    os << "module " << module_name << " (\n";
    for (const auto& v : vars) os << "    input " << v << ",\n";
    for (std::size_t i = 0; i < outputs.size(); ++i)
      os << "    output " << outputs[i].function.output_name
         << (i + 1 < outputs.size() ? ",\n" : "\n");
    os << ");\n";
  }
  for (const auto& o : outputs) {
    std::string lhs = o.function.output_name;
    bool is_reg = false;
    const verilog::Port* match = nullptr;
    for (const auto& p : header_outputs)
      if (p.name == lhs) match = &p;
    if (!match && header_outputs.size() == 1 && outputs.size() == 1)
      match = &header_outputs.front();
    if (match) {
      lhs = match->name;
      is_reg = match->net_type == "reg";
    }
    const std::string rhs = expression_text(o.function, o.sop, o.parity);
    if (is_reg)
      os << "    always @(*) " << lhs << " = " << rhs << ";\n";
    else
      os << "    assign " << lhs << " = " << rhs << ";\n";
  }
  os << "endmodule\n";
  return os.str();
}

std::string emit_verilog(const TruthFunction& tf, const SopExpression& sop,
                         const std::optional<ParityForm>& parity, std::string_view module_name,
                         const std::optional<std::string>& interface_header) {
  const OutputLogic one{tf, sop, parity};
  return emit_verilog(std::span<const OutputLogic>(&one, 1), module_name, interface_header);
}

// ---------------------------------------------------------------- rendering

namespace {

std::string names_token(std::span<const std::string> names) {
  bool single = true;
  for (const auto& n : names) single = single && n.size() == 1;
  if (single) {
    std::string s;
    for (const auto& n : names) s += n;
    return s;
  }
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
  return s;
}

std::string bits_text(std::uint32_t v, int width) {
  std::string s;
  for (int i = width - 1; i >= 0; --i) s.push_back(((v >> i) & 1u) ? '1' : '0');
  return s;
}

char cell_char(Tri t) {
  return t == Tri::kOne ? '1' : t == Tri::kZero ? '0' : 'x';
}

}  // namespace

std::string render_kmap(const TruthFunction& tf, int row_vars) {
  tf.validate();
  const int n = tf.num_vars();
  if (row_vars < 1 || row_vars >= n)
    throw EmitError("K-map needs at least one row and one column variable");
  const int wc = n - row_vars;
  std::span<const std::string> names(tf.var_names);
  std::ostringstream os;
  os << names_token(names.subspan(0, row_vars)) << "\\"
     << names_token(names.subspan(row_vars));
  for (std::uint32_t c = 0; c < (1u << wc); ++c) os << ' ' << bits_text(c ^ (c >> 1), wc);
  os << '\n';
  for (std::uint32_t r = 0; r < (1u << row_vars); ++r) {
    const std::uint32_t gr = r ^ (r >> 1);
    os << bits_text(gr, row_vars);
    for (std::uint32_t c = 0; c < (1u << wc); ++c) {
      const std::uint32_t gc = c ^ (c >> 1);
      os << std::string(static_cast<std::size_t>(wc), ' ')
         << cell_char(tf.values[(gr << wc) | gc]);
    }
    os << '\n';
  }
  return os.str();
}

std::string render_truth_table(const TruthFunction& tf) {
  tf.validate();
  std::ostringstream os;
  os << text::join(tf.var_names, " ") << " | " << tf.output_name << '\n';
  const int n = tf.num_vars();
  for (std::uint32_t r = 0; r < tf.values.size(); ++r) {
    for (int i = 0; i < n; ++i) os << ((r & var_bit(n, i)) ? '1' : '0') << ' ';
    os << "| " << cell_char(tf.values[r]) << '\n';
  }
  return os.str();
}

}  // namespace rtlforge::kmap
