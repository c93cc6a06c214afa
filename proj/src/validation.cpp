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
#include "rtlforge/validation.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <regex>
#include <sstream>

#include "rtlforge/data.hpp"
#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::validation {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kStageNames[] = {"None", "LintPassed", "SimPassed", "SynthPassed"};
constexpr std::string_view kCategoryNames[] = {"Syntax",           "PortMismatch",  "WidthMismatch",
                                               "UndeclaredSignal", "InferredLatch", "Other"};
constexpr std::string_view kTrendNames[] = {"Improving", "Worsening", "TypeChanged", "Unchanged"};
constexpr std::size_t kMaxLine = 1024;

std::vector<std::string_view> lines_of(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line.substr(0, kMaxLine));
    start = nl + 1;
  }
  return out;
}

bool parse_long(const std::string& s, long& out) {
  if (s.size() > 18) return false;
  out = std::stol(s);
  return true;
}

struct Pattern {
  ErrorCategory category;
  std::regex re;
};

const std::vector<Pattern>& patterns() {
  static const auto flags = std::regex::icase | std::regex::optimize;
  static const std::vector<Pattern> p = {
      {ErrorCategory::kPortMismatch,
       std::regex(R"(is not a port of|port\b.*\bnot found|pin not found|wrong number of ports|)"
                  R"(port count|cannot find port|missing port|unknown port|too many ports)",
                  flags)},
      {ErrorCategory::kUndeclaredSignal,
       std::regex(R"(unable to bind|not declared|undeclared|can't find definition of variable|)"
                  R"(undefined variable|identifier .* not found|unknown module type|)"
                  R"(cannot find file containing module|cannot find module)",
                  flags)},
      {ErrorCategory::kWidthMismatch,
       std::regex(R"(width mismatch|expects \d+ bits|bit width|%\w+-WIDTH|size mismatch|port .* size)",
                  flags)},
      {ErrorCategory::kInferredLatch,
       std::regex(R"(latch inferred|inferred latch|%\w+-LATCH|\$_DLATCH)", flags)},
      {ErrorCategory::kSyntax,
       std::regex(R"(syntax error|parse error|invalid module item|malformed|unexpected|)"
                  R"(invalid .*statement)",
                  flags)},
  };
  return p;
}

bool is_noise(std::string_view line) {
  static const std::regex noise(
      R"(I give up|^\s*\d+ error\(s\)|exiting due to|error\(s\) during elaboration|^\s*$)",
      std::regex::icase | std::regex::optimize);
  return std::regex_search(line.begin(), line.end(), noise);
}

class Workspace {
 public:
  Workspace() {
    std::string tmpl = (fs::temp_directory_path() / "rtlforge-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw Error("cannot create a temporary workspace");
    path_ = tmpl;
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string put(const std::string& name, std::string_view content) const {
    text::write_file((path_ / name).string(), content);
    return name;
  }
  std::string dir() const { return path_.string(); }

 private:
  fs::path path_;
};

std::string env_name(std::string_view tool) {
  std::string n = "RTLFORGE_";
  for (char c : tool) n += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return n;
}

const std::string& configured(const ToolPaths& p, std::string_view tool) {
  static const std::string none;
  if (tool == "iverilog") return p.iverilog;
  if (tool == "vvp") return p.vvp;
  if (tool == "verilator") return p.verilator;
  if (tool == "yosys") return p.yosys;
  return none;
}

bool executable(const fs::path& p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec) && access(p.c_str(), X_OK) == 0;
}

ToolOutput run_process(const std::string& exe, const std::vector<std::string>& args,
                       const std::string& workdir, double timeout_s) {
  int out_pipe[2], err_pipe[2];
  if (pipe2(out_pipe, O_CLOEXEC) != 0 || pipe2(err_pipe, O_CLOEXEC) != 0)
    throw Error("pipe failed: " + std::string(std::strerror(errno)));
  std::vector<std::string> argv_s = {exe};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw Error("fork failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    setpgid(0, 0);
    const int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    if (!workdir.empty() && chdir(workdir.c_str()) != 0) _exit(126);
    execv(exe.c_str(), argv.data());
    _exit(127);
  }
  close(out_pipe[1]);
  close(err_pipe[1]);

  ToolOutput out;
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* bufs[2] = {&out.stdout_text, &out.stderr_text};
  int open_fds = 2;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  char chunk[4096];
  while (open_fds > 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      out.timed_out = true;
      kill(-pid, SIGKILL);
      break;
    }
    const int r = poll(fds, 2, static_cast<int>(std::min<long>(left.count(), 1000)));
    if (r < 0 && errno != EINTR) break;
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = read(fds[i].fd, chunk, sizeof chunk);
      if (n > 0) {
        bufs[i]->append(chunk, static_cast<std::size_t>(n));
      } else {
        close(fds[i].fd);
        fds[i].fd = -1;
        --open_fds;
      }
    }
  }
  for (auto& f : fds)
    if (f.fd >= 0) close(f.fd);
  int status = 0;
  waitpid(pid, &status, 0);
  if (WIFEXITED(status)) {
    out.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    out.exit_code = 128 + WTERMSIG(status);
    out.signaled = !out.timed_out;
  }
  return out;
}

json output_to_json(const ToolOutput& o) {
  return {{"exit_code", o.exit_code},
          {"stdout", o.stdout_text},
          {"stderr", o.stderr_text},
          {"timed_out", o.timed_out},
          {"signaled", o.signaled}};
}

ToolOutput output_from_json(const json& j) {
  ToolOutput o;
  o.exit_code = j.value("exit_code", 0);
  o.stdout_text = j.value("stdout", "");
  o.stderr_text = j.value("stderr", "");
  o.timed_out = j.value("timed_out", false);
  o.signaled = j.value("signaled", false);
  return o;
}

json error_to_json(const CategorizedError& e) {
  return {{"category", category_name(e.category)},
          {"message", e.message},
          {"file", e.file},
          {"line", e.line ? json(*e.line) : json(nullptr)},
          {"context", e.context},
          {"context_first_line", e.context_first_line}};
}

CategorizedError error_from_json(const json& j) {
  CategorizedError e;
  const auto cat = parse_error_category(j.at("category").get<std::string>());
  if (!cat) throw ParseError("unknown error category", j.at("category").get<std::string>());
  e.category = *cat;
  e.message = j.at("message").get<std::string>();
  e.file = j.value("file", "");
  if (j.contains("line") && !j["line"].is_null()) e.line = j["line"].get<int>();
  e.context = j.value("context", std::vector<std::string>{});
  e.context_first_line = j.value("context_first_line", 0);
  return e;
}

}  // namespace

std::string_view stage_name(Stage s) { return kStageNames[static_cast<int>(s)]; }
std::string_view category_name(ErrorCategory c) { return kCategoryNames[static_cast<int>(c)]; }
std::string_view trend_name(ErrorTrend t) { return kTrendNames[static_cast<int>(t)]; }

std::optional<ErrorCategory> parse_error_category(std::string_view s) {
  for (int i = 0; i < kNumErrorCategories; ++i)
    if (kCategoryNames[i] == s) return static_cast<ErrorCategory>(i);
  return std::nullopt;
}

json report_to_json(const ValidationReport& r) {
  json errs = json::array();
  for (const auto& e : r.errors) errs.push_back(error_to_json(e));
  json j = {{"stage_reached", stage_name(r.stage_reached)},
            {"errors", errs},
            {"sim", nullptr},
            {"synth", nullptr},
            {"sim_skipped", r.sim_skipped},
            {"tool_logs", r.tool_logs}};
  if (r.sim)
    j["sim"] = {{"passed", r.sim->passed},         {"mismatches", r.sim->mismatches},
                {"samples", r.sim->samples},       {"marker", r.sim->marker},
                {"timed_out", r.sim->timed_out}};
  if (r.synth)
    j["synth"] = {{"cell_count", r.synth->cell_count},
                  {"wire_count", r.synth->wire_count},
                  {"latch_warnings", r.synth->latch_warnings},
                  {"combinational_loop", r.synth->combinational_loop}};
  return j;
}

ValidationReport report_from_json(const json& j) {
  try {
    ValidationReport r;
    const auto stage = j.at("stage_reached").get<std::string>();
    const auto it = std::find(std::begin(kStageNames), std::end(kStageNames), stage);
    if (it == std::end(kStageNames)) throw ParseError("unknown stage", stage);
    r.stage_reached = static_cast<Stage>(it - std::begin(kStageNames));
    for (const auto& e : j.at("errors")) r.errors.push_back(error_from_json(e));
    if (j.contains("sim") && !j["sim"].is_null()) {
      const auto& s = j["sim"];
      r.sim = SimResult{s.at("passed").get<bool>(), s.at("mismatches").get<long>(),
                        s.at("samples").get<long>(), s.at("marker").get<std::string>(),
                        s.value("timed_out", false)};
    }
    if (j.contains("synth") && !j["synth"].is_null()) {
      const auto& s = j["synth"];
      r.synth = SynthMetrics{s.at("cell_count").get<long>(), s.at("wire_count").get<long>(),
                             s.at("latch_warnings").get<long>(),
                             s.value("combinational_loop", false)};
    }
    r.sim_skipped = j.value("sim_skipped", false);
    r.tool_logs = j.value("tool_logs", std::map<std::string, std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed validation report: ") + e.what());
  }
}

// ------------------------------------------------------------------ parsing

SimResult scan_sim_output(std::string_view output) {
  static const std::regex mismatch(R"(^\s*Mismatches:\s*(\d+)\s+in\s+(\d+)\s+samples\s*$)");
  static const std::regex count(R"(^\s*(\d+)\s*/\s*(\d+)\s+tests?\s+passed\s*$)");
  static const std::regex status(R"(^\s*STATUS:\s*(PASS|FAIL)\s*$)");
  std::optional<SimResult> found[3];
  for (auto line : lines_of(output)) {
    std::match_results<std::string_view::const_iterator> m;
    long a = 0, b = 0;
    if (std::regex_match(line.begin(), line.end(), m, mismatch)) {
      if (parse_long(m[1], a) && parse_long(m[2], b)) found[0] = SimResult{a == 0, a, b, "mismatches", false};
    } else if (std::regex_match(line.begin(), line.end(), m, count)) {
      if (parse_long(m[1], a) && parse_long(m[2], b))
        found[1] = SimResult{a == b && b > 0, std::max(0L, b - a), b, "count", false};
    } else if (std::regex_match(line.begin(), line.end(), m, status)) {
      found[2] = SimResult{m[1] == "PASS", 0, 0, "status", false};
    }
  }
  for (auto& f : found)
    if (f) return *f;
  return SimResult{false, 0, 0, "none", false};
}

std::vector<CategorizedError> categorize_errors(std::string_view tool_output) {
  static const std::regex location(R"(([A-Za-z0-9_./\\-]+\.(?:sv|v|vh|svh))\s*:\s*(\d+))");
  static const std::regex warning(R"(warning)", std::regex::icase);
  static const std::regex error_word(R"(error)", std::regex::icase);
  std::vector<CategorizedError> out;
  for (auto line : lines_of(tool_output)) {
    if (is_noise(line)) continue;
    std::optional<ErrorCategory> cat;
    for (const auto& p : patterns())
      if (std::regex_search(line.begin(), line.end(), p.re)) {
        cat = p.category;
        break;
      }
    const bool warn = std::regex_search(line.begin(), line.end(), warning);
    if (warn && cat != ErrorCategory::kInferredLatch && cat != ErrorCategory::kWidthMismatch) continue;
    if (!cat && !std::regex_search(line.begin(), line.end(), error_word)) continue;
    CategorizedError e;
    e.category = cat.value_or(ErrorCategory::kOther);
    e.message = std::string(text::trim(line));
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(line.begin(), line.end(), m, location)) {
      e.file = m[1];
      long n = 0;
      if (parse_long(m[2], n) && n > 0 && n < 1000000000) e.line = static_cast<int>(n);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void attach_context(std::vector<CategorizedError>& errors,
                    const std::map<std::string, std::string>& sources) {
  for (auto& e : errors) {
    if (!e.line) continue;
    auto it = sources.find(fs::path(e.file).filename().string());
    if (it == sources.end()) continue;
    const auto lines = text::split_lines(it->second);
    const int n = static_cast<int>(lines.size());
    if (*e.line > n) continue;
    int first = std::max(1, *e.line - 2);
    int last = std::min(n, first + 4);
    first = std::max(1, last - 4);
    e.context.assign(lines.begin() + (first - 1), lines.begin() + last);
    e.context_first_line = first;
  }
}

const HintDatabase& HintDatabase::builtin() {
  static const HintDatabase db = from_json(json::parse(data::builtin("fix_hints.json")));
  return db;
}

HintDatabase HintDatabase::from_json(const json& j) {
  HintDatabase db;
  try {
    for (const auto& e : j) {
      const auto design = parse_category(e.at("design").get<std::string>());
      const auto cat = parse_error_category(e.at("category").get<std::string>());
      if (!design || !cat) throw ConfigError("unknown category in hint entry: " + e.dump());
      auto& v = db.hints_[{*design, *cat}];
      for (const auto& h : e.at("hints")) v.push_back(h.get<std::string>());
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed hint database: ") + ex.what());
  }
  return db;
}

std::vector<std::string> HintDatabase::lookup(ErrorCategory error, Category design) const {
  if (auto it = hints_.find({design, error}); it != hints_.end()) return it->second;
  if (auto it = hints_.find({Category::kUnknown, error}); it != hints_.end()) return it->second;
  return {};
}

std::vector<std::string> fix_hints(ErrorCategory error, Category design, const HintDatabase& db) {
  return db.lookup(error, design);
}

ErrorTrend error_trend(const ValidationReport& previous, const ValidationReport& current) {
  if (current.errors.size() < previous.errors.size()) return ErrorTrend::kImproving;
  if (current.errors.size() > previous.errors.size()) return ErrorTrend::kWorsening;
  std::vector<int> a(kNumErrorCategories, 0), b(kNumErrorCategories, 0);
  for (const auto& e : previous.errors) ++a[static_cast<int>(e.category)];
  for (const auto& e : current.errors) ++b[static_cast<int>(e.category)];
  return a == b ? ErrorTrend::kUnchanged : ErrorTrend::kTypeChanged;
}

std::vector<agents::ErrorFeedback> to_feedback(const ValidationReport& report, Category design,
                                               const HintDatabase& db) {
  std::vector<agents::ErrorFeedback> out;
  for (const auto& e : report.errors) {
    agents::ErrorFeedback f;
    f.category = std::string(category_name(e.category));
    f.line = e.line.value_or(0);
    f.message = e.message;
    for (std::size_t i = 0; i < e.context.size(); ++i) {
      const int n = e.context_first_line + static_cast<int>(i);
      std::string num = std::to_string(n);
      f.context += (e.line && n == *e.line ? ">" : " ") + std::string(4 - std::min<std::size_t>(4, num.size()), ' ') +
                   num + " | " + e.context[i] + "\n";
    }
    const auto hints = db.lookup(e.category, design);
    if (!hints.empty()) f.hint = hints.front();
    out.push_back(std::move(f));
  }
  return out;
}

// ------------------------------------------------------------- tool runners

std::optional<std::string> find_tool(std::string_view tool, const ToolPaths& paths) {
  const auto& explicit_path = configured(paths, tool);
  if (!explicit_path.empty()) {
    if (!executable(explicit_path))
      throw ToolMissing("configured " + std::string(tool) + " not executable: " + explicit_path);
    return explicit_path;
  }
  if (const char* env = std::getenv(env_name(tool).c_str()); env && *env) {
    if (!executable(env))
      throw ToolMissing(env_name(tool) + " does not name an executable: " + env);
    return std::string(env);
  }
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::string_view rest(path);
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    const auto dir = rest.substr(0, colon);
    if (!dir.empty()) {
      const fs::path candidate = fs::path(std::string(dir)) / std::string(tool);
      if (executable(candidate)) return candidate.string();
    }
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return std::nullopt;
}

ProcessRunner::ProcessRunner(ToolPaths paths) : paths_(std::move(paths)) {}

bool ProcessRunner::available(std::string_view tool) const {
  try {
    return find_tool(tool, paths_).has_value();
  } catch (const ToolMissing&) {
    return false;
  }
}

ToolOutput ProcessRunner::run(const ToolInvocation& inv) {
  const auto exe = find_tool(inv.tool, paths_);
  if (!exe) throw ToolMissing(inv.tool + " not found (set " + env_name(inv.tool) + " or PATH)");
  return run_process(*exe, inv.args, inv.workdir, inv.timeout_s);
}

std::string replay_key(const ToolInvocation& inv) {
  std::uint64_t h = text::fnv1a64(inv.tool);
  h = text::fnv1a64("\x1f" + inv.step, h);
  for (const auto& s : inv.inputs) h = text::fnv1a64("\x1e" + s, h);
  return text::hex64(h);
}

json fixture_to_json(const FixtureEntry& e) {
  json j = output_to_json(e.output);
  j["tool"] = e.tool;
  if (!e.step.empty()) j["step"] = e.step;
  if (!e.key.empty()) j["key"] = e.key;
  if (!e.contains.empty()) j["contains"] = e.contains;
  return j;
}

FixtureEntry fixture_from_json(const json& j) {
  try {
    FixtureEntry e;
    e.tool = j.at("tool").get<std::string>();
    e.step = j.value("step", "");
    e.key = j.value("key", "");
    e.contains = j.value("contains", std::vector<std::string>{});
    e.output = output_from_json(j);
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed tool fixture: ") + ex.what());
  }
}

FixtureRunner::FixtureRunner(std::vector<FixtureEntry> entries) : entries_(std::move(entries)) {}

std::shared_ptr<FixtureRunner> FixtureRunner::from_json(const json& j) {
  auto r = std::make_shared<FixtureRunner>();
  for (const auto& e : j.value("entries", json::array())) r->entries_.push_back(fixture_from_json(e));
  if (j.contains("defaults"))
    for (const auto& [tool, out] : j["defaults"].items()) r->defaults_[tool] = output_from_json(out);
  return r;
}

std::shared_ptr<FixtureRunner> FixtureRunner::load(const std::string& path) {
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid tool fixture file " + path + ": " + e.what());
  }
}

void FixtureRunner::add(FixtureEntry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
}

void FixtureRunner::set_default(const std::string& tool, ToolOutput out) {
  std::lock_guard lock(mu_);
  defaults_[tool] = std::move(out);
}

bool FixtureRunner::available(std::string_view tool) const {
  std::lock_guard lock(mu_);
  if (defaults_.count(std::string(tool))) return true;
  return std::any_of(entries_.begin(), entries_.end(), [&](const FixtureEntry& e) { return e.tool == tool; });
}

ToolOutput FixtureRunner::run(const ToolInvocation& inv) {
  std::lock_guard lock(mu_);
  log_.push_back(inv);
  const auto key = replay_key(inv);
  auto applies = [&](const FixtureEntry& e) {
    return e.tool == inv.tool && (e.step.empty() || e.step == inv.step);
  };
  for (const auto& e : entries_)
    if (applies(e) && !e.key.empty() && e.key == key) return e.output;
  for (const auto& e : entries_) {
    if (!applies(e) || !e.key.empty() || e.contains.empty()) continue;
    const bool all = std::all_of(e.contains.begin(), e.contains.end(), [&](const std::string& c) {
      return std::any_of(inv.inputs.begin(), inv.inputs.end(),
                         [&](const std::string& in) { return in.find(c) != std::string::npos; });
    });
    if (all) return e.output;
  }
  if (auto it = defaults_.find(inv.tool); it != defaults_.end()) return it->second;
  throw ToolMissing("no recorded " + inv.tool + " output for step " + inv.step);
}

std::vector<ToolInvocation> FixtureRunner::invocations() const {
  std::lock_guard lock(mu_);
  return log_;
}

RecordingRunner::RecordingRunner(std::shared_ptr<ToolRunner> inner) : inner_(std::move(inner)) {}

ToolOutput RecordingRunner::run(const ToolInvocation& inv) {
  auto out = inner_->run(inv);
  std::lock_guard lock(mu_);
  recorded_.push_back({inv.tool, inv.step, replay_key(inv), {}, out});
  return out;
}

json RecordingRunner::to_json() const {
  std::lock_guard lock(mu_);
  json arr = json::array();
  for (const auto& e : recorded_) arr.push_back(fixture_to_json(e));
  return {{"entries", arr}};
}

void RecordingRunner::save(const std::string& path) const {
  text::write_file(path, to_json().dump(1) + "\n");
}

// ---------------------------------------------------------------- validator

SynthMetrics parse_synth_log(std::string_view log) {
  static const std::regex cells_old(R"(Number of cells:\s*(\d+))");
  static const std::regex cells_new(R"(^\s*(\d+)\s+cells\s*$)");
  static const std::regex wires_old(R"(Number of wires:\s*(\d+))");
  static const std::regex wires_new(R"(^\s*(\d+)\s+wires\s*$)");
  static const std::regex dlatch(R"(\$_DLATCH\w*\s+(\d+))");
  static const std::regex loop(R"(found logic loop|combinational loop)", std::regex::icase);
  SynthMetrics m;
  long latch_cells = 0;
  for (auto line : lines_of(log)) {
    std::match_results<std::string_view::const_iterator> r;
    long v = 0;
    if ((std::regex_search(line.begin(), line.end(), r, cells_old) ||
         std::regex_search(line.begin(), line.end(), r, cells_new)) &&
        parse_long(r[1], v))
      m.cell_count = v;
    else if ((std::regex_search(line.begin(), line.end(), r, wires_old) ||
              std::regex_search(line.begin(), line.end(), r, wires_new)) &&
             parse_long(r[1], v))
      m.wire_count = v;
    else if (std::regex_search(line.begin(), line.end(), r, dlatch) && parse_long(r[1], v))
      latch_cells += v;
    if (line.find("Latch inferred for signal") != std::string_view::npos) ++m.latch_warnings;
    if (std::regex_search(line.begin(), line.end(), loop)) m.combinational_loop = true;
  }
  if (m.latch_warnings == 0) m.latch_warnings = latch_cells;
  return m;
}

Validator::Validator(std::shared_ptr<ToolRunner> runner, ValidatorConfig config)
    : runner_(std::move(runner)),
      config_(config),
      slots_(std::make_shared<std::counting_semaphore<>>(std::max(1, config.max_concurrency))) {}

namespace {

struct Slot {
  explicit Slot(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~Slot() { s_.release(); }
  std::counting_semaphore<>& s_;
};

std::vector<std::string> write_sources(const Workspace& ws, std::string_view design,
                                       std::span<const std::string> deps, std::string_view ext,
                                       std::map<std::string, std::string>& names) {
  std::vector<std::string> files;
  files.push_back(ws.put(std::string("design") + std::string(ext), design));
  names[files.back()] = std::string(design);
  for (std::size_t i = 0; i < deps.size(); ++i) {
    files.push_back(ws.put("dep" + std::to_string(i) + std::string(ext), deps[i]));
    names[files.back()] = deps[i];
  }
  return files;
}

std::string seconds(double s) {
  std::ostringstream o;
  o << s << " s";
  return o.str();
}

std::vector<std::string> inputs_of(std::string_view a, std::span<const std::string> deps,
                                   std::optional<std::string_view> b = std::nullopt) {
  std::vector<std::string> in = {std::string(a)};
  if (b) in.emplace_back(*b);
  in.insert(in.end(), deps.begin(), deps.end());
  return in;
}

std::vector<CategorizedError> failure_errors(const ToolOutput& out, const std::string& log,
                                             const std::map<std::string, std::string>& sources,
                                             const std::string& what) {
  auto errs = categorize_errors(log);
  attach_context(errs, sources);
  if (errs.empty()) {
    CategorizedError e;
    e.message = what + " failed with exit code " + std::to_string(out.exit_code);
    const auto lines = text::split_lines(text::trim(log));
    if (!lines.empty()) e.message += ": " + lines.front();
    errs.push_back(std::move(e));
  }
  return errs;
}

}  // namespace

LintResult Validator::lint(std::string_view source, std::span<const std::string> deps, LintMode mode) {
  Workspace ws;
  std::map<std::string, std::string> names;
  ToolInvocation inv;
  inv.workdir = ws.dir();
  inv.timeout_s = config_.tool_timeout_s;
  inv.inputs = inputs_of(source, deps);
  if (mode == LintMode::kSystemVerilog && runner_->available("verilator")) {
    const auto files = write_sources(ws, source, deps, ".sv", names);
    inv.tool = "verilator";
    inv.step = "lint-sv";
    inv.args = {"--lint-only", "-Wno-fatal", "-Wno-DECLFILENAME", "-Wno-MULTITOP", "-Wno-UNUSED"};
    inv.args.insert(inv.args.end(), files.begin(), files.end());
  } else {
    const bool sv = mode == LintMode::kSystemVerilog;
    const auto files = write_sources(ws, source, deps, sv ? ".sv" : ".v", names);
    inv.tool = "iverilog";
    inv.step = sv ? "lint-sv-fallback" : "lint-2001";
    inv.args = {sv ? "-g2012" : "-g2001", "-Wall", "-t", "null"};
    inv.args.insert(inv.args.end(), files.begin(), files.end());
  }
  if (!runner_->available(inv.tool)) throw ToolMissing(inv.tool + " not found");
  ToolOutput out;
  {
    Slot slot(*slots_);
    out = runner_->run(inv);
  }
  if (out.signaled) throw ToolCrash(inv.tool + " crashed", out.stderr_text);
  LintResult r;
  r.tool = inv.tool;
  r.log = out.stdout_text + out.stderr_text;
  if (out.timed_out) {
    r.errors.push_back({ErrorCategory::kOther, inv.tool + " timed out", "", std::nullopt, {}, 0});
    return r;
  }
  if (out.exit_code == 0) {
    r.errors = categorize_errors(r.log);
    r.errors.erase(std::remove_if(r.errors.begin(), r.errors.end(),
                                  [](const CategorizedError& e) {
                                    return e.category == ErrorCategory::kInferredLatch ||
                                           e.category == ErrorCategory::kWidthMismatch;
                                  }),
                   r.errors.end());
    attach_context(r.errors, names);
    r.passed = r.errors.empty();
  } else {
    r.errors = failure_errors(out, r.log, names, "lint");
  }
  return r;
}

SimOutcome Validator::simulate(std::string_view design, std::string_view testbench,
                               std::span<const std::string> deps) {
  Workspace ws;
  std::map<std::string, std::string> names;
  auto files = write_sources(ws, design, deps, ".sv", names);
  files.insert(files.begin() + 1, ws.put("tb.sv", testbench));
  names["tb.sv"] = std::string(testbench);
  SimOutcome r;
  ToolInvocation compile{"iverilog", "compile", {"-g2012", "-o", "sim.vvp"}, ws.dir(),
                         config_.tool_timeout_s, inputs_of(design, deps, testbench)};
  compile.args.insert(compile.args.end(), files.begin(), files.end());
  if (!runner_->available("iverilog")) throw ToolMissing("iverilog not found");
  if (!runner_->available("vvp")) throw ToolMissing("vvp not found");
  ToolOutput out;
  {
    Slot slot(*slots_);
    out = runner_->run(compile);
  }
  if (out.signaled) throw ToolCrash("iverilog crashed", out.stderr_text);
  r.log = out.stdout_text + out.stderr_text;
  if (out.exit_code != 0 || out.timed_out) {
    r.errors = failure_errors(out, r.log, names, "compile");
    r.result.marker = "none";
    return r;
  }
  r.compiled = true;
  ToolInvocation run{"vvp", "run", {"-n", "sim.vvp"}, ws.dir(), config_.sim_timeout_s, compile.inputs};
  {
    Slot slot(*slots_);
    out = runner_->run(run);
  }
  if (out.signaled) throw ToolCrash("vvp crashed", out.stderr_text);
  r.log += out.stdout_text + out.stderr_text;
  if (out.timed_out) {
    r.result = SimResult{false, 0, 0, "none", true};
    r.errors.push_back({ErrorCategory::kOther,
                        "simulation timed out after " + seconds(config_.sim_timeout_s),
                        "", std::nullopt, {}, 0});
    return r;
  }
  r.result = scan_sim_output(out.stdout_text + "\n" + out.stderr_text);
  if (r.result.marker == "none")
    r.errors.push_back({ErrorCategory::kOther, "no status marker", "", std::nullopt, {}, 0});
  else if (!r.result.passed)
    r.errors.push_back({ErrorCategory::kOther,
                        "simulation failed: " + std::to_string(r.result.mismatches) + " mismatches in " +
                            std::to_string(r.result.samples) + " samples",
                        "", std::nullopt, {}, 0});
  return r;
}

SynthOutcome Validator::synthesize_check(std::string_view source, std::span<const std::string> deps) {
  if (!runner_->available("yosys")) throw ToolMissing("yosys not found");
  Workspace ws;
  std::map<std::string, std::string> names;
  const auto files = write_sources(ws, source, deps, ".sv", names);
  std::string script = "read_verilog -sv";
  for (const auto& f : files) script += " " + f;
  script += "; synth -auto-top; check; stat";
  ToolInvocation inv{"yosys", "synth", {"-p", script}, ws.dir(), config_.tool_timeout_s,
                     inputs_of(source, deps)};
  ToolOutput out;
  {
    Slot slot(*slots_);
    out = runner_->run(inv);
  }
  if (out.signaled) throw ToolCrash("yosys crashed", out.stderr_text);
  SynthOutcome r;
  r.log = out.stdout_text + out.stderr_text;
  if (out.exit_code != 0 || out.timed_out) {
    r.errors = failure_errors(out, r.log, names, "synthesis");
    return r;
  }
  r.metrics = parse_synth_log(r.log);
  if (r.metrics.latch_warnings > 0) {
    for (auto& e : categorize_errors(r.log))
      if (e.category == ErrorCategory::kInferredLatch) r.errors.push_back(std::move(e));
    if (r.errors.empty())
      r.errors.push_back({ErrorCategory::kInferredLatch,
                          std::to_string(r.metrics.latch_warnings) + " latch cells inferred", "",
                          std::nullopt, {}, 0});
    attach_context(r.errors, names);
  }
  if (r.metrics.combinational_loop)
    r.errors.push_back({ErrorCategory::kOther, "combinational loop detected", "", std::nullopt, {}, 0});
  r.passed = r.errors.empty();
  return r;
}

ValidationReport Validator::validate(std::string_view source, std::optional<std::string_view> testbench,
                                     std::span<const std::string> deps, LintMode mode) {
  ValidationReport rep;
  const auto l = lint(source, deps, mode);
  rep.tool_logs["lint"] = l.log;
  rep.errors = l.errors;
  if (!l.passed) return rep;
  rep.stage_reached = Stage::kLintPassed;
  if (testbench) {
    const auto s = simulate(source, *testbench, deps);
    rep.tool_logs["sim"] = s.log;
    rep.sim = s.result;
    rep.errors = s.errors;
    if (!s.compiled || !s.result.passed) return rep;
    rep.stage_reached = Stage::kSimPassed;
  } else {
    rep.sim_skipped = true;
  }
  if (!runner_->available("yosys")) {
    rep.tool_logs["synth"] = "skipped: yosys not available";
    return rep;
  }
  const auto y = synthesize_check(source, deps);
  rep.tool_logs["synth"] = y.log;
  rep.synth = y.metrics;
  rep.errors = y.errors;
  if (y.passed) rep.stage_reached = Stage::kSynthPassed;
  return rep;
}

}  // namespace rtlforge::validation
