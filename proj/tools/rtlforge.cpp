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
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "rtlforge/errors.hpp"
#include "rtlforge/kmap.hpp"
#include "rtlforge/knowledge.hpp"
#include "rtlforge/pipeline.hpp"
#include "rtlforge/rl.hpp"
#include "rtlforge/text.hpp"
#include "rtlforge/validation.hpp"

using namespace rtlforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::string planner;
  std::string backend;
  std::optional<std::uint64_t> seed;
  std::string trace_out;
  std::string fixtures;
};

pipeline::PipelineConfig make_config(const Globals& g) {
  auto c = g.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(g.config);
  if (!g.planner.empty()) c.planner = rl::parse_planner(g.planner);
  if (!g.backend.empty()) c.backend = g.backend;
  if (g.seed) c.seed = *g.seed;
  if (!g.fixtures.empty()) c.tool_fixtures = g.fixtures;
  c.validate();
  return c;
}

std::vector<std::string> read_script(const std::string& path) {
  if (path.empty()) return {};
  const auto j = json::parse(text::read_file(path));
  const auto& arr = j.is_object() ? j.at("responses") : j;
  return arr.get<std::vector<std::string>>();
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
  } else {
    text::write_file(path, content);
  }
}

int cmd_generate(const Globals& g, const std::string& spec_path, const std::string& tb_path,
                 const std::string& script_path, const std::string& out, const std::string& record_out) {
  pipeline::Pipeline pl(make_config(g));
  pipeline::Problem p;
  p.spec = load_spec(spec_path);
  p.id = p.spec.name;
  if (!tb_path.empty()) p.testbench = text::read_file(tb_path);
  p.script = read_script(script_path);

  std::ofstream trace_file;
  if (!g.trace_out.empty()) trace_file.open(g.trace_out);
  pipeline::ThoughtStream trace(g.trace_out.empty() ? nullptr : &trace_file);
  const auto r = pl.generate_module(p, pl.config().episode_offset, &trace);

  write_or_print(out, r.source);
  const auto rec = pipeline::run_record_to_json(r.record).dump(2);
  if (!record_out.empty()) text::write_file(record_out, rec + "\n");
  if (!pl.config().transitions_out.empty()) pl.transitions().save_jsonl(pl.config().transitions_out);
  std::cerr << "outcome: " << pipeline::outcome_name(r.record.outcome)
            << " iterations: " << r.record.iterations_used << "\n";
  return r.record.outcome == pipeline::Outcome::kSolved ? 0 : 1;
}

int cmd_benchmark(const Globals& g, const std::string& dir, const std::string& out_dir,
                  std::optional<double> min_pass) {
  pipeline::Pipeline pl(make_config(g));
  const auto s = pipeline::run_benchmark(dir, pl, {out_dir, g.trace_out});
  std::cout << pipeline::summary_to_json(s).dump(2) << "\n";
  if (min_pass && s.pass_at_1 < *min_pass) {
    std::cerr << "pass@1 " << s.pass_at_1 << " below threshold " << *min_pass << "\n";
    return 1;
  }
  return 0;
}

int cmd_train_policy(const Globals& g, const std::string& transitions, const std::string& init,
                     const std::string& out, const std::string& world_out, int updates, int world_epochs) {
  const auto cfg = make_config(g);
  const auto buffer = rl::TransitionBuffer::load_jsonl(transitions);
  auto policy = init.empty() ? std::make_shared<rl::PolicyNetwork>()
                             : std::make_shared<rl::PolicyNetwork>(rl::PolicyNetwork::load(init));
  rl::PpoTrainer trainer(policy, {}, cfg.seed);
  for (int i = 0; i < updates; ++i) {
    const auto st = trainer.update(*buffer);
    std::cout << json{{"update", i}, {"samples", st.samples}, {"steps", st.steps},
                      {"policy_loss", st.loss.policy}, {"value_loss", st.loss.value},
                      {"entropy", st.loss.entropy}, {"total", st.loss.total}}.dump()
              << "\n";
  }
  trainer.snapshot()->save(out);
  if (!world_out.empty()) {
    const auto all = buffer->snapshot();
    const auto data = rl::world_samples(all);
    rl::MlpWorldModel wm;
    const double loss = wm.train(data, world_epochs, 1e-3, cfg.seed);
    wm.save(world_out);
    std::cout << json{{"world_model_loss", loss}, {"samples", data.size()}}.dump() << "\n";
  }
  return 0;
}

int cmd_index_library(const Globals& g, const std::string& source, const std::string& out, bool lint) {
  kb::IndexOptions opts;
  std::unique_ptr<validation::Validator> validator;
  if (lint) {
    const auto cfg = make_config(g);
    std::shared_ptr<validation::ToolRunner> runner;
    if (!cfg.tool_fixtures.empty()) runner = validation::FixtureRunner::load(cfg.tool_fixtures);
    else runner = std::make_shared<validation::ProcessRunner>(cfg.tools);
    validator = std::make_unique<validation::Validator>(runner);
    opts.lint = [&](const std::string&, const std::string& body) -> std::optional<std::string> {
      const auto r = validator->lint(body, {}, validation::LintMode::kSystemVerilog);
      if (r.passed) return std::nullopt;
      return r.log.empty() ? std::string("lint failed") : r.log;
    };
  }
  const auto res = kb::index_reference_library(source, opts);
  text::write_file(out, kb::index_to_jsonl(res.modules));
  for (const auto& rej : res.rejected) std::cerr << "rejected " << rej.path << ": " << rej.reason << "\n";
  std::cout << "indexed " << res.modules.size() << " modules, rejected " << res.rejected.size() << "\n";
  return 0;
}

int cmd_solve_kmap(const std::string& input, const std::string& module, const std::string& header,
                   const std::string& out) {
  const auto content = input.empty() || input == "-"
                           ? std::string(std::istreambuf_iterator<char>(std::cin), {})
                           : text::read_file(input);
  std::vector<kmap::OutputLogic> outs;
  for (const auto& f : pipeline::symbolic_functions(content)) outs.push_back(kmap::solve(f));
  std::optional<std::string> hdr;
  if (!header.empty()) hdr = text::read_file(header);
  write_or_print(out, kmap::emit_verilog(outs, module, hdr));
  return 0;
}

int cmd_validate(const Globals& g, const std::string& source, const std::string& tb,
                 const std::vector<std::string>& deps, bool sv) {
  const auto cfg = make_config(g);
  std::shared_ptr<validation::ToolRunner> runner;
  if (!cfg.tool_fixtures.empty()) runner = validation::FixtureRunner::load(cfg.tool_fixtures);
  else runner = std::make_shared<validation::ProcessRunner>(cfg.tools);
  validation::Validator v(runner, {cfg.sim_timeout_s, 120.0, cfg.parallelism});
  std::vector<std::string> dep_src;
  for (const auto& d : deps) dep_src.push_back(text::read_file(d));
  std::optional<std::string> tb_src;
  if (!tb.empty()) tb_src = text::read_file(tb);
  const auto report = v.validate(text::read_file(source), tb_src ? std::optional<std::string_view>(*tb_src) : std::nullopt,
                                 dep_src, sv ? validation::LintMode::kSystemVerilog : validation::LintMode::kStrict2001);
  std::cout << validation::report_to_json(report).dump(2) << "\n";
  const auto required = tb_src ? validation::Stage::kSimPassed : validation::Stage::kLintPassed;
  return report.stage_reached >= required && report.errors.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rtlforge: agentic RTL generation"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--planner", g.planner, "ppo, mpc or heuristic");
  app.add_option("--backend", g.backend, "mock or remote");
  auto* seed_opt = app.add_option("--seed", seed, "Planner and training seed");
  app.add_option("--trace-out", g.trace_out, "Thought trace file (generate) or directory (benchmark)");
  app.add_option("--tool-fixtures", g.fixtures, "Replay tool outputs from a fixture file");

  auto* gen = app.add_subcommand("generate", "Generate one module");
  std::string spec_path, tb_path, script_path, out, record_out;
  gen->add_option("spec", spec_path, "Spec file (.json or text)")->required()->check(CLI::ExistingFile);
  gen->add_option("--testbench", tb_path)->check(CLI::ExistingFile);
  gen->add_option("--script", script_path, "Scripted responses for the mock backend")->check(CLI::ExistingFile);
  gen->add_option("-o,--out", out, "Write the final source here");
  gen->add_option("--record", record_out, "Write the run record here");

  auto* bench = app.add_subcommand("benchmark", "Run a problem directory");
  std::string problems, bench_out;
  std::optional<double> min_pass;
  bench->add_option("problems", problems)->required()->check(CLI::ExistingDirectory);
  bench->add_option("-o,--out", bench_out, "Directory for run records and summary.json");
  bench->add_option("--min-pass", min_pass, "Exit non-zero when pass@1 is below this")->check(CLI::Range(0.0, 1.0));

  auto* train = app.add_subcommand("train-policy", "PPO updates from recorded transitions");
  std::string transitions, init, policy_out, world_out;
  int updates = 1, world_epochs = 50;
  train->add_option("transitions", transitions, "JSONL transition file")->required()->check(CLI::ExistingFile);
  train->add_option("--init", init, "Starting checkpoint")->check(CLI::ExistingFile);
  train->add_option("-o,--out", policy_out, "Policy checkpoint")->required();
  train->add_option("--updates", updates)->check(CLI::PositiveNumber);
  train->add_option("--world-model-out", world_out, "Also fit and save a world model");
  train->add_option("--world-epochs", world_epochs)->check(CLI::PositiveNumber);

  auto* index = app.add_subcommand("index-library", "Index a directory of reference RTL");
  std::string lib_src, index_out;
  bool lint = false;
  index->add_option("source", lib_src)->required()->check(CLI::ExistingDirectory);
  index->add_option("-o,--out", index_out, "JSONL index")->required();
  index->add_flag("--lint", lint, "Reject files that fail lint");

  auto* kmap_cmd = app.add_subcommand("solve-kmap", "Minimize a K-map or truth table into Verilog");
  std::string kmap_in, module = "TopModule", header, kmap_out;
  kmap_cmd->add_option("input", kmap_in, "Text file, or - for stdin");
  kmap_cmd->add_option("--module", module);
  kmap_cmd->add_option("--header", header, "Interface header to use verbatim")->check(CLI::ExistingFile);
  kmap_cmd->add_option("-o,--out", kmap_out);

  auto* val = app.add_subcommand("validate", "Lint, simulate and synthesize a design");
  std::string val_src, val_tb;
  std::vector<std::string> deps;
  bool sv = false;
  val->add_option("source", val_src)->required()->check(CLI::ExistingFile);
  val->add_option("--testbench", val_tb)->check(CLI::ExistingFile);
  val->add_option("--dep", deps, "Extra source files")->check(CLI::ExistingFile);
  val->add_flag("--sv", sv, "SystemVerilog lint mode");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    make_config(g);
    if (*gen) return cmd_generate(g, spec_path, tb_path, script_path, out, record_out);
    if (*bench) return cmd_benchmark(g, problems, bench_out, min_pass);
    if (*train) return cmd_train_policy(g, transitions, init, policy_out, world_out, updates, world_epochs);
    if (*index) return cmd_index_library(g, lib_src, index_out, lint);
    if (*kmap_cmd) return cmd_solve_kmap(kmap_in, module, header, kmap_out);
    if (*val) return cmd_validate(g, val_src, val_tb, deps, sv);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
