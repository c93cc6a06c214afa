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
#include "rtlforge/agents.hpp"

#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "rtlforge/errors.hpp"

namespace rtlforge::agents {
namespace {

using nlohmann::json;

Spec spec_of(std::string name, std::string desc) {
  Spec s;
  s.name = std::move(name);
  s.description = std::move(desc);
  return s;
}

int count_sections(const std::string& s) {
  int n = 0;
  for (std::size_t p = s.find("=== "); p != std::string::npos; p = s.find("=== ", p + 1))
    if (p == 0 || s[p - 1] == '\n') ++n;
  return n;
}

TEST(Profiles, TableOneValues) {
  struct Row {
    AgentName a;
    double t;
    int k;
    Selection sel;
  };
  const Row rows[] = {{AgentName::kGenius, 0.7, 15, Selection::kRlPolicy},
                      {AgentName::kFast, 0.5, 3, Selection::kRlPolicy},
                      {AgentName::kDebug, 0.3, 5, Selection::kRlPolicy},
                      {AgentName::kOptimize, 0.4, 4, Selection::kRlPolicy},
                      {AgentName::kWaveform, 0.4, 15, Selection::kKeywordRule},
                      {AgentName::kTestbench, 0.6, 4, Selection::kExplicit}};
  const auto& builtin = AgentProfiles::builtin();
  const auto reloaded = AgentProfiles::from_json(json::parse(builtin.to_json().dump()));
  for (const auto& r : rows) {
    for (const auto* ps : {&builtin, &reloaded}) {
      const auto& p = ps->get(r.a);
      EXPECT_EQ(p.name, r.a);
      EXPECT_EQ(p.default_temperature, r.t) << agent_name(r.a);
      EXPECT_EQ(p.default_rag_k, r.k) << agent_name(r.a);
      EXPECT_EQ(p.selection, r.sel) << agent_name(r.a);
    }
  }
  EXPECT_EQ(builtin.to_json(), reloaded.to_json());
  EXPECT_THROW(AgentProfiles::from_json(json::array()), ConfigError);
}

TEST(BuildPrompt, WaveformEmbedsSixSteps) {
  const auto& wf = AgentProfiles::builtin().get(AgentName::kWaveform);
  const auto r = build_prompt(wf, spec_of("top", "read the waveform"));
  ASSERT_EQ(waveform_steps().size(), 6u);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto line = std::to_string(i + 1) + ". " + waveform_steps()[i] + "\n";
    const auto at = r.system_prompt.find(line, pos);
    ASSERT_NE(at, std::string::npos) << line;
    pos = at;
  }
  EXPECT_EQ(waveform_steps()[0], "Extract all transitions");
  EXPECT_EQ(waveform_steps()[5], "Verify");
}

TEST(BuildPrompt, MinimalHasOnlySpec) {
  const auto& fast = AgentProfiles::builtin().get(AgentName::kFast);
  const auto r = build_prompt(fast, spec_of("and2", "2-input AND gate"));
  EXPECT_EQ(r.user_prompt, "=== SPECIFICATION ===\nModule: and2\n\n2-input AND gate\n");
  EXPECT_EQ(r.system_prompt.rfind("=== ROLE ===\n", 0), 0u);
  EXPECT_EQ(r.temperature, 0.5);
  EXPECT_EQ(r.max_tokens, kDefaultMaxTokens);
  EXPECT_EQ(r.model, fast.model_id);
}

TEST(BuildPrompt, DebugWithTwoErrors) {
  const auto& dbg = AgentProfiles::builtin().get(AgentName::kDebug);
  const std::vector<ErrorFeedback> errs = {
      {"Syntax", "lint", 3, "syntax error near 'endmodule'",
       "   1 | module m(input a, output b);\n   2 |   assign b = a\n>  3 | endmodule\n", ""},
      {"TypeMismatch", "lint", 2, "b is not a valid l-value", ">  2 |   always @* b = a;\n",
       "Replace logic with reg"}};
  const auto r = build_prompt(dbg, spec_of("m", "buffer"), "", errs, {0.1, 512});
  EXPECT_NE(r.user_prompt.find("=== ERRORS TO FIX ===\n"), std::string::npos);
  EXPECT_NE(r.user_prompt.find("[1] Syntax (lint) at line 3: syntax error near 'endmodule'\n"
                               "   1 | module m(input a, output b);\n"),
            std::string::npos);
  EXPECT_NE(r.user_prompt.find("[2] TypeMismatch (lint) at line 2: b is not a valid l-value\n"
                               ">  2 |   always @* b = a;\nHint: Replace logic with reg\n"),
            std::string::npos);
  EXPECT_EQ(r.temperature, 0.1);
  EXPECT_EQ(r.max_tokens, 512);
  EXPECT_EQ(r, build_prompt(dbg, spec_of("m", "buffer"), "", errs, {0.1, 512}));
}

TEST(BuildPrompt, SectionsForHeaderAndRag) {
  auto s = spec_of("m", "desc");
  s.interface_header = "module m(input a, output b);";
  const auto r = build_prompt(AgentProfiles::builtin().get(AgentName::kGenius), s, "### [1] Adder\n");
  EXPECT_EQ(count_sections(r.user_prompt), 3);
  EXPECT_LT(r.user_prompt.find("=== INTERFACE ==="), r.user_prompt.find("=== REFERENCE CONTEXT ==="));
}

TEST(MockBackend, ScriptedEchoAndIsolation) {
  MockBackend mock({"module m; endmodule", "second reply"});
  CompletionRequest req;
  req.system_prompt = "sys words here";
  req.user_prompt = "user";
  req.temperature = 0.3;
  const auto a = mock.complete(req);
  EXPECT_EQ(a.text, "module m; endmodule");
  EXPECT_EQ(a.output_tokens, 3);
  EXPECT_EQ(a.input_tokens, 4);
  const auto b = mock.complete(req);
  EXPECT_EQ(b.text, "second reply");
  EXPECT_THROW(mock.complete(req), ScriptExhausted);
  const auto log = mock.requests();
  ASSERT_EQ(log.size(), 3u);
  // No request carries earlier replies.
  for (const auto& r : log) EXPECT_EQ(r, req);
}

TEST(Remote, PayloadForwardsTemperature) {
  CompletionRequest req{"m1", "sys", "usr", 0.37, 99};
  const auto p = remote_payload(req);
  EXPECT_EQ(p["temperature"].get<double>(), 0.37);
  EXPECT_EQ(p["max_tokens"], 99);
  EXPECT_EQ(p["model"], "m1");
  EXPECT_EQ(p["system"], "sys");
  EXPECT_EQ(p["messages"][0]["content"], "usr");
  EXPECT_EQ(parse_remote_response(json::parse(R"({"choices":[{"message":{"content":"x"}}],
      "usage":{"prompt_tokens":3,"completion_tokens":4}})")).output_tokens, 4);
  EXPECT_EQ(parse_remote_response(json::parse(R"({"content":[{"text":"a"},{"text":"b"}]})")).text, "ab");
  EXPECT_THROW(parse_remote_response(json::parse(R"({"x":1})")), BackendError);
}

class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> h) {
    server_.Post("/v1/chat", std::move(h));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteConfig config_for(std::string url, std::vector<double>* sleeps) {
  RemoteConfig c;
  c.url = std::move(url);
  c.api_key = "secret";
  c.timeout_s = 5;
  c.sleep = [sleeps](double s) { sleeps->push_back(s); };
  return c;
}

TEST(Remote, RoundTripThroughLocalServer) {
  json seen;
  std::string auth;
  LocalServer srv([&](const httplib::Request& rq, httplib::Response& rs) {
    seen = json::parse(rq.body);
    auth = rq.get_header_value("Authorization");
    rs.set_content(R"({"text":"module m; endmodule","usage":{"input_tokens":7,"output_tokens":3}})",
                   "application/json");
  });
  std::vector<double> sleeps;
  RemoteBackend be(config_for(srv.url(), &sleeps));
  const auto r = be.complete({"m", "s", "u", 0.42, 128});
  EXPECT_EQ(r.text, "module m; endmodule");
  EXPECT_EQ(r.input_tokens, 7);
  EXPECT_EQ(seen["temperature"].get<double>(), 0.42);
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_TRUE(sleeps.empty());
}

TEST(Remote, RetriesServerErrorsWithBackoff) {
  int hits = 0;
  LocalServer srv([&](const httplib::Request&, httplib::Response& rs) {
    ++hits;
    rs.status = 503;
  });
  std::vector<double> sleeps;
  RemoteBackend be(config_for(srv.url(), &sleeps));
  EXPECT_THROW(be.complete({}), TransportError);
  EXPECT_EQ(hits, 3);
  EXPECT_EQ(sleeps, (std::vector<double>{1.0, 2.0}));
}

TEST(Remote, ClientErrorIsNotRetried) {
  int hits = 0;
  LocalServer srv([&](const httplib::Request&, httplib::Response& rs) {
    ++hits;
    rs.status = 400;
  });
  std::vector<double> sleeps;
  RemoteBackend be(config_for(srv.url(), &sleeps));
  EXPECT_THROW(be.complete({}), BackendError);
  EXPECT_EQ(hits, 1);
}

TEST(Remote, UnreachableEndpointFailsAfterAttempts) {
  std::string url;
  {
    LocalServer srv([](const httplib::Request&, httplib::Response&) {});
    url = srv.url();
  }
  std::vector<double> sleeps;
  RemoteBackend be(config_for(url, &sleeps));
  EXPECT_THROW(be.complete({}), TransportError);
  EXPECT_EQ(sleeps.size(), 2u);
}

TEST(ExtractCode, Shapes) {
  EXPECT_EQ(extract_code("Here:\n```verilog\nmodule m(input a);\n  wire x;\nendmodule\n```\nDone."),
            "module m(input a);\n  wire x;\nendmodule\n");
  EXPECT_EQ(extract_code("The module below works.\nmodule m (input a, output b);\n"
                         "assign b = a;\nendmodule\nHope this helps."),
            "module m (input a, output b);\nassign b = a;\nendmodule\n");
  const auto two = extract_code("```verilog\nmodule a(); endmodule\n```\ntext\n```\nmodule b(); endmodule\n```");
  EXPECT_EQ(two, "module a(); endmodule\nmodule b(); endmodule\n");
  const auto mods = verilog::parse_modules(two);
  ASSERT_EQ(mods.size(), 2u);
  EXPECT_EQ(mods[0].name, "a");
  EXPECT_EQ(mods[1].name, "b");
  EXPECT_THROW(extract_code("I cannot help with that module request."), ExtractionFailed);
}

const char* kCounterHeader = "module counter(input clk, input reset, input en, output reg [3:0] q);";

std::string compliant_tb() {
  return R"(`timescale 1ns/1ps
module tb;
  reg clk, reset, en;
  wire [3:0] q;
  integer errors, samples;
  counter dut (.clk(clk), .reset(reset), .en(en), .q(q));
  initial clk = 0;
  always #5 clk = ~clk;
  initial begin
    errors = 0; samples = 0;
    reset = 1; en = 0;
    #20 reset = 0;
    // Test 1: hold
    // Test 2: count
    // Test 3: wrap
    // Test 4: reset mid-count
    // Test 5: enable toggling
    $display("Mismatches: %0d in %0d samples", errors, samples);
    $finish;
  end
endmodule
)";
}

TEST(Testbench, ComplianceChecks) {
  const auto dut = verilog::parse_header(kCounterHeader);
  const auto ok = check_testbench(compliant_tb(), dut);
  EXPECT_TRUE(ok.ok) << (ok.problems.empty() ? "" : ok.problems[0]);

  auto sv = compliant_tb();
  sv.replace(sv.find("reg clk"), 3, "logic");
  const auto bad = check_testbench(sv, dut);
  EXPECT_FALSE(bad.ok);
  EXPECT_NE(bad.problems[0].find("logic"), std::string::npos);

  auto slow = compliant_tb();
  slow.replace(slow.find("#5 clk"), 2, "#7");
  EXPECT_FALSE(check_testbench(slow, dut).ok);

  auto no_marker = compliant_tb();
  no_marker.replace(no_marker.find("Mismatches:"), 11, "Errors seen");
  EXPECT_FALSE(check_testbench(no_marker, dut).ok);
}

TEST(Testbench, RegeneratesWhenNonCompliant) {
  auto sv = compliant_tb();
  sv.replace(sv.find("reg clk"), 3, "logic");
  MockBackend mock({"```verilog\n" + sv + "```", "```verilog\n" + compliant_tb() + "```"});
  const auto r = generate_testbench(mock, spec_of("counter", "4-bit counter"), kCounterHeader);
  EXPECT_TRUE(r.compliance.ok);
  EXPECT_EQ(r.attempts, 2);
  const auto log = mock.requests();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].user_prompt.find("COMPLIANCE ISSUES"), std::string::npos);
  EXPECT_NE(log[1].user_prompt.find("=== COMPLIANCE ISSUES ===\n- uses SystemVerilog construct 'logic'"),
            std::string::npos);
  EXPECT_NE(log[0].user_prompt.find("10ns clock"), std::string::npos);
  EXPECT_NE(log[0].user_prompt.find("at least 5 test scenarios"), std::string::npos);
}

TEST(AdaptTestbench, WrapsUnderExpectedName) {
  const std::string adder =
      "module adder #(parameter W = 8) (input [W-1:0] a, input [W-1:0] b, output [W:0] s);\n"
      "  assign s = a + b;\nendmodule\n";
  const std::string tb = "module tb; TopModule dut(.a(x), .b(y), .s(z)); endmodule";
  const auto out = adapt_testbench(adder, tb);
  const auto mods = verilog::parse_modules(out);
  ASSERT_EQ(mods.size(), 2u);
  EXPECT_EQ(mods[1].name, "TopModule");
  ASSERT_EQ(mods[1].ports.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(mods[1].ports[i].name, mods[0].ports[i].name);
    EXPECT_EQ(mods[1].ports[i].direction, mods[0].ports[i].direction);
    EXPECT_EQ(mods[1].ports[i].range, mods[0].ports[i].range);
  }
  EXPECT_NE(out.find("adder #(.W(W)) u_dut (\n        .a(a),\n        .b(b),\n        .s(s)\n    );"),
            std::string::npos);
  EXPECT_EQ(out.rfind(adder, 0), 0u);
}

TEST(AdaptTestbench, IdentityAndMismatch) {
  const std::string top = "module TopModule(input a, output b); assign b = a; endmodule\n";
  EXPECT_EQ(adapt_testbench(top, "TopModule t(.a(a), .b(b));"), top);
  const std::string dropped = "module m(input a, output b); assign b = a; endmodule\n";
  try {
    adapt_testbench(dropped, "TopModule t(.a(a), .b(b), .en(en));");
    FAIL() << "expected PortMismatchError";
  } catch (const PortMismatchError& e) {
    EXPECT_EQ(e.missing(), std::vector<std::string>{"en"});
    EXPECT_TRUE(e.extra().empty());
    EXPECT_NE(std::string(e.what()).find("en"), std::string::npos);
  }
}

TEST(Generate, FlagsExtractionFailure) {
  MockBackend mock({"no code here"});
  const auto g = generate(mock, AgentProfiles::builtin().get(AgentName::kFast), spec_of("m", "x"));
  EXPECT_TRUE(g.extraction_failed);
  EXPECT_EQ(g.raw_response, "no code here");
}

}  // namespace
}  // namespace rtlforge::agents
