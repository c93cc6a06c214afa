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
#include "rtlforge/knowledge.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::kb {
namespace {

namespace fs = std::filesystem;

KnowledgeEntry entry(std::string id, std::string title, std::string desc,
                     std::vector<std::string> kw = {},
                     std::optional<std::string> tmpl = std::nullopt,
                     EntryCategory cat = EntryCategory::kPattern) {
  return {std::move(id), std::move(title), std::move(desc), std::move(kw), std::move(tmpl), cat};
}

RetrievalQuery query(std::string text, Focus f = Focus::kComprehensive, int k = 5) {
  RetrievalQuery q;
  q.spec_text = std::move(text);
  q.focus = f;
  q.k = k;
  return q;
}

TEST(ScoreEntry, WeightTable) {
  const auto q = query("synchronous fifo");
  EXPECT_DOUBLE_EQ(score_entry(entry("t", "Synchronous FIFO", "unrelated words"), q), 0.4);
  EXPECT_DOUBLE_EQ(score_entry(entry("d", "Queue", "a synchronous fifo design"), q), 0.2);
  EXPECT_DOUBLE_EQ(score_entry(entry("k", "Queue", "storage", {"fifo"}), q), 0.3);
  EXPECT_DOUBLE_EQ(score_entry(entry("k2", "Queue", "storage", {"fifo", "lifo"}), q), 0.15);
  EXPECT_DOUBLE_EQ(score_entry(entry("tt", "Synchronous FIFO", "other", {}, "module m; endmodule"), q),
                   0.5);
  EXPECT_DOUBLE_EQ(
      score_entry(entry("full", "Synchronous FIFO", "synchronous fifo", {"fifo"}, "module m; endmodule"), q),
      1.0);
  EXPECT_DOUBLE_EQ(score_entry(entry("none", "Adder", "sum", {}, "module m; endmodule"), q), 0.0);
}

TEST(ScoreEntry, MonotoneInMatchingKeywords) {
  const auto q = query("uart transmitter with baud divider");
  auto e = entry("u", "Serial port", "transmits bytes", {"uart", "spi"});
  const double before = score_entry(e, q);
  e.keywords.push_back("baud");
  EXPECT_GE(score_entry(e, q), before);
}

TEST(Retrieve, TopKAndTieOrder) {
  std::vector<KnowledgeEntry> es;
  for (int i = 0; i < 10; ++i) {
    std::string title = i < 4 ? "counter" : "widget";
    es.push_back(entry("e" + std::to_string(9 - i), title, "counter design " + std::to_string(i)));
  }
  KnowledgeBase kb(es);
  auto r = retrieve(kb, {}, query("counter", Focus::kComprehensive, 3));
  ASSERT_EQ(r.size(), 3u);
  // Four entries tie on score 0.6; ascending id wins.
  EXPECT_EQ(r[0].entry.id, "e6");
  EXPECT_EQ(r[1].entry.id, "e7");
  EXPECT_EQ(r[2].entry.id, "e8");
}

TEST(Retrieve, FocusRules) {
  const auto& kb = KnowledgeBase::builtin();
  for (const char* text : {"pipeline cache interrupt", "fifo arbiter cpu", "latch area timing"}) {
    for (auto e : retrieve(kb, {}, query(text, Focus::kPatternFocused, 20)))
      EXPECT_EQ(e.entry.category, EntryCategory::kPattern);
  }
  KnowledgeBase small({entry("a", "latch", "x", {}, std::nullopt, EntryCategory::kPattern),
                       entry("b", "latch", "x", {}, std::nullopt, EntryCategory::kOptimization)});
  auto s = retrieve(small, {}, query("latch", Focus::kSynthesisFocused, 3));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].entry.id, "b");
  EXPECT_DOUBLE_EQ(s[0].score, 0.4 * kFocusBoost);

  auto plain = retrieve(small, {}, query("counter", Focus::kErrorFocused, 3));
  EXPECT_TRUE(plain.empty());
  auto err = query("counter", Focus::kErrorFocused, 3);
  err.error_context = "latch inferred";
  EXPECT_EQ(retrieve(small, {}, err).size(), 2u);
}

TEST(Retrieve, ReferenceModulesOnlyInComprehensive) {
  KnowledgeBase kb({entry("a", "adder", "adds")});
  ReferenceModule m;
  m.id = "lib/fifo";
  m.name = "sync_fifo";
  m.synopsis = "synchronous fifo buffer";
  m.domain = "Flow control";
  const ReferenceModule lib[] = {m};
  auto r = retrieve(kb, lib, query("fifo buffer"));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].from_reference);
  EXPECT_EQ(r[0].entry.id, "ref:lib/fifo");
  EXPECT_TRUE(retrieve(kb, lib, query("fifo buffer", Focus::kPatternFocused)).empty());
}

TEST(Retrieve, PrefixPropertySeeded) {
  const auto& kb = KnowledgeBase::builtin();
  std::vector<std::string> vocab;
  for (const auto& e : kb.entries())
    for (const auto& w : text::content_terms(e.title + " " + e.description)) vocab.push_back(w);
  std::mt19937 gen(11);
  for (int q = 0; q < 100; ++q) {
    std::string text;
    for (int i = 0; i < 4; ++i) text += vocab[gen() % vocab.size()] + " ";
    const Focus f = static_cast<Focus>(gen() % kNumFocus);
    auto big = retrieve(kb, {}, query(text, f, 20));
    for (int k = 3; k <= 20; ++k) {
      auto small = retrieve(kb, {}, query(text, f, k));
      ASSERT_LE(small.size(), static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < small.size(); ++i) {
        EXPECT_EQ(small[i].entry.id, big[i].entry.id);
        EXPECT_EQ(small[i].score, big[i].score);
      }
    }
  }
}

TEST(Retrieve, Errors) {
  EXPECT_THROW(retrieve(KnowledgeBase(), {}, query("x")), EmptyKnowledgeBase);
  EXPECT_THROW(retrieve(KnowledgeBase::builtin(), {}, query("x", Focus::kComprehensive, 2)),
               ConfigError);
  EXPECT_THROW(retrieve(KnowledgeBase::builtin(), {}, query("x", Focus::kComprehensive, 21)),
               ConfigError);
}

TEST(KnowledgeBaseLoad, SeedCoversAllCategories) {
  const auto& kb = KnowledgeBase::builtin();
  int counts[3] = {0, 0, 0};
  for (const auto& e : kb.entries()) counts[static_cast<int>(e.category)]++;
  EXPECT_GE(kb.entries().size(), 30u);
  for (int c : counts) EXPECT_GT(c, 0);
  for (const auto& e : kb.entries())
    EXPECT_EQ(entry_from_json(entry_to_json(e)).id, e.id);
  EXPECT_THROW(KnowledgeBase::from_json(nlohmann::json::parse(R"([{"id":"x","title":"","description":"d"}])")),
               ConfigError);
}

TEST(FormatContext, Sections) {
  EXPECT_EQ(format_context({}), "");
  std::vector<ScoredEntry> one = {{entry("a", "Adder", "Adds numbers."), 0.5, false}};
  EXPECT_EQ(format_context(one), "### [1] Adder\nAdds numbers.\n");
  std::vector<ScoredEntry> three = {{entry("a", "A", "da", {}, "module a; endmodule"), 1, false},
                                    {entry("b", "B", "db"), 0.5, false},
                                    {entry("c", "C", "dc"), 0.2, false}};
  EXPECT_EQ(format_context(three),
            "### [1] A\nda\n```verilog\nmodule a; endmodule\n```\n\n"
            "### [2] B\ndb\n\n### [3] C\ndc\n");
}

class IndexTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("rtlforge_index_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  void put(const std::string& rel, const std::string& body) {
    fs::create_directories((root_ / rel).parent_path());
    text::write_file((root_ / rel).string(), body);
  }
  fs::path root_;
};

TEST_F(IndexTest, EmptyDirectory) {
  auto r = index_reference_library(root_.string());
  EXPECT_TRUE(r.modules.empty());
  EXPECT_TRUE(r.rejected.empty());
}

TEST_F(IndexTest, FiltersAndRecords) {
  put("good/adder.v",
      "// Eight-bit adder with carry out.\nmodule adder #(parameter W = 8) (input [W-1:0] a, "
      "input [W-1:0] b, output [W:0] s);\n  assign s = a + b;\nendmodule\n");
  put("bad/broken.v", "module broken(input a output b);\nendmodule\n");
  std::string big = "module big(input a, output b);\n";
  for (int i = 0; i < 2100; ++i) big += "  // filler\n";
  big += "  assign b = a;\nendmodule\n";
  put("big/big.sv", big);
  put("attribution.json",
      R"json({"default": {"source": "example-corp/cores (Apache-2.0)"},
          "files": {"good/adder.v": {"domain": "Datapath", "source": "adders-repo (MIT)"}}})json");
  IndexOptions opts;
  opts.lint = [](const std::string&, const std::string& body) -> std::optional<std::string> {
    if (body.find("input a output") != std::string::npos) return "syntax error";
    return std::nullopt;
  };
  auto r = index_reference_library(root_.string(), opts);
  ASSERT_EQ(r.modules.size(), 1u);
  const auto& m = r.modules[0];
  EXPECT_EQ(m.id, "good/adder");
  EXPECT_EQ(m.name, "adder");
  EXPECT_EQ(m.synopsis, "Eight-bit adder with carry out.");
  EXPECT_EQ(m.domain, "Datapath");
  EXPECT_EQ(m.source_attribution, "adders-repo (MIT)");
  ASSERT_EQ(m.ports.size(), 3u);
  EXPECT_EQ(m.ports[2].name, "s");
  EXPECT_EQ(m.ports[2].direction, "output");
  ASSERT_EQ(m.parameters.size(), 1u);
  EXPECT_EQ(m.parameters[0].second, "8");
  ASSERT_EQ(r.rejected.size(), 2u);
  EXPECT_EQ(r.rejected[0].path, "bad/broken.v");
  EXPECT_EQ(r.rejected[0].reason, "lint");
  EXPECT_EQ(r.rejected[1].path, "big/big.sv");
  EXPECT_EQ(r.rejected[1].reason, "size");

  // Idempotent, and the JSON-lines form round-trips.
  auto again = index_reference_library(root_.string(), opts);
  EXPECT_EQ(index_to_jsonl(again.modules), index_to_jsonl(r.modules));
  text::write_file((root_ / "index.jsonl").string(), index_to_jsonl(r.modules));
  auto loaded = load_index((root_ / "index.jsonl").string(), root_.string());
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].body, m.body);
  EXPECT_EQ(index_to_jsonl(loaded), index_to_jsonl(r.modules));
}

}  // namespace
}  // namespace rtlforge::kb
