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

#include <array>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtlforge/nn.hpp"
#include "rtlforge/spec.hpp"

namespace rtlforge::guidance {

// ------------------------------------------------------------------ registry

/// Boolean tree over case-insensitive substring predicates.
struct Trigger {
  enum class Op { kPhrase, kAll, kAny };
  Op op = Op::kPhrase;
  std::string phrase;  // lower-cased
  std::vector<Trigger> children;

  bool matches(std::string_view lowered_text) const;
};

Trigger trigger_from_json(const nlohmann::json& j);
nlohmann::json trigger_to_json(const Trigger& t);

enum class DetectorKind { kSemantic, kFixtureGrounded };

struct Detector {
  std::string id;
  int priority = 0;
  DetectorKind kind = DetectorKind::kSemantic;
  std::string band;
  Trigger trigger;
  std::string guidance;
};

inline constexpr int kMinGuidanceLines = 10;
inline constexpr int kMaxGuidanceLines = 200;

class Registry {
 public:
  Registry() = default;
  /// Sorts by priority; throws ConfigError on duplicate priorities or ids,
  /// or guidance outside 10..200 lines.
  explicit Registry(std::vector<Detector> detectors);

  static const Registry& builtin();
  static Registry from_json(const nlohmann::json& j);
  /// Empty path loads the builtin registry.
  static Registry load(const std::string& path);

  const std::vector<Detector>& detectors() const { return detectors_; }

 private:
  std::vector<Detector> detectors_;
};

struct Enrichment {
  Spec spec;
  std::vector<std::string> fired;  // detector ids in priority order
};

/// Appends the guidance of every detector whose trigger matches the
/// original description, in ascending priority order.
Enrichment enrich_spec(const Spec& spec, const Registry& registry = Registry::builtin());

// ---------------------------------------------------------------------- gate

enum class GateConfig {
  kMinimal,
  kFsmOnly,
  kProtocolFocused,
  kMemoryFocused,
  kDeterministicKmap,
  kFullStack,
};
inline constexpr int kNumGateConfigs = 6;
std::string_view gate_config_name(GateConfig c);

inline constexpr int kGateFeatures = 20;
using GateFeatures = std::array<double, kGateFeatures>;
using GateProbs = std::array<double, kNumGateConfigs>;

/// Exponentially weighted pass rate per design category (decay 0.9,
/// 0.5 before any run). Thread-safe.
class PassRateHistory {
 public:
  static constexpr double kDecay = 0.9;
  static constexpr double kPrior = 0.5;

  double rate(Category c) const;
  void record(Category c, bool success);

 private:
  mutable std::mutex mu_;
  std::map<Category, double> rates_;
};

/// Layout: [0..5] category one-hot; [6..13] keyword flags (kmap, waveform,
/// fsm, protocol, memory, counter, pipeline, arithmetic); [14] length/2000;
/// [15] components/5; [16] widest bus/64; [17] context RTL present;
/// [18] historical pass rate; [19] interface header present.
GateFeatures gate_features(const Spec& spec, const PassRateHistory* history = nullptr);

class GateModel {
 public:
  /// Zero-initialized 20-64-32-6 network.
  GateModel();
  static GateModel random(std::uint64_t seed);

  GateProbs forward(const GateFeatures& x) const;
  nn::Mlp& network() { return net_; }
  const nn::Mlp& network() const { return net_; }

  void save(const std::string& path) const;
  static GateModel load(const std::string& path);

 private:
  nn::Mlp net_;
};

/// Throws ShapeMismatch when the weights are not shaped 20-64-32-6.
GateProbs gate_forward(const GateFeatures& x, const GateModel& model);

/// Argmax with ties to the earliest config; symbolic specs always get
/// DeterministicKmap.
GateConfig select_config(const GateProbs& probs, bool symbolic = false);

struct GateSample {
  GateFeatures features{};
  GateProbs labels{};  // per-config success in {0, 1}
};

struct GateTrainOptions {
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct GateTrainResult {
  GateModel model;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;
};

/// Mean binary cross-entropy over samples and the six outputs.
double gate_loss(const GateModel& model, const std::vector<GateSample>& data);
/// Gradient of gate_loss with respect to the flat parameters.
std::vector<double> gate_gradient(const GateModel& model, const std::vector<GateSample>& data);

/// Mini-batch gradient descent from `init` (random when absent).
/// Throws EmptyDataset.
GateTrainResult gate_train(const std::vector<GateSample>& data,
                           const GateTrainOptions& opts = {},
                           std::optional<GateModel> init = std::nullopt);

/// Rule-generated labels for warm-start training.
GateProbs synthetic_labels(const GateFeatures& f);
std::vector<GateSample> synthetic_dataset(std::size_t n, std::uint64_t seed);

}  // namespace rtlforge::guidance
