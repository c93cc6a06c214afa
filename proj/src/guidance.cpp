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
#include "rtlforge/guidance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "rtlforge/data.hpp"
#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::guidance {

using nlohmann::json;

// ------------------------------------------------------------------ registry

bool Trigger::matches(std::string_view lowered) const {
  switch (op) {
    case Op::kPhrase: return lowered.find(phrase) != std::string_view::npos;
    case Op::kAll:
      return std::all_of(children.begin(), children.end(),
                         [&](const Trigger& t) { return t.matches(lowered); });
    case Op::kAny:
      return std::any_of(children.begin(), children.end(),
                         [&](const Trigger& t) { return t.matches(lowered); });
  }
  return false;
}

Trigger trigger_from_json(const json& j) {
  if (j.is_string()) return {Trigger::Op::kPhrase, text::to_lower(j.get<std::string>()), {}};
  if (!j.is_object() || j.size() != 1)
    throw ConfigError("trigger must be an object with one of all/any/phrase");
  Trigger t;
  if (j.contains("phrase")) {
    t.op = Trigger::Op::kPhrase;
    t.phrase = text::to_lower(j["phrase"].get<std::string>());
    if (t.phrase.empty()) throw ConfigError("empty trigger phrase");
    return t;
  }
  const bool all = j.contains("all");
  if (!all && !j.contains("any")) throw ConfigError("trigger must use all, any or phrase");
  t.op = all ? Trigger::Op::kAll : Trigger::Op::kAny;
  const json& kids = all ? j["all"] : j["any"];
  if (!kids.is_array() || kids.empty()) throw ConfigError("trigger list must be non-empty");
  for (const auto& k : kids) t.children.push_back(trigger_from_json(k));
  return t;
}

json trigger_to_json(const Trigger& t) {
  if (t.op == Trigger::Op::kPhrase) return {{"phrase", t.phrase}};
  json kids = json::array();
  for (const auto& c : t.children) kids.push_back(trigger_to_json(c));
  return {{t.op == Trigger::Op::kAll ? "all" : "any", kids}};
}

Registry::Registry(std::vector<Detector> detectors) : detectors_(std::move(detectors)) {
  std::set<int> priorities;
  std::set<std::string> ids;
  for (const auto& d : detectors_) {
    if (!priorities.insert(d.priority).second)
      throw ConfigError("duplicate detector priority " + std::to_string(d.priority));
    if (!ids.insert(d.id).second) throw ConfigError("duplicate detector id " + d.id);
    const int lines = static_cast<int>(text::split_lines(text::trim(d.guidance)).size());
    if (text::trim(d.guidance).empty() || lines < kMinGuidanceLines || lines > kMaxGuidanceLines)
      throw ConfigError("detector " + d.id + " guidance must be 10 to 200 lines, has " +
                        std::to_string(lines));
  }
  std::sort(detectors_.begin(), detectors_.end(),
            [](const Detector& a, const Detector& b) { return a.priority < b.priority; });
}

const Registry& Registry::builtin() {
  static const Registry r = from_json(json::parse(data::builtin("registry_seed.json")));
  return r;
}

Registry Registry::from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("detectors") ? j["detectors"] : j;
  if (!arr.is_array()) throw ConfigError("registry must be a JSON array of detectors");
  std::vector<Detector> ds;
  for (const auto& e : arr) {
    try {
      Detector d;
      d.id = e.at("id").get<std::string>();
      d.priority = e.at("priority").get<int>();
      const std::string kind = e.value("kind", "semantic");
      if (kind == "semantic") d.kind = DetectorKind::kSemantic;
      else if (kind == "fixture_grounded") d.kind = DetectorKind::kFixtureGrounded;
      else throw ConfigError("unknown detector kind " + kind);
      d.band = e.value("band", "");
      d.trigger = trigger_from_json(e.at("trigger"));
      const json& g = e.at("guidance");
      if (g.is_array()) {
        std::vector<std::string> lines;
        for (const auto& l : g) lines.push_back(l.get<std::string>());
        d.guidance = text::join(lines, "\n");
      } else {
        d.guidance = g.get<std::string>();
      }
      ds.push_back(std::move(d));
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("malformed detector: ") + ex.what());
    }
  }
  return Registry(std::move(ds));
}

Registry Registry::load(const std::string& path) {
  if (path.empty()) return builtin();
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid registry JSON in " + path + ": " + e.what());
  }
}

Enrichment enrich_spec(const Spec& spec, const Registry& registry) {
  Enrichment out{spec, {}};
  const std::string lowered = text::to_lower(spec.description);
  for (const auto& d : registry.detectors()) {
    if (!d.trigger.matches(lowered)) continue;
    out.fired.push_back(d.id);
    out.spec.description += "\n\n### Guidance: " + d.id + "\n" + d.guidance;
  }
  return out;
}

// ---------------------------------------------------------------------- gate

namespace {

constexpr std::string_view kConfigNames[] = {"Minimal",       "FsmOnly",
                                             "ProtocolFocused", "MemoryFocused",
                                             "DeterministicKmap", "FullStack"};

const std::vector<std::vector<std::string>>& keyword_groups() {
  static const std::vector<std::vector<std::string>> g = {
      {"karnaugh map", "k-map", "truth table"},
      {"waveform", "timing diagram"},
      {"state machine", "fsm", "state transition", "moore", "mealy"},
      {"apb", "axi", "ahb", "wishbone", "uart", "spi", "i2c", "handshake", "protocol"},
      {"ram", "rom", "memory", "fifo", "cache", "register file"},
      {"counter", "count"},
      {"pipeline", "pipelined", "stage"},
      {"adder", "multiplier", "alu", "arithmetic", "subtract", "sum"},
  };
  return g;
}

int widest_bus(std::string_view s) {
  int best = 0;
  for (std::size_t i = 0; i < s.size();) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j - i > 4) {
      i = j;
      continue;
    }
    const int n = std::stoi(std::string(s.substr(i, j - i)));
    if (i > 0 && s[i - 1] == '[' && j < s.size() && s[j] == ':') best = std::max(best, n + 1);
    const auto rest = text::to_lower(s.substr(j, 4));
    if (rest == "-bit" || rest == " bit") best = std::max(best, n);
    i = j;
  }
  return best;
}

double bce(double p, double y) {
  constexpr double kEps = 1e-12;
  p = std::clamp(p, kEps, 1.0 - kEps);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

// Accumulates the gradient of the summed BCE over `idx`, scaled by `scale`.
double accumulate(const GateModel& model, const std::vector<GateSample>& data,
                  const std::vector<std::size_t>& idx, double scale, std::vector<double>& grad) {
  double loss = 0.0;
  nn::Mlp::Trace trace;
  std::vector<double> dz(kNumGateConfigs);
  for (auto i : idx) {
    const auto& s = data[i];
    const auto out = model.network().forward(s.features, trace);
    for (int k = 0; k < kNumGateConfigs; ++k) {
      loss += bce(out[k], s.labels[k]);
      dz[k] = (out[k] - s.labels[k]) * scale;
    }
    model.network().backward(trace, dz, grad);
  }
  return loss;
}

}  // namespace

std::string_view gate_config_name(GateConfig c) { return kConfigNames[static_cast<int>(c)]; }

double PassRateHistory::rate(Category c) const {
  std::lock_guard lock(mu_);
  auto it = rates_.find(c);
  return it == rates_.end() ? kPrior : it->second;
}

void PassRateHistory::record(Category c, bool success) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = rates_.try_emplace(c, kPrior);
  it->second = kDecay * it->second + (1.0 - kDecay) * (success ? 1.0 : 0.0);
}

GateFeatures gate_features(const Spec& spec, const PassRateHistory* history) {
  GateFeatures f{};
  const Category cat = effective_category(spec);
  if (cat != Category::kUnknown) f[static_cast<int>(cat)] = 1.0;
  const auto& groups = keyword_groups();
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const auto& k : groups[g])
      if (text::contains_keyword(spec.description, k)) {
        f[6 + g] = 1.0;
        break;
      }
  f[14] = std::min(1.0, static_cast<double>(spec.description.size()) / 2000.0);
  f[15] = std::min(1.0, static_cast<double>(count_components(spec).size()) / 5.0);
  f[16] = std::min(1.0, widest_bus(spec.description) / 64.0);
  f[17] = spec.context_rtl && !spec.context_rtl->empty() ? 1.0 : 0.0;
  f[18] = history ? history->rate(cat) : PassRateHistory::kPrior;
  f[19] = spec.interface_header && !spec.interface_header->empty() ? 1.0 : 0.0;
  return f;
}

GateModel::GateModel()
    : net_({kGateFeatures, 64, 32, kNumGateConfigs}, nn::Activation::kRelu,
           nn::Activation::kSigmoid) {}

GateModel GateModel::random(std::uint64_t seed) {
  GateModel m;
  Rng rng(seed);
  m.net_.init(rng);
  return m;
}

GateProbs GateModel::forward(const GateFeatures& x) const { return gate_forward(x, *this); }

void GateModel::save(const std::string& path) const {
  nn::save_tensors(path, "gate", net_.to_tensors());
}

GateModel GateModel::load(const std::string& path) {
  GateModel m;
  m.net_.load_tensors(nn::load_tensors(path, "gate"));
  return m;
}

GateProbs gate_forward(const GateFeatures& x, const GateModel& model) {
  const auto& sizes = model.network().sizes();
  if (sizes != std::vector<int>{kGateFeatures, 64, 32, kNumGateConfigs})
    throw ShapeMismatch("gate weights must be shaped 20-64-32-6");
  const auto out = model.network().forward(x);
  GateProbs p{};
  std::copy(out.begin(), out.end(), p.begin());
  return p;
}

GateConfig select_config(const GateProbs& probs, bool symbolic) {
  if (symbolic) return GateConfig::kDeterministicKmap;
  int best = 0;
  for (int i = 1; i < kNumGateConfigs; ++i)
    if (probs[i] > probs[best]) best = i;
  return static_cast<GateConfig>(best);
}

double gate_loss(const GateModel& model, const std::vector<GateSample>& data) {
  if (data.empty()) throw EmptyDataset("gate dataset is empty");
  double loss = 0.0;
  for (const auto& s : data) {
    const auto p = model.forward(s.features);
    for (int k = 0; k < kNumGateConfigs; ++k) loss += bce(p[k], s.labels[k]);
  }
  return loss / static_cast<double>(data.size() * kNumGateConfigs);
}

std::vector<double> gate_gradient(const GateModel& model, const std::vector<GateSample>& data) {
  if (data.empty()) throw EmptyDataset("gate dataset is empty");
  std::vector<double> grad(model.network().num_params(), 0.0);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  accumulate(model, data, idx, 1.0 / static_cast<double>(data.size() * kNumGateConfigs), grad);
  return grad;
}

GateTrainResult gate_train(const std::vector<GateSample>& data, const GateTrainOptions& opts,
                           std::optional<GateModel> init) {
  if (data.empty()) throw EmptyDataset("gate dataset is empty");
  GateTrainResult r{init ? std::move(*init) : GateModel::random(opts.seed), 0.0, 0.0, {}};
  r.initial_loss = gate_loss(r.model, data);
  Rng rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, opts.batch_size));
  auto& params = r.model.network().params();
  std::vector<double> grad(params.size());
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.index(static_cast<int>(i)))]);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      std::fill(grad.begin(), grad.end(), 0.0);
      accumulate(r.model, data, batch,
                 1.0 / static_cast<double>(batch.size() * kNumGateConfigs), grad);
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= opts.learning_rate * grad[p];
    }
    r.epoch_loss.push_back(gate_loss(r.model, data));
  }
  r.final_loss = r.epoch_loss.empty() ? r.initial_loss : r.epoch_loss.back();
  return r;
}

GateProbs synthetic_labels(const GateFeatures& f) {
  GateProbs y{};
  const bool any_flag = std::any_of(f.begin() + 6, f.begin() + 14, [](double v) { return v > 0.5; });
  const bool kmap = f[6] > 0.5;
  const bool fsm = f[2] > 0.5 || f[8] > 0.5;
  const bool protocol = f[4] > 0.5 || f[9] > 0.5;
  const bool memory = f[3] > 0.5 || f[10] > 0.5;
  const bool big = f[5] > 0.5 || f[15] >= 0.6 || f[14] > 0.5;
  y[static_cast<int>(GateConfig::kDeterministicKmap)] = kmap ? 1.0 : 0.0;
  y[static_cast<int>(GateConfig::kFsmOnly)] = !kmap && fsm ? 1.0 : 0.0;
  y[static_cast<int>(GateConfig::kProtocolFocused)] = !kmap && protocol ? 1.0 : 0.0;
  y[static_cast<int>(GateConfig::kMemoryFocused)] = !kmap && memory ? 1.0 : 0.0;
  y[static_cast<int>(GateConfig::kFullStack)] = !kmap && big ? 1.0 : 0.0;
  y[static_cast<int>(GateConfig::kMinimal)] =
      !any_flag && !fsm && !protocol && !memory && !big ? 1.0 : 0.0;
  return y;
}

std::vector<GateSample> synthetic_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GateSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    GateSample s;
    const int cat = rng.index(kNumKnownCategories + 1);
    if (cat < kNumKnownCategories) s.features[cat] = 1.0;
    for (int k = 6; k < 14; ++k) s.features[k] = rng.uniform() < 0.2 ? 1.0 : 0.0;
    for (int k = 14; k < 17; ++k) s.features[k] = rng.uniform();
    s.features[17] = rng.uniform() < 0.3 ? 1.0 : 0.0;
    s.features[18] = rng.uniform();
    s.features[19] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    s.labels = synthetic_labels(s.features);
    out.push_back(s);
  }
  return out;
}

}  // namespace rtlforge::guidance
