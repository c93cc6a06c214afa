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
#include "rtlforge/nn.hpp"

#include <cmath>

#include "rtlforge/errors.hpp"
#include "rtlforge/text.hpp"

namespace rtlforge::nn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "rtlforge-tensors";
constexpr int kVersion = 1;

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

// Derivative with respect to the pre-activation.
double activate_grad(Activation a, double pre) {
  switch (a) {
    case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid: {
      const double s = sigmoid(pre);
      return s * (1.0 - s);
    }
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

json tensors_to_json(const std::string& kind, const std::vector<Tensor>& tensors) {
  json arr = json::array();
  for (const auto& t : tensors)
    arr.push_back({{"name", t.name}, {"shape", t.shape}, {"data", t.data}});
  return {{"format", kFormat}, {"version", kVersion}, {"kind", kind}, {"tensors", arr}};
}

std::vector<Tensor> tensors_from_json(const json& j, const std::string& kind) {
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw ShapeMismatch("not a tensor file");
    if (j.at("version").get<int>() != kVersion)
      throw ShapeMismatch("unsupported tensor file version");
    if (j.at("kind").get<std::string>() != kind)
      throw ShapeMismatch("tensor file holds '" + j.at("kind").get<std::string>() +
                          "', expected '" + kind + "'");
    std::vector<Tensor> out;
    for (const auto& t : j.at("tensors")) {
      Tensor x;
      x.name = t.at("name").get<std::string>();
      x.shape = t.at("shape").get<std::vector<int>>();
      x.data = t.at("data").get<std::vector<double>>();
      std::size_t n = 1;
      for (int d : x.shape) n *= static_cast<std::size_t>(d);
      if (n != x.data.size())
        throw ShapeMismatch("tensor " + x.name + " shape does not match its data");
      out.push_back(std::move(x));
    }
    return out;
  } catch (const json::exception& e) {
    throw ShapeMismatch(std::string("malformed tensor file: ") + e.what());
  }
}

void save_tensors(const std::string& path, const std::string& kind,
                  const std::vector<Tensor>& tensors) {
  text::write_file(path, tensors_to_json(kind, tensors).dump() + "\n");
}

std::vector<Tensor> load_tensors(const std::string& path, const std::string& kind) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw ShapeMismatch("invalid tensor file " + path + ": " + e.what());
  }
  return tensors_from_json(j, kind);
}

Mlp::Mlp(std::vector<int> sizes, Activation hidden, Activation output)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) throw ShapeMismatch("network needs at least two layer sizes");
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw ShapeMismatch("layer sizes must be positive");
    offsets_.push_back(off);
    off += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(off, 0.0);
}

void Mlp::init(Rng& rng) {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
    const std::size_t nw = static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1];
    for (std::size_t i = 0; i < nw; ++i) params_[weight_offset(l) + i] = rng.uniform(-bound, bound);
    for (int i = 0; i < sizes_[l + 1]; ++i) params_[bias_offset(l) + i] = 0.0;
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Trace t;
  return forward(x, t);
}

std::vector<double> Mlp::forward(std::span<const double> x, Trace& trace) const {
  if (static_cast<int>(x.size()) != sizes_.front())
    throw ShapeMismatch("network expects " + std::to_string(sizes_.front()) + " inputs, got " +
                        std::to_string(x.size()));
  trace.inputs.clear();
  trace.pre.clear();
  std::vector<double> cur(x.begin(), x.end());
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    std::vector<double> z(out);
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      for (int i = 0; i < in; ++i) s += w[static_cast<std::size_t>(o) * in + i] * cur[i];
      z[o] = s;
    }
    const Activation act = l + 1 == layers ? output_ : hidden_;
    std::vector<double> a(out);
    for (int o = 0; o < out; ++o) a[o] = activate(act, z[o]);
    trace.inputs.push_back(std::move(cur));
    trace.pre.push_back(std::move(z));
    cur = std::move(a);
  }
  trace.output = cur;
  return cur;
}

void Mlp::backward(const Trace& trace, std::span<const double> grad_last_pre,
                   std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ShapeMismatch("gradient buffer has the wrong size");
  const std::size_t layers = sizes_.size() - 1;
  std::vector<double> delta(grad_last_pre.begin(), grad_last_pre.end());
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const auto& x = trace.inputs[l];
    double* gw = grad.data() + weight_offset(l);
    double* gb = grad.data() + bias_offset(l);
    for (int o = 0; o < out; ++o) {
      gb[o] += delta[o];
      for (int i = 0; i < in; ++i) gw[static_cast<std::size_t>(o) * in + i] += delta[o] * x[i];
    }
    if (l == 0) break;
    const double* w = params_.data() + weight_offset(l);
    std::vector<double> prev(in, 0.0);
    for (int o = 0; o < out; ++o)
      for (int i = 0; i < in; ++i) prev[i] += w[static_cast<std::size_t>(o) * in + i] * delta[o];
    for (int i = 0; i < in; ++i) prev[i] *= activate_grad(hidden_, trace.pre[l - 1][i]);
    delta = std::move(prev);
  }
}

std::vector<Tensor> Mlp::to_tensors() const {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l], o = sizes_[l + 1];
    const auto w0 = params_.begin() + static_cast<std::ptrdiff_t>(weight_offset(l));
    const auto b0 = params_.begin() + static_cast<std::ptrdiff_t>(bias_offset(l));
    out.push_back({"layer" + std::to_string(l) + ".weight", {o, in},
                   std::vector<double>(w0, w0 + static_cast<std::ptrdiff_t>(in) * o)});
    out.push_back({"layer" + std::to_string(l) + ".bias", {o}, std::vector<double>(b0, b0 + o)});
  }
  return out;
}

void Mlp::load_tensors(const std::vector<Tensor>& tensors) {
  const auto expected = to_tensors();
  if (tensors.size() != expected.size())
    throw ShapeMismatch("expected " + std::to_string(expected.size()) + " tensors, got " +
                        std::to_string(tensors.size()));
  std::vector<double> flat;
  flat.reserve(params_.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != expected[i].name || tensors[i].shape != expected[i].shape)
      throw ShapeMismatch("tensor " + tensors[i].name + " does not match " + expected[i].name);
    flat.insert(flat.end(), tensors[i].data.begin(), tensors[i].data.end());
  }
  params_ = std::move(flat);
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ShapeMismatch("optimizer state size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace rtlforge::nn
