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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtlforge/rng.hpp"

namespace rtlforge::nn {

/// Named tensor as stored in checkpoint files.
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

/// {"format":"rtlforge-tensors","version":1,"kind":..,"tensors":[..]}
nlohmann::json tensors_to_json(const std::string& kind, const std::vector<Tensor>& tensors);
/// Throws ShapeMismatch when the kind differs or a shape disagrees with its data.
std::vector<Tensor> tensors_from_json(const nlohmann::json& j, const std::string& kind);
void save_tensors(const std::string& path, const std::string& kind,
                  const std::vector<Tensor>& tensors);
std::vector<Tensor> load_tensors(const std::string& path, const std::string& kind);

enum class Activation { kIdentity, kRelu, kSigmoid };

double sigmoid(double x);

/// Fully connected network with parameters in one flat vector. Layer l
/// stores its weights row-major (out x in) followed by its biases.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, Activation hidden, Activation output);

  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Uniform(-b, b) weights with b = sqrt(6 / (in + out)); zero biases.
  void init(Rng& rng);

  struct Trace {
    std::vector<std::vector<double>> inputs;  // input to each layer
    std::vector<std::vector<double>> pre;     // pre-activation per layer
    std::vector<double> output;
  };

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Trace& trace) const;

  /// Accumulates into `grad` (size num_params) the gradient given
  /// dLoss/d(pre-activation of the last layer).
  void backward(const Trace& trace, std::span<const double> grad_last_pre,
                std::span<double> grad) const;

  std::vector<Tensor> to_tensors() const;
  /// Throws ShapeMismatch unless the tensors match this network's sizes.
  void load_tensors(const std::vector<Tensor>& tensors);

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1];
  }

  std::vector<int> sizes_;
  Activation hidden_ = Activation::kRelu;
  Activation output_ = Activation::kIdentity;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace rtlforge::nn
