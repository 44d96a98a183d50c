// Copyright 2026 The snnfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "snnfuse/affine.hpp"
#include "snnfuse/fusion.hpp"
#include "snnfuse/neuron.hpp"
#include "snnfuse/rng.hpp"
#include "snnfuse/tensor.hpp"

namespace snnfuse {

struct LifLayer {
  LifParams params;
  std::size_t width = 0;
};

using Layer = std::variant<AffineLayer, LifLayer>;

/// Alternating affine and LIF layers ending in a LIF layer whose width is the
/// class count. A single LIF layer on its own is a valid (monolayer) net.
class SpikingNet {
 public:
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  SpikingNet() = default;
  explicit SpikingNet(std::vector<Layer> l, std::uint64_t s = 0) : layers(std::move(l)), seed(s) {
    validate();
  }

  /// widths = {in, h1, ..., classes}: Affine(in,h1) LIF(h1) ... Affine(.,classes) LIF(classes).
  static SpikingNet mlp(const std::vector<std::size_t>& widths, const LifParams& p,
                        std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("snnfuse: mlp needs at least two widths");
    Rng rng(derive_seed(seed, {0x1417}));
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      layers.emplace_back(AffineLayer::uniform_init(widths[i], widths[i + 1], rng));
      layers.emplace_back(LifLayer{p, widths[i + 1]});
    }
    return SpikingNet(std::move(layers), seed);
  }

  static SpikingNet monolayer(std::size_t width, const LifParams& p) {
    return SpikingNet({LifLayer{p, width}});
  }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("snnfuse: empty network");
    if (!std::holds_alternative<LifLayer>(layers.back())) {
      throw std::invalid_argument("snnfuse: network must end with a LIF layer");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (l > 0 && layers[l].index() == layers[l - 1].index()) {
        throw std::invalid_argument("snnfuse: layers " + std::to_string(l - 1) + " and " +
                                    std::to_string(l) + " do not alternate");
      }
      if (const auto* lif = std::get_if<LifLayer>(&layers[l])) {
        lif->params.validate();
        if (lif->width == 0) throw std::invalid_argument("snnfuse: LIF width must be >= 1");
      }
      if (l > 0 && in_width(l) != out_width(l - 1)) {
        throw std::invalid_argument("snnfuse: width mismatch between layers " +
                                    std::to_string(l - 1) + " and " + std::to_string(l));
      }
    }
  }

  std::size_t in_width(std::size_t l) const {
    if (const auto* a = std::get_if<AffineLayer>(&layers[l])) return a->in_width;
    return std::get<LifLayer>(layers[l]).width;
  }
  std::size_t out_width(std::size_t l) const {
    if (const auto* a = std::get_if<AffineLayer>(&layers[l])) return a->out_width;
    return std::get<LifLayer>(layers[l]).width;
  }
  std::size_t input_width() const { return in_width(0); }
  std::size_t output_width() const { return out_width(layers.size() - 1); }

  std::size_t lif_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += std::holds_alternative<LifLayer>(l) ? 1 : 0;
    return n;
  }
};

/// Everything the backward pass needs. activations[l] is the input of layer
/// l; activations.back() is the network output.
struct ForwardTrace {
  std::vector<TimeMajorTensor> activations;
  /// Engaged for LIF layers only.
  std::vector<std::optional<FusedForwardRecord>> lif_records;

  const TimeMajorTensor& output() const { return activations.back(); }
};

struct NetGrads {
  /// Engaged for affine layers only, indexed like SpikingNet::layers.
  std::vector<std::optional<AffineGrads>> affine;
  /// Gradient w.r.t. the network input.
  TimeMajorTensor g_x;
};

inline bool operator==(const NetGrads& a, const NetGrads& b) {
  return a.affine == b.affine && a.g_x == b.g_x;
}

/// Temporal-major forward: each layer finishes all time steps before the next starts.
inline ForwardTrace forward_pass(const SpikingNet& net, const TimeMajorTensor& x, LifEngine engine) {
  if (x.width() != net.input_width()) {
    throw std::invalid_argument("snnfuse: input width " + std::to_string(x.width()) +
                                " != network input width " + std::to_string(net.input_width()));
  }
  ForwardTrace tr;
  tr.activations.reserve(net.layers.size() + 1);
  tr.lif_records.resize(net.layers.size());
  tr.activations.push_back(x);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const TimeMajorTensor& in = tr.activations.back();
    if (const auto* a = std::get_if<AffineLayer>(&net.layers[l])) {
      tr.activations.push_back(affine_apply(*a, in));
    } else {
      const auto& lif = std::get<LifLayer>(net.layers[l]);
      auto rec = lif_forward(engine, in, LifState::initial(in.batch(), in.width(), lif.params),
                             lif.params);
      tr.activations.push_back(rec.y_hist);
      tr.lif_records[l] = std::move(rec);
    }
  }
  return tr;
}

inline NetGrads backward_pass(const SpikingNet& net, const ForwardTrace& tr,
                              const TimeMajorTensor& g_y, LifEngine engine) {
  if (tr.activations.size() != net.layers.size() + 1) {
    throw std::invalid_argument("snnfuse: forward trace does not match network");
  }
  NetGrads grads;
  grads.affine.resize(net.layers.size());
  TimeMajorTensor g = g_y;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    if (const auto* a = std::get_if<AffineLayer>(&net.layers[l])) {
      auto r = affine_backward(*a, g, tr.activations[l]);
      grads.affine[l] = std::move(r.grads);
      g = std::move(r.g_in);
    } else {
      const auto& lif = std::get<LifLayer>(net.layers[l]);
      const auto& rec = *tr.lif_records[l];
      auto r = lif_backward(engine, g, rec, VoltageGrad(g.batch(), g.width()), lif.params);
      g = std::move(r.g_x);
    }
  }
  grads.g_x = std::move(g);
  return grads;
}

inline void apply_adam(SpikingNet& net, const NetGrads& grads, const AdamConfig& cfg) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (auto* a = std::get_if<AffineLayer>(&net.layers[l])) adam_step(*a, *grads.affine[l], cfg);
  }
}

}  // namespace snnfuse
