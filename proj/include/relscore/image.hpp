// SPDX-License-Identifier: Apache-2.0
//
// Precomputed image feature ingestion plus the sentence-conditioned gate and
// projection into the shared space.

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "relscore/tensor.hpp"

namespace relscore {

struct ImageFeature {
  std::string id;
  std::vector<double> x;
};

// All features of one dataset, uniform dimensionality, file order preserved
// so sampling by index is deterministic.
class FeatureSet {
 public:
  void add(ImageFeature feature);

  std::size_t size() const { return features_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return features_.empty(); }

  const ImageFeature& at(std::size_t index) const { return features_.at(index); }
  const ImageFeature* find(const std::string& id) const;
  // Feature for id, or a data error naming the id.
  const ImageFeature& require(const std::string& id) const;

 private:
  std::vector<ImageFeature> features_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t dim_ = 0;
};

// File format: image_id<TAB>v1 v2 ... vK per line. Uniform K enforced,
// duplicate ids rejected.
FeatureSet load_features(const std::string& path);
void write_features(const FeatureSet& features, const std::string& path);

// z = sigmoid(u W_z + b_z) applied to x element-wise, then v = tanh(x' W_x).
// W_x carries no bias.
struct GateParams {
  Parameter w_z;  // H x K
  Parameter b_z;  // K
  Parameter w_x;  // K x H

  GateParams() = default;
  GateParams(std::size_t hidden_dim, std::size_t feature_dim)
      : w_z("gate.w_z", {hidden_dim, feature_dim}),
        b_z("gate.b_z", {feature_dim}),
        w_x("gate.w_x", {feature_dim, hidden_dim}) {}

  std::vector<Parameter*> all() { return {&w_z, &b_z, &w_x}; }
};

struct GateWorkspace {
  Tensor w_z, b_z, w_x;
  static GateWorkspace leaves(Tape& tape, GateParams& params);
};

// Gating weights for one sentence vector. The gradient path from z back
// into u is cut: u optimizes only score prediction while W_z and b_z own
// the gating.
Tensor compute_gate(Tape& tape, const Tensor& u, const GateWorkspace& ws);

// v = tanh((z * x) W_x) for an already dropout-processed feature vector.
// The batch forward draws one mask per image per batch and reuses the
// dropped vector across all sentence pairings.
Tensor project_gated(Tape& tape, const Tensor& x_dropped, const Tensor& z,
                     const Tensor& w_x);

// Dropout on the raw feature vector first, then the element-wise gate, then
// the projection: v = tanh((z * dropout(x)) W_x).
Tensor project_image(Tape& tape, const Tensor& x, const Tensor& z,
                     const Tensor& w_x, double p, Mode mode, Rng& rng);

}  // namespace relscore
