// SPDX-License-Identifier: Apache-2.0

#include "relscore/image.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace relscore {

void FeatureSet::add(ImageFeature feature) {
  if (feature.x.empty()) {
    throw DataError("feature " + feature.id + ": empty vector");
  }
  if (features_.empty()) {
    dim_ = feature.x.size();
  } else if (feature.x.size() != dim_) {
    throw DimensionError("feature " + feature.id + ": dimension " +
                         std::to_string(feature.x.size()) +
                         " differs from dataset dimension " +
                         std::to_string(dim_));
  }
  if (!by_id_.emplace(feature.id, features_.size()).second) {
    throw DataError("duplicate image id: " + feature.id);
  }
  features_.push_back(std::move(feature));
}

const ImageFeature* FeatureSet::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &features_[it->second];
}

const ImageFeature& FeatureSet::require(const std::string& id) const {
  const ImageFeature* f = find(id);
  if (!f) throw DataError("unknown image id: " + id);
  return *f;
}

FeatureSet load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read features file: " + path);
  FeatureSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError("features file " + path + " line " +
                        std::to_string(lineno) +
                        ": expected image_id<TAB>values");
    }
    ImageFeature f;
    f.id = line.substr(0, tab);
    std::istringstream is(line.substr(tab + 1));
    std::string field;
    while (is >> field) {
      char* end = nullptr;
      double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0') {
        throw FormatError("features file " + path + " line " +
                          std::to_string(lineno) + ": bad number '" + field +
                          "'");
      }
      f.x.push_back(v);
    }
    if (f.x.empty()) {
      throw FormatError("features file " + path + " line " +
                        std::to_string(lineno) + ": no values");
    }
    if (!set.empty() && f.x.size() != set.dim()) {
      throw FormatError("features file " + path + " line " +
                        std::to_string(lineno) + ": expected " +
                        std::to_string(set.dim()) + " values, found " +
                        std::to_string(f.x.size()));
    }
    set.add(std::move(f));
  }
  return set;
}

void write_features(const FeatureSet& features, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write features file: " + path);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const ImageFeature& f = features.at(i);
    out << f.id << "\t";
    for (std::size_t j = 0; j < f.x.size(); ++j) {
      if (j) out << " ";
      out << f.x[j];
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing features file: " + path);
}

GateWorkspace GateWorkspace::leaves(Tape& tape, GateParams& params) {
  return GateWorkspace{tape.leaf(params.w_z), tape.leaf(params.b_z),
                       tape.leaf(params.w_x)};
}

Tensor compute_gate(Tape& tape, const Tensor& u, const GateWorkspace& ws) {
  if (u.shape().size() != 1 || u.shape()[0] != ws.w_z.shape()[0]) {
    throw DimensionError("compute_gate: sentence vector " +
                         shape_str(u.shape()) + " does not match W_z " +
                         shape_str(ws.w_z.shape()));
  }
  (void)tape;
  return sigmoid(add(vecmat(stop_gradient(u), ws.w_z), ws.b_z));
}

Tensor project_gated(Tape& tape, const Tensor& x_dropped, const Tensor& z,
                     const Tensor& w_x) {
  if (x_dropped.shape() != z.shape()) {
    throw DimensionError("project_gated: image vector " +
                         shape_str(x_dropped.shape()) + " does not match gate " +
                         shape_str(z.shape()));
  }
  if (w_x.shape().size() != 2 || w_x.shape()[0] != x_dropped.shape()[0]) {
    throw DimensionError("project_gated: image vector " +
                         shape_str(x_dropped.shape()) + " does not match W_x " +
                         shape_str(w_x.shape()));
  }
  (void)tape;
  return tanh(vecmat(mul(z, x_dropped), w_x));
}

Tensor project_image(Tape& tape, const Tensor& x, const Tensor& z,
                     const Tensor& w_x, double p, Mode mode, Rng& rng) {
  return project_gated(tape, dropout(x, p, mode, rng), z, w_x);
}

}  // namespace relscore
