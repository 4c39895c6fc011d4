// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "relscore/image.hpp"

using namespace relscore;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
  std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

GateParams random_gate(std::size_t h, std::size_t k, std::uint64_t seed) {
  GateParams p(h, k);
  Rng rng(seed);
  for (Parameter* param : p.all()) param->fill_gaussian(rng, 0.1);
  return p;
}

}  // namespace

TEST_CASE("load_features parses well-formed lines") {
  std::string path = temp_file("relscore_feat.tsv",
                               "imgA\t1.0 2.0 3.0 4.0\nimgB\t-1 0 0.5 2e-3\n");
  FeatureSet set = load_features(path);
  CHECK(set.size() == 2);
  CHECK(set.dim() == 4);
  CHECK(set.require("imgB").x[3] == 0.002);
  CHECK(set.find("imgC") == nullptr);
  CHECK_THROWS_WITH_AS(set.require("imgC"), doctest::Contains("imgC"),
                       DataError);
  std::remove(path.c_str());
}

TEST_CASE("ragged dimensions name the offending line") {
  std::string path =
      temp_file("relscore_feat_ragged.tsv", "imgA\t1 2 3 4\nimgB\t1 2 3\n");
  CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("line 2"),
                       FormatError);
  std::remove(path.c_str());
}

TEST_CASE("duplicate image ids are rejected") {
  std::string path =
      temp_file("relscore_feat_dup.tsv", "imgA\t1 2\nimgA\t3 4\n");
  CHECK_THROWS_AS(load_features(path), DataError);
  std::remove(path.c_str());
}

TEST_CASE("missing features file raises an io error") {
  CHECK_THROWS_AS(load_features("/nonexistent/features.tsv"), IoError);
}

TEST_CASE("feature write/load round-trip preserves full precision") {
  FeatureSet set;
  Rng rng(77);
  for (int i = 0; i < 5; ++i) {
    ImageFeature f;
    f.id = "img" + std::to_string(i);
    for (int j = 0; j < 7; ++j) f.x.push_back(gaussian(rng, 0.0, 3.0));
    set.add(std::move(f));
  }
  std::string path = temp_file("relscore_feat_rt.tsv", "");
  write_features(set, path);
  FeatureSet loaded = load_features(path);
  REQUIRE(loaded.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(loaded.at(i).id == set.at(i).id);
    CHECK(loaded.at(i).x == set.at(i).x);
  }
  std::remove(path.c_str());
}

TEST_CASE("gate is 0.5 for zero inputs and saturates with a large bias") {
  std::size_t h = 3, k = 4;
  GateParams p(h, k);  // zeros
  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, p);
  Tensor u = tape.zeros({h});
  Tensor z = compute_gate(tape, u, ws);
  for (double v : z.values()) CHECK(v == 0.5);

  GateParams big(h, k);
  big.b_z.value.assign(k, 50.0);
  Tape tape2;
  GateWorkspace ws2 = GateWorkspace::leaves(tape2, big);
  Tensor z2 = compute_gate(tape2, tape2.zeros({h}), ws2);
  for (double v : z2.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("2-dim gate matches hand computation") {
  GateParams p(2, 2);
  p.w_z.value = {0.5, -1.0, 2.0, 0.25};  // rows: u dims, cols: features
  p.b_z.value = {0.1, -0.2};
  std::vector<double> u = {0.3, -0.7};

  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, p);
  Tensor z = compute_gate(tape, tape.constant({2}, u), ws);

  for (std::size_t c = 0; c < 2; ++c) {
    double pre = p.b_z.value[c] + u[0] * p.w_z.value[0 * 2 + c] +
                 u[1] * p.w_z.value[1 * 2 + c];
    CHECK(z.at(c) == doctest::Approx(1.0 / (1.0 + std::exp(-pre))).epsilon(1e-12));
  }
}

TEST_CASE("gate blocks gradient into u but not into its own weights") {
  std::size_t h = 3, k = 4;
  GateParams gate = random_gate(h, k, 5);
  Parameter u("u", {h});
  u.value = {0.5, -0.3, 0.9};

  auto loss_fn = [&]() {
    Tape tape;
    GateWorkspace ws = GateWorkspace::leaves(tape, gate);
    return sum(compute_gate(tape, tape.leaf(u), ws)).value();
  };

  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, gate);
  tape.backward(sum(compute_gate(tape, tape.leaf(u), ws)));

  // The disconnect: exactly zero into u, by construction.
  for (double g : u.grad) CHECK(g == 0.0);

  // W_z and b_z receive real gradients that match finite differences.
  bool any = false;
  for (double g : gate.w_z.grad) any = any || g != 0.0;
  CHECK(any);
  auto rw = oracles::check_gradient(gate.w_z, gate.w_z.grad, loss_fn);
  CHECK_MESSAGE(rw.ok(), rw.detail);
  auto rb = oracles::check_gradient(gate.b_z, gate.b_z.grad, loss_fn);
  CHECK_MESSAGE(rb.ok(), rb.detail);
}

TEST_CASE("a transparent gate reduces projection to tanh(x W_x)") {
  std::size_t h = 2, k = 3;
  GateParams p = random_gate(h, k, 7);
  std::vector<double> x = {1.0, -2.0, 0.5};

  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, p);
  Tensor ones = tape.constant({k}, std::vector<double>(k, 1.0));
  Tensor v = project_gated(tape, tape.constant({k}, x), ones, ws.w_x);

  for (std::size_t c = 0; c < h; ++c) {
    double pre = 0.0;
    for (std::size_t j = 0; j < k; ++j) pre += x[j] * p.w_x.value[j * h + c];
    CHECK(v.at(c) == doctest::Approx(std::tanh(pre)).epsilon(1e-12));
  }
}

TEST_CASE("zero image vector projects to zero") {
  GateParams p = random_gate(2, 3, 9);
  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, p);
  Tensor half = tape.constant({3}, {0.5, 0.5, 0.5});
  Tensor v = project_gated(tape, tape.zeros({3}), half, ws.w_x);
  for (double c : v.values()) CHECK(c == 0.0);
}

TEST_CASE("3-dim projection matches hand computation") {
  std::size_t h = 2, k = 3;
  GateParams p(h, k);
  p.w_x.value = {0.2, -0.4, 1.0, 0.3, -0.6, 0.1};
  std::vector<double> x = {2.0, 1.0, -1.0};
  std::vector<double> z = {0.9, 0.1, 0.5};

  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, p);
  Tensor v = project_gated(tape, tape.constant({k}, x),
                           tape.constant({k}, z), ws.w_x);
  for (std::size_t c = 0; c < h; ++c) {
    double pre = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      pre += z[j] * x[j] * p.w_x.value[j * h + c];
    }
    CHECK(v.at(c) == doctest::Approx(std::tanh(pre)).epsilon(1e-12));
  }
  // All components strictly inside (-1, 1).
  for (double c : v.values()) {
    CHECK(c > -1.0);
    CHECK(c < 1.0);
  }
}

TEST_CASE("a zero gate component makes v independent of that feature") {
  std::size_t h = 3, k = 4;
  GateParams p = random_gate(h, k, 13);
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> z = {0.7, 0.0, 0.4, 0.9};  // feature 1 masked

  auto project = [&](const std::vector<double>& xv) {
    Tape tape;
    GateWorkspace ws = GateWorkspace::leaves(tape, p);
    return project_gated(tape, tape.constant({k}, xv), tape.constant({k}, z),
                         ws.w_x)
        .values();
  };

  std::vector<double> base = project(x);
  std::vector<double> perturbed_x = x;
  perturbed_x[1] = -50.0;
  CHECK(project(perturbed_x) == base);
}

TEST_CASE("dropout order: mask applies to x before the gate") {
  // With p=1 in train mode the dropped image vector is all zeros, so the
  // projection collapses to zero regardless of the gate.
  GateParams p = random_gate(2, 3, 15);
  Rng rng(1);
  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, p);
  Tensor z = tape.constant({3}, {0.9, 0.9, 0.9});
  Tensor v = project_image(tape, tape.constant({3}, {5, 5, 5}), z, ws.w_x, 1.0,
                           Mode::train, rng);
  for (double c : v.values()) CHECK(c == 0.0);
}

TEST_CASE("projection dimension mismatches raise errors") {
  GateParams p(2, 3);
  Tape tape;
  GateWorkspace ws = GateWorkspace::leaves(tape, p);
  CHECK_THROWS_AS(compute_gate(tape, tape.zeros({5}), ws), DimensionError);
  CHECK_THROWS_AS(project_gated(tape, tape.zeros({4}), tape.zeros({4}), ws.w_x),
                  DimensionError);
}
