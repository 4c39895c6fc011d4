// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "relscore/scoring.hpp"

using namespace relscore;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double sd = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = gaussian(rng, 0.0, sd);
  return v;
}

}  // namespace

TEST_CASE("cosine score basics") {
  std::vector<double> u = {1.0, 2.0, -0.5};
  std::vector<double> nu = {-1.0, -2.0, 0.5};
  CHECK(score_cosine(u, u) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(score_cosine(u, nu) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(score_cosine({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(score_cosine({0, 0}, {1, 1}), NumericError);
}

TEST_CASE("dot score basics and the cosine identity") {
  CHECK(score_dot({1, 2}, {0, 0}) == 0.0);
  CHECK(score_dot({1, 2}, {3, 4}) == 11.0);
  CHECK_THROWS_AS(score_dot({1, 2}, {1, 2, 3}), DimensionError);

  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> u = random_vec(6, rng);
    std::vector<double> v = random_vec(6, rng);
    double nu = std::sqrt(score_dot(u, u));
    double nv = std::sqrt(score_dot(v, v));
    CHECK(score_dot(u, v) ==
          doctest::Approx(score_cosine(u, v) * nu * nv).epsilon(1e-10));
  }
}

TEST_CASE("batch softmax equals 1/B for uniform scores and sums to one") {
  std::vector<double> uniform(5, 1.7);
  for (std::size_t i = 0; i < uniform.size(); ++i) {
    CHECK(batch_softmax(uniform, i) == doctest::Approx(0.2).epsilon(1e-12));
  }

  Rng rng(6);
  std::vector<double> scores = random_vec(7, rng, 3.0);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    total += batch_softmax(scores, i);
  }
  CHECK(std::fabs(total - 1.0) < 1e-9);
}

TEST_CASE("3-pair softmax matches hand-computed exponentials") {
  std::vector<double> scores = {1.0, 0.5, -0.5};
  double z = std::exp(1.0) + std::exp(0.5) + std::exp(-0.5);
  CHECK(batch_softmax(scores, 0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(batch_softmax(scores, 2) == doctest::Approx(std::exp(-0.5) / z).epsilon(1e-12));
}

TEST_CASE("softmax is invariant to a constant shift") {
  Rng rng(7);
  std::vector<double> scores = random_vec(6, rng, 2.0);
  std::vector<double> shifted = scores;
  for (double& s : shifted) s += 123.456;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(std::fabs(batch_softmax(scores, i) - batch_softmax(shifted, i)) < 1e-9);
  }
}

TEST_CASE("softmax rejects non-finite scores") {
  CHECK_THROWS_AS(batch_softmax({1.0, std::nan("")}, 0), NumericError);
}

TEST_CASE("hinge loss trivial cases") {
  // One positive at 1.0, one negative at 0.5, margin 0.2: no violation.
  Tape tape;
  Tensor c1 = tape.constant({2, 2}, {1.0, -9.0, 0.5, 1.0});
  // Column 0: positive 1.0 (diag), negative 0.5. Column 1 kept inert.
  CHECK(hinge_loss(tape, c1, 0.2).value() ==
        doctest::Approx(0.0).epsilon(1e-12));

  // Equal scores: each violation contributes exactly the margin.
  Tensor c2 = tape.constant({2, 2}, {0.5, 0.5, 0.5, 0.5});
  CHECK(hinge_loss(tape, c2, 0.2).value() ==
        doctest::Approx(0.4).epsilon(1e-12));  // two negatives, 0.2 each
}

TEST_CASE("hinge loss matches the brute-force double loop") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t b = 3;
    std::vector<double> scores = random_vec(b * b, rng);
    Tape tape;
    Tensor c = tape.constant({b, b}, scores);
    double got = hinge_loss(tape, c, 0.2).value();
    CHECK(got == doctest::Approx(oracles::brute_hinge(scores, b, 0.2)).epsilon(1e-12));
  }
}

TEST_CASE("hinge loss is zero iff every positive clears the margin") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t b = 4;
    std::vector<double> scores = random_vec(b * b, rng);
    Tape tape;
    double loss = hinge_loss(tape, tape.constant({b, b}, scores), 0.2).value();
    bool all_clear = true;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        if (j == i) continue;
        if (scores[i * b + i] - scores[j * b + i] < 0.2) all_clear = false;
      }
    }
    CHECK((loss == 0.0) == all_clear);
  }
}

TEST_CASE("cross entropy trivial values") {
  // Dominant diagonal: probability ~1, loss ~0.
  Tape tape;
  Tensor c1 = tape.constant({2, 2}, {50.0, -50.0, -50.0, 50.0});
  CHECK(cross_entropy_loss(tape, c1).value() ==
        doctest::Approx(0.0).epsilon(1e-12));

  // Uniform scores over B pairs: loss = B log B.
  for (std::size_t b : {2ul, 3ul, 5ul}) {
    Tensor c = tape.constant({b, b}, std::vector<double>(b * b, 0.3));
    CHECK(cross_entropy_loss(tape, c).value() ==
          doctest::Approx(b * std::log(double(b))).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy matches the brute-force loops") {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t b = 4;
    std::vector<double> scores = random_vec(b * b, rng, 2.0);
    Tape tape;
    double got = cross_entropy_loss(tape, tape.constant({b, b}, scores)).value();
    CHECK(std::fabs(got - oracles::brute_cross_entropy(scores, b)) < 1e-10);
  }
}

TEST_CASE("cross entropy decreases when the positive score rises") {
  Rng rng(11);
  std::size_t b = 3;
  std::vector<double> scores = random_vec(b * b, rng);
  Tape tape;
  double before = cross_entropy_loss(tape, tape.constant({b, b}, scores)).value();
  scores[0 * b + 0] += 0.5;  // raise one positive, negatives fixed
  double after = cross_entropy_loss(tape, tape.constant({b, b}, scores)).value();
  CHECK(after < before);
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Parameter p("scores", {4, 4});
  Rng rng(12);
  p.value = random_vec(16, rng, 1.5);

  auto loss_fn = [&]() {
    Tape tape;
    return cross_entropy_loss(tape, tape.leaf(p)).value();
  };
  Tape tape;
  tape.backward(cross_entropy_loss(tape, tape.leaf(p)));
  auto r = oracles::check_gradient(p, p.grad, loss_fn);
  CHECK_MESSAGE(r.ok(), r.detail);
}

TEST_CASE("hinge gradient matches finite differences") {
  Parameter p("scores", {4, 4});
  Rng rng(13);
  p.value = random_vec(16, rng, 1.0);

  auto loss_fn = [&]() {
    Tape tape;
    return hinge_loss(tape, tape.leaf(p), 0.3).value();
  };
  Tape tape;
  tape.backward(hinge_loss(tape, tape.leaf(p), 0.3));
  auto r = oracles::check_gradient(p, p.grad, loss_fn);
  CHECK_MESSAGE(r.ok(), r.detail);
}

TEST_CASE("score matrices agree with pairwise plain scores") {
  Rng rng(14);
  std::size_t b = 3, h = 5;
  std::vector<std::vector<double>> us, vs;
  for (std::size_t i = 0; i < b; ++i) {
    us.push_back(random_vec(h, rng));
    vs.push_back(random_vec(h, rng));
  }
  for (ScoreKind kind : {ScoreKind::dot, ScoreKind::cosine}) {
    Tape tape;
    std::vector<Tensor> u_rows, v_rows;
    for (std::size_t i = 0; i < b; ++i) {
      u_rows.push_back(tape.constant({h}, us[i]));
      v_rows.push_back(tape.constant({h}, vs[i]));
    }
    Tensor c = score_matrix_shared(tape, stack_rows(u_rows),
                                   stack_rows(v_rows), kind);
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t i = 0; i < b; ++i) {
        double expected = kind == ScoreKind::dot ? score_dot(us[j], vs[i])
                                                 : score_cosine(us[j], vs[i]);
        CHECK(c.at(j * b + i) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gated score matrix places per-sentence projections correctly") {
  Rng rng(15);
  std::size_t b = 3, h = 4;
  std::vector<std::vector<double>> us;
  std::vector<std::vector<std::vector<double>>> v_blocks(b);
  for (std::size_t j = 0; j < b; ++j) us.push_back(random_vec(h, rng));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) v_blocks[i].push_back(random_vec(h, rng));
  }
  Tape tape;
  std::vector<Tensor> u_rows;
  for (std::size_t j = 0; j < b; ++j) u_rows.push_back(tape.constant({h}, us[j]));
  std::vector<Tensor> v_per_image;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<Tensor> rows;
    for (std::size_t j = 0; j < b; ++j) {
      rows.push_back(tape.constant({h}, v_blocks[i][j]));
    }
    v_per_image.push_back(stack_rows(rows));
  }
  Tensor c = score_matrix_gated(tape, stack_rows(u_rows), v_per_image,
                                ScoreKind::dot);
  for (std::size_t j = 0; j < b; ++j) {
    for (std::size_t i = 0; i < b; ++i) {
      CHECK(c.at(j * b + i) ==
            doctest::Approx(score_dot(us[j], v_blocks[i][j])).epsilon(1e-12));
    }
  }
}

TEST_CASE("training batch validation and negative arithmetic") {
  std::vector<Sentence> sents(32);
  std::vector<ImageFeature> images(32);
  TrainingBatch batch;
  for (std::size_t i = 0; i < 32; ++i) {
    images[i].id = "img" + std::to_string(i);
    images[i].x = {1.0};
    batch.sentences.push_back(&sents[i]);
    batch.images.push_back(&images[i]);
  }
  batch.validate();
  auto negatives = batch.negative_pairs();
  CHECK(negatives.size() == 992);  // 32*32 - 32
  for (auto [j, i] : negatives) {
    CHECK(j != i);
    CHECK(batch.images[j]->id != batch.images[i]->id);
  }

  // Duplicate image ids are rejected.
  TrainingBatch dup;
  dup.sentences = {&sents[0], &sents[1]};
  dup.images = {&images[3], &images[3]};
  CHECK_THROWS_AS(dup.validate(), DataError);

  // B = 1 leaves no negatives.
  TrainingBatch tiny;
  tiny.sentences = {&sents[0]};
  tiny.images = {&images[0]};
  CHECK_THROWS_AS(tiny.validate(), ParameterError);
}

TEST_CASE("hinge rejects a non-positive margin") {
  Tape tape;
  Tensor c = tape.constant({2, 2}, {1, 0, 0, 1});
  CHECK_THROWS_AS(hinge_loss(tape, c, 0.0), ParameterError);
  CHECK_THROWS_AS(hinge_loss(tape, c, -0.1), ParameterError);
}
