#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "uvrec/losses.hpp"
#include "uvrec/nets.hpp"

using namespace uvrec;

namespace {

Tensor identity_rows(const std::vector<std::size_t>& order, std::size_t d) {
  Tensor t = Tensor::matrix(order.size(), d);
  for (std::size_t i = 0; i < order.size(); ++i) t(i, order[i]) = 1.0;
  return t;
}

Tensor random_unit_rows(std::size_t n, std::size_t d, RngStream& rng) {
  Tensor t = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0;
    for (std::size_t j = 0; j < d; ++j) ss += std::pow(t(i, j) = rng.normal(), 2);
    for (std::size_t j = 0; j < d; ++j) t(i, j) /= std::sqrt(ss);
  }
  return t;
}

}  // namespace

TEST_CASE("contrastive closed forms") {
  const Tensor one = identity_rows({0}, 3);
  const auto single = contrastive_loss(one, one, 0.07);
  CHECK(single.total == 0.0);
  CHECK(single.accuracy == 1.0);

  const Tensor pair = identity_rows({0, 1}, 2);
  const auto r = contrastive_loss(pair, pair, 1.0);
  const double expect = std::log(1.0 + std::exp(-1.0));
  CHECK(std::abs(r.vis_to_img - expect) < 1e-9);
  CHECK(std::abs(r.img_to_vis - expect) < 1e-9);
  CHECK(std::abs(r.total - 0.31326168751822286) < 1e-9);
  CHECK(r.accuracy == 1.0);

  Tape tape;
  CHECK(std::abs(tape.scalar(contrastive_loss(tape, tape.constant(pair), tape.constant(pair), 1.0)) - expect) < 1e-9);

  CHECK_THROWS_AS(contrastive_loss(Tensor::matrix(0, 2), Tensor::matrix(0, 2), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(contrastive_loss(Tensor({1, 2}, {1.0, 1.0}), Tensor({1, 2}, {1.0, 0.0}), 1.0),
                  std::invalid_argument);
}

TEST_CASE("contrastive symmetry and tape agreement") {
  RngStream rng(21, 0);
  const Tensor a = random_unit_rows(6, 5, rng), b = random_unit_rows(6, 5, rng);
  const auto ab = contrastive_loss(a, b, 0.07), ba = contrastive_loss(b, a, 0.07);
  CHECK(ab.vis_to_img == ba.img_to_vis);
  CHECK(ab.img_to_vis == ba.vis_to_img);
  CHECK(std::accumulate(ab.row_loss.begin(), ab.row_loss.end(), 0.0) / 6 == doctest::Approx(ab.total));
  Tape tape;
  CHECK(tape.scalar(contrastive_loss(tape, tape.constant(a), tape.constant(b), 0.07)) ==
        doctest::Approx(ab.total).epsilon(1e-12));
}

TEST_CASE("contrastive accuracy over permutations") {
  CHECK(contrastive_accuracy(identity_rows({0, 1, 2}, 3), identity_rows({0, 1, 2}, 3)) == 1.0);
  std::vector<std::size_t> perm{0, 1, 2};
  double total = 0;
  int count = 0;
  do {
    total += contrastive_accuracy(identity_rows({0, 1, 2}, 3), identity_rows(perm, 3));
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(count == 6);
  CHECK(total / count == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("mse") {
  RngStream rng(22, 0);
  Tensor x = Tensor::matrix(7, 3), y = Tensor::matrix(7, 3);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = x[i] + 0.3;
  }
  CHECK(mse(x, x) == 0.0);
  CHECK(std::abs(mse(x, y) - 0.09) < 1e-12);
  for (double& v : y.raw()) v = rng.normal();
  double direct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) direct += (y[i] - x[i]) * (y[i] - x[i]);
  CHECK(std::abs(mse(x, y) - direct / 21) < 1e-12);
  Tape tape;
  CHECK(std::abs(tape.scalar(mse(tape, tape.constant(x), tape.constant(y))) - direct / 21) < 1e-12);
  CHECK_THROWS_AS(mse(x, Tensor::matrix(3, 7)), std::invalid_argument);
}

TEST_CASE("pretraining total") {
  CHECK(scm_loss(0.0166, 0.0489, 0.0055, 1.0) == doctest::Approx(0.0710).epsilon(1e-12));
  CHECK(scm_loss(0.2, 0.3, 5.0, 0.0) == 0.5);
}

TEST_CASE("amplitude-weighted spectral loss") {
  SUBCASE("zero error") {
    Tensor t = Tensor::matrix(4, 2, 0.5);
    CHECK(idr_loss(t, t) == 0.0);
  }
  SUBCASE("uniform amplitude and error") {
    for (double d : {0.1, 0.37, 2.0}) {
      Tensor target = Tensor::matrix(9, 2), est = Tensor::matrix(9, 2);
      for (std::size_t i = 0; i < 9; ++i) {
        const double phase = 0.7 * static_cast<double>(i);
        target(i, 0) = 1.5 * std::cos(phase);
        target(i, 1) = 1.5 * std::sin(phase);
        est(i, 0) = target(i, 0) + d * std::cos(2 * phase);
        est(i, 1) = target(i, 1) + d * std::sin(2 * phase);
      }
      CHECK(std::abs(idr_loss(est, target) - 2 * d * d * d) < 1e-12);
    }
  }
  SUBCASE("direct recomputation and cubic scaling") {
    RngStream rng(23, 0);
    Tensor target = Tensor::matrix(16, 2), est = Tensor::matrix(16, 2);
    for (std::size_t i = 0; i < target.size(); ++i) {
      target[i] = rng.normal();
      est[i] = target[i] + 0.2 * rng.normal();
    }
    double peak = 0;
    for (std::size_t i = 0; i < 16; ++i) peak = std::max(peak, std::hypot(target(i, 0), target(i, 1)));
    double direct = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double dr = est(i, 0) - target(i, 0), di = est(i, 1) - target(i, 1);
      const double w = (std::hypot(target(i, 0), target(i, 1)) / peak + 1.0) * std::hypot(dr, di);
      direct += w * (dr * dr + di * di);
    }
    CHECK(std::abs(idr_loss(est, target) - direct / 16) < 1e-12);

    Tensor scaled = est;
    for (std::size_t i = 0; i < 32; ++i) scaled[i] = target[i] + 2.0 * (est[i] - target[i]);
    CHECK(idr_loss(scaled, target) == doctest::Approx(8.0 * idr_loss(est, target)).epsilon(1e-12));

    // Tape gradient treats the weights as constants: 2 w d / cells.
    ModelParams p;
    p.add("s", "e", est);
    Tape tape(&p);
    Var l = idr_loss(tape, tape.param("s.e"), target);
    CHECK(std::abs(tape.scalar(l) - direct / 16) < 1e-12);
    tape.backward(l);
    for (std::size_t i = 0; i < 16; ++i) {
      const double dr = est(i, 0) - target(i, 0), di = est(i, 1) - target(i, 1);
      const double w = (std::hypot(target(i, 0), target(i, 1)) / peak + 1.0) * std::hypot(dr, di);
      CHECK(p.at(0).grad(i, 0) == doctest::Approx(2 * w * dr / 16).epsilon(1e-12));
      CHECK(p.at(0).grad(i, 1) == doctest::Approx(2 * w * di / 16).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(idr_loss(Tensor::matrix(4, 2, 1.0), Tensor::matrix(4, 2)), std::invalid_argument);
}
