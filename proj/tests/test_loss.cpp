#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cotbert/error.hpp"
#include "cotbert/loss.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cotbert;

namespace {

TripletEmbeddings random_triplet(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  return {testing::random_matrix(n, d, rng), testing::random_matrix(n, d, rng), testing::random_matrix(n, d, rng)};
}

constexpr LossVariant kVariants[] = {LossVariant::standard, LossVariant::extended_no_pn, LossVariant::extended};

}  // namespace

TEST_CASE("cosine closed forms") {
  const std::vector<double> v = {0.3, -1.2, 2.0};
  const std::vector<double> minus = {-0.3, 1.2, -2.0};
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(v, minus) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> e1 = {1, 0}, d = {1, 1};
  CHECK(std::abs(cosine(e1, d) - 0.7071067811865475) < 1e-15);
  const std::vector<double> zero = {0, 0};
  CHECK_THROWS_AS(cosine(e1, zero), Error);
}

TEST_CASE("trivial anchors") {
  SUBCASE("standard, one row, anchor equals positive") {
    Matrix a(1, 3);
    a(0, 0) = 0.5; a(0, 1) = -2; a(0, 2) = 1;
    const auto r = contrastive_loss({a, a, Matrix{}}, {0.05, LossVariant::standard});
    CHECK(std::abs(r.loss) < 1e-15);
  }
  SUBCASE("extended, all three identical") {
    Matrix a(1, 4, 0.25);
    const auto r = contrastive_loss({a, a, a}, {0.05, LossVariant::extended});
    CHECK(std::abs(r.loss - std::log(3.0)) < 1e-12);
    CHECK(std::abs(r.loss - 1.0986123) < 1e-7);
  }
}

TEST_CASE("matches the brute-force oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = std::size_t{1} << (trial % 4);
    const std::size_t d = trial % 2 ? 4 : 32;
    const double tau = trial % 3 ? 0.05 : 1.0;
    const auto t = random_triplet(n, d, rng);
    for (auto v : kVariants) {
      std::vector<double> rows;
      const double expected = oracle::contrastive(t.anchor, t.positive, t.negative, tau, v, &rows);
      const auto got = contrastive_loss(t, {tau, v});
      CHECK(testing::rel_diff(got.loss, expected) < 1e-6);
      REQUIRE(got.per_row.size() == n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got.per_row[i] - rows[i]) <= 1e-6 * std::max(1.0, rows[i]));
    }
  }
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(8);
  for (auto v : kVariants) {
    CAPTURE(to_string(v));
    auto t = random_triplet(4, 8, rng);
    if (v == LossVariant::standard) t.negative = Matrix{};
    CHECK(loss_gradient_check(t, {0.05, v}, 1e-3) < 1e-4);
  }
  const auto t = random_triplet(4, 8, rng);
  CHECK_THROWS_AS(loss_gradient_check(t, {}, 0.0), Error);
  try {
    loss_gradient_check(t, {}, 0.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::input);
  }
}

TEST_CASE("gradient of the mean loss has the input shapes") {
  std::mt19937_64 rng(9);
  const auto t = random_triplet(3, 5, rng);
  LossGradient g;
  contrastive_loss(t, {}, &g);
  CHECK(g.anchor.rows() == 3);
  CHECK(g.positive.cols() == 5);
  CHECK(g.negative.rows() == 3);
}

TEST_CASE("variant ordering holds pointwise") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_triplet(1 + trial % 8, 6, rng);
    const auto s = contrastive_loss(t, {0.05, LossVariant::standard});
    const auto p = contrastive_loss(t, {0.05, LossVariant::extended_no_pn});
    const auto e = contrastive_loss(t, {0.05, LossVariant::extended});
    for (std::size_t i = 0; i < s.per_row.size(); ++i) {
      CHECK(e.per_row[i] >= p.per_row[i]);
      CHECK(p.per_row[i] >= s.per_row[i]);
    }
  }
}

TEST_CASE("permutation and scale invariance") {
  std::mt19937_64 rng(17);
  const auto t = random_triplet(6, 5, rng);
  const double base = contrastive_loss(t, {}).loss;

  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  TripletEmbeddings p{Matrix(6, 5), Matrix(6, 5), Matrix(6, 5)};
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t k = 0; k < 5; ++k) {
      p.anchor(i, k) = t.anchor(perm[i], k);
      p.positive(i, k) = t.positive(perm[i], k);
      p.negative(i, k) = t.negative(perm[i], k);
    }
  }
  CHECK(std::abs(contrastive_loss(p, {}).loss - base) < 1e-9);

  auto scaled = t;
  for (auto& x : scaled.positive.row(2)) x *= 7.5;
  for (auto& x : scaled.negative.row(4)) x *= 0.01;
  CHECK(std::abs(contrastive_loss(scaled, {}).loss - base) < 1e-9);
}

TEST_CASE("monotonicity in the positive and negative similarities") {
  // d = 2 unit vectors parameterized by angle.
  auto unit = [](double theta) {
    Matrix m(1, 2);
    m(0, 0) = std::cos(theta);
    m(0, 1) = std::sin(theta);
    return m;
  };
  const Matrix anchor = unit(0.0);
  double previous = -1;
  for (double theta = 1.5; theta >= 0.0; theta -= 0.25) {  // positive moves closer
    const double l = contrastive_loss({anchor, unit(theta), unit(2.5)}, {0.05, LossVariant::extended}).loss;
    if (previous >= 0) CHECK(l < previous);
    previous = l;
  }
  previous = -1;
  for (double theta = 3.0; theta >= 0.5; theta -= 0.25) {  // negative moves closer
    // tau = 0.5 keeps every term representable; at 0.05 the negative term underflows next to the positive one.
    const double l = contrastive_loss({anchor, unit(0.3), unit(theta)}, {0.5, LossVariant::extended_no_pn}).loss;
    if (previous >= 0) CHECK(l > previous);
    previous = l;
  }
}

TEST_CASE("stable at the cosine boundary with a small temperature") {
  Matrix a(2, 3);
  a(0, 0) = 1;
  a(1, 0) = -1;
  for (auto v : kVariants) {
    const auto r = contrastive_loss({a, a, a}, {0.01, v});
    CHECK(std::isfinite(r.loss));
    LossGradient g;
    contrastive_loss({a, a, a}, {0.01, v}, &g);
    for (double x : g.anchor.values()) CHECK(std::isfinite(x));
  }
}

TEST_CASE("rejects bad inputs") {
  Matrix a(2, 3, 1.0), z(2, 3, 0.0), short_rows(1, 3, 1.0);
  CHECK_THROWS_AS(contrastive_loss({Matrix{}, Matrix{}, Matrix{}}, {}), Error);
  CHECK_THROWS_AS(contrastive_loss({a, z, a}, {}), Error);
  CHECK_THROWS_AS(contrastive_loss({a, a, short_rows}, {}), Error);
  CHECK_THROWS_AS(contrastive_loss({a, a, Matrix{}}, {0.05, LossVariant::extended}), Error);
  CHECK_THROWS_AS(LossConfig({0.0, LossVariant::standard}).validate(), Error);
  Matrix nan(2, 3, 1.0);
  nan(1, 1) = std::nan("");
  try {
    contrastive_loss({a, nan, a}, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("variant names round-trip") {
  for (auto v : kVariants) CHECK(parse_loss_variant(to_string(v)) == v);
  CHECK(parse_loss_variant("extended_no_pn") == LossVariant::extended_no_pn);
  CHECK(to_string(LossVariant::extended_no_pn) == "extended-no-pn");
  CHECK_THROWS_AS(parse_loss_variant("fancy"), Error);
}
