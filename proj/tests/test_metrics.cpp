#include <doctest.h>

#include <cmath>
#include <random>

#include "cotbert/error.hpp"
#include "cotbert/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cotbert;

namespace {

Matrix rows2(std::initializer_list<std::pair<double, double>> r) {
  Matrix m(r.size(), 2);
  std::size_t i = 0;
  for (auto [x, y] : r) {
    m(i, 0) = x;
    m(i, 1) = y;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("spearman closed forms") {
  const std::vector<double> a = {1, 2, 3};
  CHECK(spearman(a, std::vector<double>{10, 20, 30}) == doctest::Approx(1.0));
  CHECK(spearman(a, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  const std::vector<double> tied = {1, 1, 2};
  CHECK(std::abs(spearman(tied, a) - oracle::spearman(tied, a)) < 1e-9);
  CHECK(std::abs(spearman(tied, a) - std::sqrt(3.0) / 2.0) < 1e-12);
}

TEST_CASE("average ranks") {
  const std::vector<double> x = {3.0, 1.0, 3.0, 2.0, 3.0};
  const auto r = average_ranks(x);
  const std::vector<double> expected = {4, 1, 4, 2, 4};
  CHECK(r == expected);
}

TEST_CASE("spearman matches the rank oracle with many ties") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> small(0, 9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(200), y(200);
    for (auto& v : x) v = small(rng);
    for (auto& v : y) v = small(rng) * 0.5;
    CHECK(std::abs(spearman(x, y) - oracle::spearman(x, y)) < 1e-9);
  }
}

TEST_CASE("spearman is invariant to monotone transforms") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<double> x(50), y(50);
  for (auto& v : x) v = n(rng);
  for (auto& v : y) v = n(rng);
  std::vector<double> tx(50);
  for (std::size_t i = 0; i < 50; ++i) tx[i] = std::exp(3 * x[i]) + 1;
  CHECK(spearman(tx, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
}

TEST_CASE("spearman rejects degenerate input") {
  const std::vector<double> c = {2, 2, 2}, a = {1, 2, 3};
  CHECK_THROWS_AS(spearman(c, a), Error);
  CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 2}), Error);
}

TEST_CASE("alignment closed forms") {
  SUBCASE("identical qualifying pairs") {
    const Matrix a = rows2({{1, 2}, {3, -1}});
    CHECK(alignment({a, a, {4.5, 5.0}}) == 0.0);
  }
  SUBCASE("orthogonal pair") {
    const Matrix a = rows2({{1, 0}}), b = rows2({{0, 1}});
    CHECK(std::abs(alignment({a, b, {4.2}}) - 2.0) < 1e-12);
  }
  SUBCASE("only pairs above the threshold count") {
    const Matrix a = rows2({{1, 0}, {1, 0}}), b = rows2({{0, 1}, {1, 0}});
    CHECK(std::abs(alignment({a, b, {3.9, 4.1}})) < 1e-12);
    CHECK(std::abs(alignment({a, b, {4.0, 4.1}})) < 1e-12);  // strictly greater
  }
  SUBCASE("no qualifying pair") {
    const Matrix a = rows2({{1, 0}});
    CHECK_THROWS_AS(alignment({a, a, {3.0}}), Error);
  }
}

TEST_CASE("uniformity closed forms") {
  CHECK(uniformity(rows2({{1, 1}, {1, 1}, {2, 2}})) == 0.0);
  CHECK(std::abs(uniformity(rows2({{1, 0}, {0, 1}})) - (-4.0)) < 1e-12);
  CHECK_THROWS_AS(uniformity(rows2({{1, 0}})), Error);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) CHECK(uniformity(testing::random_matrix(8, 3, rng)) <= 0.0);
}

TEST_CASE("uniformity invariant under rotation and per-row rescaling") {
  std::mt19937_64 rng(12);
  const Matrix x = testing::random_matrix(10, 2, rng);
  const double base = uniformity(x);
  const double t = 0.7;
  Matrix rot(10, 2), scaled = x;
  for (std::size_t i = 0; i < 10; ++i) {
    rot(i, 0) = std::cos(t) * x(i, 0) - std::sin(t) * x(i, 1);
    rot(i, 1) = std::sin(t) * x(i, 0) + std::cos(t) * x(i, 1);
    for (auto& v : scaled.row(i)) v *= 0.5 + static_cast<double>(i);
  }
  CHECK(std::abs(uniformity(rot) - base) < 1e-12);
  CHECK(std::abs(uniformity(scaled) - base) < 1e-12);

  const Matrix y = testing::random_matrix(10, 2, rng);
  std::vector<double> gold(10, 4.5);
  CHECK(std::abs(alignment({scaled, y, gold}) - alignment({x, y, gold})) < 1e-12);
}

TEST_CASE("rowwise cosine") {
  const Matrix a = rows2({{1, 0}, {1, 1}}), b = rows2({{1, 0}, {-1, -1}});
  const auto c = rowwise_cosine(a, b);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(-1.0));
}
