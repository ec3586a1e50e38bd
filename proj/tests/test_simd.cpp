#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cotbert/error.hpp"
#include "cotbert/simd/kernels.hpp"
#include "cotbert/tensor.hpp"
#include "support.hpp"

using namespace cotbert;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Reduction order differs between variants; scale the tolerance by the
// magnitude of the summands.
double reduction_tol(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
  return 1e-14 * (s + 1.0);
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(simd::scalar_kernels().isa == simd::Isa::scalar);
  CHECK(simd::to_string(simd::Isa::scalar) == "scalar");
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const simd::KernelTable* vec = simd::avx2_kernels();
  if (!vec) {
    MESSAGE("AVX2 not available on this machine; equivalence test skipped");
    return;
  }
  const auto& ref = simd::scalar_kernels();
  std::mt19937_64 rng(11);
  for (std::size_t n = 0; n <= 67; ++n) {
    CAPTURE(n);
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    CHECK(std::abs(ref.dot(a.data(), b.data(), n) - vec->dot(a.data(), b.data(), n)) <= reduction_tol(a, b));
    CHECK(std::abs(ref.squared_distance(a.data(), b.data(), n) - vec->squared_distance(a.data(), b.data(), n)) <=
          1e-14 * (ref.squared_distance(a.data(), b.data(), n) + 1.0) * 4);

    // Elementwise kernels: identical up to FMA rounding.
    auto y1 = b, y2 = b;
    ref.axpy(0.37, a.data(), y1.data(), n);
    vec->axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(y1[i]) + 1.0));

    auto s1 = a, s2 = a;
    ref.scale(-1.75, s1.data(), n);
    vec->scale(-1.75, s2.data(), n);
    CHECK(s1 == s2);

    std::vector<double> d1(n), d2(n);
    ref.sub(a.data(), b.data(), d1.data(), n);
    vec->sub(a.data(), b.data(), d2.data(), n);
    CHECK(d1 == d2);
  }
}

TEST_CASE("kernels handle unaligned offsets") {
  const simd::KernelTable* vec = simd::avx2_kernels();
  if (!vec) return;
  std::mt19937_64 rng(5);
  const auto a = random_vec(100, rng);
  const auto b = random_vec(100, rng);
  for (std::size_t off = 0; off < 4; ++off) {
    const std::size_t n = 100 - off - 3;
    const double r = simd::scalar_kernels().dot(a.data() + off, b.data() + off, n);
    const double v = vec->dot(a.data() + off, b.data() + off, n);
    CHECK(std::abs(r - v) <= 1e-12);
  }
}

TEST_CASE("select switches the active table and matmul results stay equivalent") {
  std::mt19937_64 rng(3);
  const Matrix a = testing::random_matrix(7, 13, rng);
  const Matrix b = testing::random_matrix(13, 5, rng);
  const simd::Isa before = simd::active().isa;

  REQUIRE(simd::select(simd::Isa::scalar));
  CHECK(simd::active().isa == simd::Isa::scalar);
  Matrix ref(7, 5);
  matmul(a, b, ref);

  if (simd::select(simd::Isa::avx2)) {
    CHECK(simd::active().isa == simd::Isa::avx2);
    Matrix vec(7, 5);
    matmul(a, b, vec);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ref.values()[i] - vec.values()[i]) <= 1e-12);
  } else {
    CHECK(simd::active().isa == simd::Isa::scalar);
  }
  simd::select(before);
}

TEST_CASE("matrix helpers") {
  Matrix a(2, 3);
  a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
  a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
  Matrix b(3, 2);
  b(0, 0) = 1; b(1, 0) = 0; b(2, 0) = -1;
  b(0, 1) = 2; b(1, 1) = 1; b(2, 1) = 0;
  Matrix c(2, 2);
  matmul(a, b, c);
  CHECK(c(0, 0) == -2);
  CHECK(c(0, 1) == 4);
  CHECK(c(1, 0) == -2);
  CHECK(c(1, 1) == 13);

  Matrix t(3, 3);
  matmul_tn_acc(a, a, t);  // a^T a
  CHECK(t(0, 0) == 17);
  CHECK(t(1, 2) == 2 * 3 + 5 * 6);

  Matrix nt(2, 2);
  matmul_nt(a, a, nt);  // a a^T
  CHECK(nt(0, 1) == 4 + 10 + 18);

  Matrix bad(4, 4);
  CHECK_THROWS_AS(matmul(a, a, bad), cotbert::Error);

  Matrix z(1, 3);
  CHECK_THROWS_AS(normalize_rows(z), cotbert::Error);
  const Matrix n = normalize_rows(a);
  CHECK(std::abs(l2_norm(n.row(1)) - 1.0) < 1e-15);
}
