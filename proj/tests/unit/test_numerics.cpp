#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "proxyel/errors.hpp"
#include "proxyel/numerics.hpp"
#include "support/errors.hpp"

using namespace proxyel;
using proxyel::testing::thrown_category;

namespace {

Vector random_vector(std::mt19937_64& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("dot: hand examples") {
  CHECK(dot(Vector{1, 0}, Vector{0, 1}) == 0.0);
  CHECK(dot(Vector{1.5, -2, 7}, Vector{0, 0, 0}) == 0.0);
  CHECK(dot(Vector{1, 2, 3}, Vector{4, 5, 6}) == 32.0);
}

TEST_CASE("dot: errors") {
  CHECK(thrown_category([] { dot(Vector{1, 2}, Vector{1}); }) == ErrorCategory::dimension_mismatch);
  CHECK(thrown_category([] { dot(Vector{1e300, 1e300}, Vector{1e300, 1e300}); }) == ErrorCategory::non_finite);
}

TEST_CASE("dot: bilinear on random vectors") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 16;
    const auto u = random_vector(rng, n), w = random_vector(rng, n), v = random_vector(rng, n);
    const double a = std::uniform_real_distribution<double>(-4, 4)(rng);
    Vector au_w(n);
    for (std::size_t i = 0; i < n; ++i) au_w[i] = a * u[i] + w[i];
    CHECK(std::abs(dot(au_w, v) - (a * dot(u, v) + dot(w, v))) <= 1e-9);
  }
}

TEST_CASE("cosine: hand examples") {
  const Vector v{0.3, -1.2, 2.5};
  const Vector neg{-0.3, 1.2, -2.5};
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(v, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(cosine(Vector{1, 0}, Vector{0, 1}) == 0.0);
}

TEST_CASE("cosine: clamped to [-1, 1]") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = random_vector(rng, 1 + rng() % 9, -1e3, 1e3);
    const double c = cosine(v, v);
    CHECK(c <= 1.0);
    CHECK(c >= -1.0);
  }
}

TEST_CASE("cosine: zero-norm error names the argument") {
  try {
    cosine(Vector{0, 0}, Vector{1, 0});
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::invalid_argument);
    CHECK(std::string(e.what()).find("first") != std::string::npos);
  }
  try {
    cosine(Vector{1, 0}, Vector{0, 0});
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("second") != std::string::npos);
  }
  CHECK_THROWS_AS(cosine(Vector{1, 0}, Vector{1}), Error);
}

TEST_CASE("cosine: invariant under positive rescaling") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    auto u = random_vector(rng, n), v = random_vector(rng, n);
    const double a = scale(rng), b = scale(rng);
    Vector au(u), bv(v);
    for (double& x : au) x *= a;
    for (double& x : bv) x *= b;
    CHECK(std::abs(cosine(au, bv) - cosine(u, v)) <= 1e-12);
  }
}

TEST_CASE("softplus: examples and asymptotes") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) == 0.0);
  CHECK(softplus(30.0) == doctest::Approx(30.0 + std::log1p(std::exp(-30.0))).epsilon(1e-15));
  CHECK(softplus(30.5) == doctest::Approx(std::log1p(std::exp(30.5))).epsilon(1e-15));
  CHECK_THROWS_AS(softplus(std::nan("")), Error);
  CHECK_THROWS_AS(softplus(INFINITY), Error);
}

TEST_CASE("softplus: softplus(x) - softplus(-x) = x") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-60.0, 60.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double x = u(rng);
    CHECK(std::abs(softplus(x) - softplus(-x) - x) <= 1e-12);
  }
}

TEST_CASE("sigmoid: symmetric and overflow-free") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double x = u(rng);
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("log_sum_exp: large inputs") {
  CHECK(log_sum_exp(Vector{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(log_sum_exp(Vector{-1000.0}) == -1000.0);
  CHECK_THROWS_AS(log_sum_exp(Vector{}), Error);
}

TEST_CASE("stable_softmax: examples") {
  const auto p = stable_softmax(Vector{0.7, 0.7, 0.7, 0.7});
  for (double x : p) CHECK(x == 0.25);
  CHECK(stable_softmax(Vector{-3.0}) == Vector{1.0});
  const auto big = stable_softmax(Vector{1000.0, 0.0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);
  CHECK(std::isfinite(big[1]));
  CHECK_THROWS_AS(stable_softmax(Vector{}), Error);
  CHECK_THROWS_AS(stable_softmax(Vector{1.0, std::nan("")}), Error);
}

TEST_CASE("stable_softmax: sums to one, shift invariant, permutation equivariant") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> shift(-500.0, 500.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    const auto s = random_vector(rng, n, -20.0, 20.0);
    const auto p = stable_softmax(s);
    double total = 0.0;
    for (double x : p) total += x;
    CHECK(std::abs(total - 1.0) <= 1e-12);

    const double c = shift(rng);
    Vector shifted(s);
    for (double& x : shifted) x += c;
    const auto q = stable_softmax(shifted);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    Vector permuted(n);
    for (std::size_t i = 0; i < n; ++i) permuted[i] = s[perm[i]];
    const auto r = stable_softmax(permuted);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r[i] - p[perm[i]]) <= 1e-15);
  }
}

TEST_CASE("similarity_with_grad: matches central differences") {
  std::mt19937_64 rng(7);
  const double h = 1e-6;
  for (SimilarityKind kind : {SimilarityKind::dot, SimilarityKind::cosine}) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng() % 8;
      auto u = random_vector(rng, n), v = random_vector(rng, n);
      const auto g = similarity_with_grad(u, v, kind);
      CHECK(g.value == similarity(u, v, kind));
      for (std::size_t i = 0; i < n; ++i) {
        const double keep = u[i];
        u[i] = keep + h;
        const double up = similarity(u, v, kind);
        u[i] = keep - h;
        const double down = similarity(u, v, kind);
        u[i] = keep;
        CHECK(g.d_left[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6).scale(1.0));
        const double keep_v = v[i];
        v[i] = keep_v + h;
        const double up_v = similarity(u, v, kind);
        v[i] = keep_v - h;
        const double down_v = similarity(u, v, kind);
        v[i] = keep_v;
        CHECK(g.d_right[i] == doctest::Approx((up_v - down_v) / (2 * h)).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("parse_similarity") {
  CHECK(parse_similarity("dot") == SimilarityKind::dot);
  CHECK(parse_similarity("cosine") == SimilarityKind::cosine);
  CHECK(std::string(similarity_name(SimilarityKind::cosine)) == "cosine");
  CHECK_THROWS_AS(parse_similarity("l2"), Error);
}
