#include <cmath>
#include <random>

#include "doctest.h"
#include "hnal/sim.hpp"
#include "support.hpp"

using namespace hnal;
using hnal::test::thrown_code;

namespace {

EmbeddingBlock block(std::initializer_list<std::vector<double>> rows) {
  std::vector<std::string> ids;
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& v : rows) {
    ids.push_back("v" + std::to_string(r));
    std::copy(v.begin(), v.end(), m.row(r).begin());
    ++r;
  }
  return make_block(ids, m);
}

double loop_cosine(std::span<const double> u, std::span<const double> v) {
  double d = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < u.size(); ++i) d += u[i] * v[i], a += u[i] * u[i], b += v[i] * v[i];
  return d / (std::sqrt(a) * std::sqrt(b));
}

}  // namespace

TEST_CASE("cosine examples") {
  std::vector<double> e1{1, 0}, e2{0, 1}, a{3, 4}, b{4, 3};
  CHECK(cosine(e1, e1) == 1.0);
  CHECK(cosine(e1, e2) == 0.0);
  CHECK(cosine(a, b) == doctest::Approx(0.96).epsilon(1e-15));
}

TEST_CASE("cosine errors") {
  std::vector<double> z{0, 0}, e1{1, 0}, three{1, 2, 3};
  CHECK(thrown_code([&] { cosine(z, e1); }) == ErrorCode::ZeroVector);
  CHECK(thrown_code([&] { cosine(e1, three); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("cosine is symmetric and scale invariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> c(0.01, 100.0);
  for (int t = 0; t < 200; ++t) {
    Matrix m = hnal::test::random_matrix(2, 7, rng);
    std::vector<double> u(m.row(0).begin(), m.row(0).end()), v(m.row(1).begin(), m.row(1).end());
    CHECK(cosine(u, v) == doctest::Approx(cosine(v, u)).epsilon(1e-15));
    double s = c(rng);
    std::vector<double> su = u;
    for (double& x : su) x *= s;
    CHECK(cosine(su, v) == doctest::Approx(cosine(u, v)).epsilon(1e-12));
  }
}

TEST_CASE("similarity_matrix examples") {
  auto s = similarity_matrix(block({{1, 0}}), block({{1, 0}, {0, 1}}));
  REQUIRE(s.values.rows == 1);
  REQUIRE(s.values.cols == 2);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == 0.0);
  CHECK(s.cols == std::vector<std::string>{"v0", "v1"});
}

TEST_CASE("similarity_matrix self-similarity is symmetric with unit diagonal") {
  std::mt19937_64 rng(5);
  Matrix m = hnal::test::random_matrix(12, 6, rng);
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back(std::to_string(i));
  auto b = make_block(ids, m);
  auto s = similarity_matrix(b, b);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(s(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 12; ++j) CHECK(std::abs(s(i, j) - s(j, i)) <= 1e-12);
  }
}

TEST_CASE("similarity_matrix matches scalar loop and its transpose") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 20; ++t) {
    Matrix a = hnal::test::random_matrix(3 + t, 5, rng), b = hnal::test::random_matrix(3, 5, rng);
    std::vector<std::string> ia(a.rows), ib(b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) ia[i] = "a" + std::to_string(i);
    for (std::size_t i = 0; i < b.rows; ++i) ib[i] = "b" + std::to_string(i);
    auto ba = make_block(ia, a), bb = make_block(ib, b);
    auto s = similarity_matrix(ba, bb);
    auto st = similarity_matrix(bb, ba);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < b.rows; ++j) {
        CHECK(std::abs(s(i, j) - loop_cosine(a.row(i), b.row(j))) <= 1e-12);
        CHECK(std::abs(s(i, j) - st(j, i)) <= 1e-12);
        CHECK(std::abs(s(i, j)) <= 1.0 + 1e-9);
      }
  }
}

TEST_CASE("similarity_matrix names the zero vector") {
  try {
    similarity_matrix(block({{1, 0}, {0, 0}}), block({{1, 1}}));
    FAIL("expected ZeroVector");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroVector);
    CHECK(e.detail().find("v1") != std::string::npos);
  }
  CHECK(thrown_code([] { similarity_matrix(block({{1, 0}}), block({{1, 0, 0}})); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("kth_largest examples") {
  std::vector<double> v{0.3, 0.8, 0.5}, d{0.7, 0.7, 0.1};
  CHECK(kth_largest(v, 1) == 0.8);
  CHECK(kth_largest(v, 2) == 0.5);
  CHECK(kth_largest(d, 2) == 0.7);
  CHECK(kth_largest(v, 3) == 0.3);
  CHECK(thrown_code([&] { kth_largest(v, 0); }) == ErrorCode::KOutOfRange);
  CHECK(thrown_code([&] { kth_largest(v, 4); }) == ErrorCode::KOutOfRange);
}

TEST_CASE("kth_largest is nonincreasing in k and matches a full sort") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> coarse(0, 5);  // plenty of duplicates
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(1 + t % 17);
    for (double& x : v) x = coarse(rng) * 0.25;
    std::vector<double> sorted = v;
    std::sort(sorted.rbegin(), sorted.rend());
    for (std::size_t k = 1; k <= v.size(); ++k) {
      CHECK(kth_largest(v, k) == sorted[k - 1]);
      if (k > 1) CHECK(kth_largest(v, k) <= kth_largest(v, k - 1));
    }
  }
}
