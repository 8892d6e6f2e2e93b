#include <random>
#include <set>

#include "doctest.h"
#include "hnal/baselines.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hnal;
using hnal::test::thrown_code;

namespace {

UnpairedPool pool_of(std::size_t n) {
  UnpairedPool p;
  for (std::size_t i = 0; i < n; ++i) p.ids.push_back(hnal::test::id("img", i));
  return p;
}

Matrix rows(std::initializer_list<std::vector<double>> rs) {
  Matrix m(rs.size(), rs.begin()->size());
  std::size_t r = 0;
  for (const auto& v : rs) std::copy(v.begin(), v.end(), m.row(r++).begin());
  return m;
}

LabeledFeatures labeled(std::vector<std::string> ids, Matrix f) { return {std::move(ids), std::move(f)}; }

}  // namespace

TEST_CASE("random_select: exhaustive, deterministic, distinct") {
  auto p = pool_of(700);
  auto all = random_select(pool_of(5), 5, 1);
  CHECK(std::set<std::string>(all.selected.begin(), all.selected.end()).size() == 5);
  CHECK(random_select(p, 1, 42).selected == random_select(p, 1, 42).selected);
  auto s = random_select(p, 50, 9);
  std::set<std::string> uniq(s.selected.begin(), s.selected.end());
  CHECK(uniq.size() == 50);
  for (const auto& id : uniq) CHECK(std::find(p.ids.begin(), p.ids.end(), id) != p.ids.end());
  CHECK(random_select(p, 900, 9).selected.size() == 700);
  CHECK(thrown_code([&] { random_select(p, 0, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("random_select covers the pool uniformly") {
  const std::size_t n = 20, draws = 4000;
  auto p = pool_of(n);
  std::map<std::string, double> hits;
  for (std::size_t s = 0; s < draws; ++s)
    for (const auto& id : random_select(p, 2, s).selected) hits[id] += 1;
  const double expected = 2.0 * draws / n;
  double chi2 = 0;
  for (const auto& id : p.ids) chi2 += (hits[id] - expected) * (hits[id] - expected) / expected;
  MESSAGE("chi2 = " << chi2);
  CHECK(chi2 < 50.0);  // 19 dof; p ~ 1e-4
}

TEST_CASE("mean_feature") {
  CHECK(mean_feature(rows({{1, 2}, {3, 4}})) == std::vector<double>{2, 3});
  CHECK(mean_feature(rows({{0.25, -7}})) == std::vector<double>{0.25, -7});
  Matrix same(36, 3);
  for (std::size_t i = 0; i < 36; ++i) same(i, 0) = 0.5, same(i, 1) = -1, same(i, 2) = 2;
  auto m = mean_feature(same);
  for (std::size_t d = 0; d < 3; ++d) CHECK(m[d] == doctest::Approx(same(0, d)).epsilon(1e-15));
  CHECK(thrown_code([] { mean_feature(Matrix(0, 3)); }) == ErrorCode::EmptyInput);
}

TEST_CASE("kmeans: saturated, separated groups, determinism") {
  Matrix pts = rows({{0, 0}, {5, 5}, {-3, 2}});
  auto cb = kmeans(pts, 3, 10, 1);
  std::set<std::vector<double>> got;
  for (std::size_t c = 0; c < 3; ++c) got.insert({cb.centroids(c, 0), cb.centroids(c, 1)});
  CHECK(got == std::set<std::vector<double>>{{0, 0}, {5, 5}, {-3, 2}});

  Matrix two = rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {100, 100}, {100, 102}, {102, 100}, {102, 102}});
  auto cb2 = kmeans(two, 2, 50, 3);
  std::set<std::vector<double>> means;
  for (std::size_t c = 0; c < 2; ++c) means.insert({cb2.centroids(c, 0), cb2.centroids(c, 1)});
  CHECK(means == std::set<std::vector<double>>{{0.5, 0.5}, {101, 101}});

  std::mt19937_64 rng(8);
  Matrix many = hnal::test::random_matrix(300, 4, rng);
  CHECK(kmeans(many, 7, 30, 5).centroids == kmeans(many, 7, 30, 5).centroids);
  CHECK(thrown_code([&] { kmeans(pts, 4, 10, 1); }) == ErrorCode::TooFewPoints);
}

TEST_CASE("kmeans objective never increases") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix pts = hnal::test::random_matrix(400, 3, rng);
    KMeansReport rep_out;
    kmeans(pts, 12, 100, rep, &rep_out);
    REQUIRE(rep_out.objective.size() >= 2);
    for (std::size_t i = 1; i < rep_out.objective.size(); ++i)
      CHECK(rep_out.objective[i] <= rep_out.objective[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("bow_feature") {
  Codebook cb{rows({{0}, {10}})};
  CHECK(bow_feature(rows({{0.1}, {9.8}, {10.2}}), cb) == std::vector<double>{1, 2});
  CHECK(bow_feature(Matrix(0, 1), cb) == std::vector<double>{0, 0});
  CHECK(bow_feature(rows({{10}, {10}, {10}, {10}}), cb) == std::vector<double>{0, 4});
  CHECK(bow_feature(rows({{5}}), cb) == std::vector<double>{1, 0});  // tie -> lower index
  CHECK(thrown_code([&] { bow_feature(rows({{1, 2}}), cb); }) == ErrorCode::DimensionMismatch);

  std::mt19937_64 rng(4);
  Matrix locals = hnal::test::random_matrix(300, 5, rng);
  Codebook big = kmeans(locals, 40, 20, 2);
  for (std::size_t n : {1u, 36u, 77u}) {
    Matrix sub(n, 5);
    std::copy(locals.data.begin(), locals.data.begin() + n * 5, sub.data.begin());
    auto h = bow_feature(sub, big);
    CHECK(h.size() == 40);
    double total = 0;
    for (double v : h) total += v;
    CHECK(total == static_cast<double>(n));
  }
}

TEST_CASE("kcenter_greedy: line examples") {
  auto pool = labeled({"p1", "p10"}, rows({{1}, {10}}));
  auto cov = labeled({"c0"}, rows({{0}}));
  CHECK(kcenter_greedy(pool, cov, 1).selected == std::vector<std::string>{"p10"});
  auto two = kcenter_greedy(pool, cov, 2);
  CHECK(two.selected == std::vector<std::string>{"p10", "p1"});
  CHECK(two.scores.per_item.at("p10") == 10.0);
  CHECK(two.scores.per_item.at("p1") == 1.0);

  auto dup = labeled({"a", "b", "c"}, rows({{0}, {0.5}, {3}}));
  auto r = kcenter_greedy(dup, cov, 3);
  CHECK(r.selected == std::vector<std::string>{"c", "b", "a"});  // "a" sits on c0, picked last
  CHECK(r.scores.per_item.at("a") == 0.0);
  CHECK(thrown_code([&] { kcenter_greedy(pool, labeled({}, Matrix(0, 1)), 1); }) == ErrorCode::EmptyCovered);
}

TEST_CASE("kcenter_greedy: each pick is the brute-force farthest point") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> grid(0, 6);
  for (int rep = 0; rep < 15; ++rep) {
    const std::size_t n = 20 + 12 * rep;
    Matrix pf(n, 3), cf(5, 3);
    for (double& v : pf.data) v = grid(rng);  // integer grid: many equal distances
    for (double& v : cf.data) v = grid(rng);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = hnal::test::id("q", (i * 37) % 1000);
    std::vector<std::string> cids{"c0", "c1", "c2", "c3", "c4"};
    auto res = kcenter_greedy(labeled(ids, pf), labeled(cids, cf), 12);

    std::vector<std::vector<double>> covered;
    for (std::size_t r = 0; r < 5; ++r) covered.emplace_back(cf.row(r).begin(), cf.row(r).end());
    std::vector<bool> taken(n, false);
    for (const auto& pick : res.selected) {
      double d;
      std::size_t want = oracle::farthest(ids, pf, taken, covered, &d);
      REQUIRE(want < n);
      CHECK(pick == ids[want]);
      CHECK(res.scores.per_item.at(pick) == d);
      taken[want] = true;
      covered.emplace_back(pf.row(want).begin(), pf.row(want).end());
    }
  }
}
