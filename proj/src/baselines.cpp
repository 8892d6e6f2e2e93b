#include "hnal/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hnal/error.hpp"
#include "hnal/kernels.hpp"
#include "hnal/rng.hpp"

namespace hnal {

SelectionResult random_select(const UnpairedPool& pool, std::size_t b, std::uint64_t seed) {
  if (b == 0) throw Error(ErrorCode::InvalidArgument, "b must be at least 1");
  std::vector<std::string> ids = pool.ids;
  const std::size_t take = std::min(b, ids.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(take);
  return SelectionResult{std::move(ids), {}};
}

std::vector<double> mean_feature(const Matrix& local_features) {
  if (local_features.rows == 0) throw Error(ErrorCode::EmptyInput, "no local features");
  std::vector<double> out(local_features.cols, 0.0);
  for (std::size_t r = 0; r < local_features.rows; ++r)
    for (std::size_t c = 0; c < local_features.cols; ++c) out[c] += local_features(r, c);
  for (auto& v : out) v /= static_cast<double>(local_features.rows);
  return out;
}

namespace {

double sse(const Matrix& x, const Matrix& centroids, std::span<const std::size_t> assign) {
  double total = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t d = 0; d < x.cols; ++d) {
      const double diff = x(i, d) - centroids(assign[i], d);
      total += diff * diff;
    }
  }
  return total;
}

}  // namespace

Codebook kmeans(const Matrix& vectors, std::size_t k, std::size_t max_iters, std::uint64_t seed,
                KMeansReport* report) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
  if (vectors.rows < k)
    throw Error(ErrorCode::TooFewPoints, std::to_string(vectors.rows) + " points for K=" + std::to_string(k));
  const std::size_t n = vectors.rows;
  const std::size_t dim = vectors.cols;
  Rng rng(seed);

  // k-means++ seeding
  Codebook cb{Matrix(k, dim)};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> chosen(n, 0);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t c = 0;; ++c) {
    chosen[first] = 1;
    std::copy_n(vectors.row(first).begin(), dim, cb.centroids.row(c).begin());
    if (c + 1 == k) break;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = vectors(i, j) - cb.centroids(c, j);
        d += diff * diff;
      }
      d2[i] = std::min(d2[i], d);
      if (!chosen[i]) total += d2[i];
    }
    if (total > 0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      first = n;
      std::size_t last_positive = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0) continue;
        last_positive = i;
        target -= d2[i];
        if (target < 0) {
          first = i;
          break;
        }
      }
      if (first == n) first = last_positive;
    } else {
      // every remaining point duplicates a centroid: pick uniformly among unchosen
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) rest.push_back(i);
      first = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
    }
  }

  std::vector<std::size_t> assign(n, k), next(n);
  if (report) *report = {};
  for (std::size_t it = 0; it < max_iters; ++it) {
    kernels::nearest_centroids(vectors, cb.centroids, next);
    if (report) {
      report->objective.push_back(sse(vectors, cb.centroids, next));
      report->iterations = it + 1;
    }
    if (next == assign) break;
    assign = next;
    Matrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) sums(assign[i], j) += vectors(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) cb.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
  }
  return cb;
}

std::vector<double> bow_feature(const Matrix& local_features, const Codebook& codebook) {
  std::vector<double> hist(codebook.size(), 0.0);
  if (local_features.rows == 0) return hist;
  if (local_features.cols != codebook.centroids.cols)
    throw Error(ErrorCode::DimensionMismatch, "local features of width " + std::to_string(local_features.cols) +
                                                  ", codebook of width " + std::to_string(codebook.centroids.cols));
  std::vector<std::size_t> assign(local_features.rows);
  kernels::nearest_centroids(local_features, codebook.centroids, assign);
  for (auto a : assign) hist[a] += 1.0;
  return hist;
}

SelectionResult kcenter_greedy(const LabeledFeatures& pool, const LabeledFeatures& covered, std::size_t b) {
  if (b == 0) throw Error(ErrorCode::InvalidArgument, "b must be at least 1");
  if (covered.size() == 0) throw Error(ErrorCode::EmptyCovered, "covered set is empty");
  if (pool.size() > 0 && pool.features.cols != covered.features.cols)
    throw Error(ErrorCode::DimensionMismatch, "pool and covered features differ in width");

  std::vector<double> min_dist(pool.size(), std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < covered.size(); ++c)
    kernels::min_distance_update(pool.features, covered.features.row(c), min_dist);

  SelectionResult out;
  std::vector<std::uint8_t> taken(pool.size(), 0);
  const std::size_t picks = std::min(b, pool.size());
  for (std::size_t step = 0; step < picks; ++step) {
    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      if (best == pool.size() || min_dist[i] > min_dist[best] ||
          (min_dist[i] == min_dist[best] && pool.ids[i] < pool.ids[best]))
        best = i;
    }
    taken[best] = 1;
    out.selected.push_back(pool.ids[best]);
    out.scores.per_item.emplace(pool.ids[best], min_dist[best]);
    kernels::min_distance_update(pool.features, pool.features.row(best), min_dist);
  }
  return out;
}

}  // namespace hnal
