#include "hnal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace hnal::kernels {

namespace {

// Per-row bodies shared by the parallel and serial drivers.

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t d = 0; d < n; ++d) s += a[d] * b[d];
  return s;
}

inline double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

inline void cosine_row(const Matrix& a, std::span<const double> na, const Matrix& b, std::span<const double> nb,
                       Matrix& out, std::size_t i) {
  const double* ai = a.data.data() + i * a.cols;
  for (std::size_t j = 0; j < b.rows; ++j) {
    const double c = dot(ai, b.data.data() + j * b.cols, a.cols) / (na[i] * nb[j]);
    out(i, j) = std::clamp(c, -1.0, 1.0);
  }
}

inline void project_row(const Matrix& x, const Matrix& w, Matrix& out, std::size_t i) {
  auto o = out.row(i);
  std::fill(o.begin(), o.end(), 0.0);
  for (std::size_t d = 0; d < x.cols; ++d) {
    const double v = x(i, d);
    if (v == 0.0) continue;
    const double* wr = w.data.data() + d * w.cols;
    for (std::size_t e = 0; e < w.cols; ++e) o[e] += v * wr[e];
  }
}

inline void kth_column(const Matrix& sim, std::span<const std::size_t> own_row, std::size_t k, std::span<double> out,
                       std::span<std::uint8_t> valid, std::vector<double>& scratch, std::size_t j) {
  scratch.clear();
  for (std::size_t r = 0; r < sim.rows; ++r)
    if (r != own_row[j]) scratch.push_back(sim(r, j));
  if (k == 0 || scratch.size() < k) {
    out[j] = 0.0;
    valid[j] = 0;
    return;
  }
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end(),
                   std::greater<>());
  out[j] = scratch[k - 1];
  valid[j] = 1;
}

inline double score_row(const Matrix& sim, std::span<const double> xi, bool surplus, std::size_t i) {
  double h = 0.0;
  const double* s = sim.data.data() + i * sim.cols;
  for (std::size_t j = 0; j < sim.cols; ++j) {
    if (s[j] > xi[j]) h += surplus ? s[j] - xi[j] : 1.0;
  }
  return h;
}

inline std::size_t nearest_row(const Matrix& points, const Matrix& centroids, std::size_t i) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const double* p = points.data.data() + i * points.cols;
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_distance(p, centroids.data.data() + c * centroids.cols, points.cols);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline void min_dist_row(const Matrix& points, std::span<const double> q, std::span<double> min_dist, std::size_t i) {
  const double d = std::sqrt(squared_distance(points.data.data() + i * points.cols, q.data(), points.cols));
  if (d < min_dist[i]) min_dist[i] = d;
}

inline double norm_row(const Matrix& m, std::size_t i) {
  const double* r = m.data.data() + i * m.cols;
  return std::sqrt(dot(r, r, m.cols));
}

inline std::size_t rank_row(const Matrix& sim, std::span<const std::size_t> truth,
                            std::span<const std::size_t> tie_order, std::size_t i) {
  const std::size_t t = truth[i];
  const double* s = sim.data.data() + i * sim.cols;
  const double st = s[t];
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < sim.cols; ++j) {
    if (s[j] > st || (s[j] == st && tie_order[j] < tie_order[t])) ++ahead;
  }
  return ahead + 1;
}

using Index = std::ptrdiff_t;

}  // namespace

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> out(m.rows);
  const Index n = static_cast<Index>(m.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = norm_row(m, static_cast<std::size_t>(i));
  return out;
}

void cosine_matrix(const Matrix& a, std::span<const double> norms_a, const Matrix& b, std::span<const double> norms_b,
                   Matrix& out) {
  out = Matrix(a.rows, b.rows);
  const Index n = static_cast<Index>(a.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) cosine_row(a, norms_a, b, norms_b, out, static_cast<std::size_t>(i));
}

void project_rows(const Matrix& x, const Matrix& w, Matrix& out) {
  out = Matrix(x.rows, w.cols);
  const Index n = static_cast<Index>(x.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) project_row(x, w, out, static_cast<std::size_t>(i));
}

void kth_largest_columns(const Matrix& sim, std::span<const std::size_t> own_row, std::size_t k,
                         std::span<double> out, std::span<std::uint8_t> valid) {
  const Index n = static_cast<Index>(sim.cols);
#pragma omp parallel
  {
    std::vector<double> scratch;
    scratch.reserve(sim.rows);
#pragma omp for schedule(static)
    for (Index j = 0; j < n; ++j) kth_column(sim, own_row, k, out, valid, scratch, static_cast<std::size_t>(j));
  }
}

void hard_negative_scores(const Matrix& sim, std::span<const double> thresholds, bool surplus, std::span<double> out) {
  const Index n = static_cast<Index>(sim.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = score_row(sim, thresholds, surplus, static_cast<std::size_t>(i));
}

void nearest_centroids(const Matrix& points, const Matrix& centroids, std::span<std::size_t> assign) {
  const Index n = static_cast<Index>(points.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) assign[i] = nearest_row(points, centroids, static_cast<std::size_t>(i));
}

void min_distance_update(const Matrix& points, std::span<const double> q, std::span<double> min_dist) {
  const Index n = static_cast<Index>(points.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) min_dist_row(points, q, min_dist, static_cast<std::size_t>(i));
}

void match_ranks(const Matrix& sim, std::span<const std::size_t> truth, std::span<const std::size_t> tie_order,
                 std::span<std::size_t> rank) {
  const Index n = static_cast<Index>(sim.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) rank[i] = rank_row(sim, truth, tie_order, static_cast<std::size_t>(i));
}

namespace reference {

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = norm_row(m, i);
  return out;
}

void cosine_matrix(const Matrix& a, std::span<const double> norms_a, const Matrix& b, std::span<const double> norms_b,
                   Matrix& out) {
  out = Matrix(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) cosine_row(a, norms_a, b, norms_b, out, i);
}

void project_rows(const Matrix& x, const Matrix& w, Matrix& out) {
  out = Matrix(x.rows, w.cols);
  for (std::size_t i = 0; i < x.rows; ++i) project_row(x, w, out, i);
}

void kth_largest_columns(const Matrix& sim, std::span<const std::size_t> own_row, std::size_t k,
                         std::span<double> out, std::span<std::uint8_t> valid) {
  std::vector<double> scratch;
  for (std::size_t j = 0; j < sim.cols; ++j) kth_column(sim, own_row, k, out, valid, scratch, j);
}

void hard_negative_scores(const Matrix& sim, std::span<const double> thresholds, bool surplus, std::span<double> out) {
  for (std::size_t i = 0; i < sim.rows; ++i) out[i] = score_row(sim, thresholds, surplus, i);
}

void nearest_centroids(const Matrix& points, const Matrix& centroids, std::span<std::size_t> assign) {
  for (std::size_t i = 0; i < points.rows; ++i) assign[i] = nearest_row(points, centroids, i);
}

void min_distance_update(const Matrix& points, std::span<const double> q, std::span<double> min_dist) {
  for (std::size_t i = 0; i < points.rows; ++i) min_dist_row(points, q, min_dist, i);
}

void match_ranks(const Matrix& sim, std::span<const std::size_t> truth, std::span<const std::size_t> tie_order,
                 std::span<std::size_t> rank) {
  for (std::size_t i = 0; i < sim.rows; ++i) rank[i] = rank_row(sim, truth, tie_order, i);
}

}  // namespace reference

}  // namespace hnal::kernels
