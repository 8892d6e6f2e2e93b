#pragma once

// Data-parallel inner loops. Every kernel in `hnal::kernels` has a serial
// twin in `hnal::kernels::reference` with the same signature; the parallel
// version splits work by output row only and keeps each row's reduction
// order fixed, so both produce bit-identical output. Tests and the
// benchmark target compare the two.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hnal/matrix.hpp"

namespace hnal::kernels {

// Marker for a column whose paired row is not among the candidates.
inline constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);

std::vector<double> row_norms(const Matrix& m);

// out(i,j) = <a_i, b_j> / (|a_i| |b_j|), clamped to [-1, 1]. Norms must be
// nonzero; callers validate.
void cosine_matrix(const Matrix& a, std::span<const double> norms_a, const Matrix& b,
                   std::span<const double> norms_b, Matrix& out);

// out = x * w
void project_rows(const Matrix& x, const Matrix& w, Matrix& out);

// For each column j: k-th largest of sim(r, j) over candidate rows r, with
// own_row[j] (if not kNoRow) excluded. valid[j] = 0 when fewer than k
// candidates remain; out[j] is then left at 0.
void kth_largest_columns(const Matrix& sim, std::span<const std::size_t> own_row, std::size_t k,
                         std::span<double> out, std::span<std::uint8_t> valid);

// h_i = sum_j w_ij * 1(sim(i,j) > xi_j), w_ij = sim - xi (surplus) or 1.
void hard_negative_scores(const Matrix& sim, std::span<const double> thresholds, bool surplus,
                          std::span<double> out);

// assign[i] = argmin_c |p_i - c|^2, ties to the lowest index.
void nearest_centroids(const Matrix& points, const Matrix& centroids, std::span<std::size_t> assign);

// min_dist[i] = min(min_dist[i], |p_i - q|) for active points.
void min_distance_update(const Matrix& points, std::span<const double> q, std::span<double> min_dist);

// rank[i] = 1 + #{j : sim(i,j) > sim(i,t) or (equal and tie_order[j] < tie_order[t])}
// with t = truth[i]. tie_order gives each column's position in the
// tie-break order.
void match_ranks(const Matrix& sim, std::span<const std::size_t> truth, std::span<const std::size_t> tie_order,
                 std::span<std::size_t> rank);

namespace reference {

std::vector<double> row_norms(const Matrix& m);
void cosine_matrix(const Matrix& a, std::span<const double> norms_a, const Matrix& b,
                   std::span<const double> norms_b, Matrix& out);
void project_rows(const Matrix& x, const Matrix& w, Matrix& out);
void kth_largest_columns(const Matrix& sim, std::span<const std::size_t> own_row, std::size_t k,
                         std::span<double> out, std::span<std::uint8_t> valid);
void hard_negative_scores(const Matrix& sim, std::span<const double> thresholds, bool surplus,
                          std::span<double> out);
void nearest_centroids(const Matrix& points, const Matrix& centroids, std::span<std::size_t> assign);
void min_distance_update(const Matrix& points, std::span<const double> q, std::span<double> min_dist);

void match_ranks(const Matrix& sim, std::span<const std::size_t> truth, std::span<const std::size_t> tie_order,
                 std::span<std::size_t> rank);

}  // namespace reference

}  // namespace hnal::kernels
