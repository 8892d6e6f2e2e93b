#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hnal/corpus.hpp"
#include "hnal/hardneg.hpp"
#include "hnal/matrix.hpp"

namespace hnal {

// Uniform sample without replacement, in draw order. Throws InvalidArgument for b = 0.
SelectionResult random_select(const UnpairedPool& pool, std::size_t b, std::uint64_t seed);

// Element-wise mean of local feature vectors (rows). Throws EmptyInput.
std::vector<double> mean_feature(const Matrix& local_features);

struct Codebook {
  Matrix centroids;  // K x dim
  std::size_t size() const { return centroids.rows; }
};

struct KMeansReport {
  std::vector<double> objective;  // SSE after each assignment step
  std::size_t iterations = 0;
};

// Lloyd's algorithm from a seeded k-means++ start; stops once assignments
// stop changing or after max_iters. Empty clusters keep their centroid.
// Throws TooFewPoints when rows < K.
Codebook kmeans(const Matrix& vectors, std::size_t k, std::size_t max_iters, std::uint64_t seed,
                KMeansReport* report = nullptr);

// Histogram of nearest-centroid assignments (ties to the lowest index).
// No local features gives the zero vector. Throws DimensionMismatch.
std::vector<double> bow_feature(const Matrix& local_features, const Codebook& codebook);

struct LabeledFeatures {
  std::vector<std::string> ids;
  Matrix features;

  std::size_t size() const { return ids.size(); }
};

// k-center greedy: b times, take the pool point farthest (Euclidean, min
// over the covered set) and add it to the covered set. Ties go to the
// lexicographically smallest id. scores.per_item holds each pick's
// distance at the time it was chosen. Throws EmptyCovered.
SelectionResult kcenter_greedy(const LabeledFeatures& pool, const LabeledFeatures& covered, std::size_t b);

}  // namespace hnal
