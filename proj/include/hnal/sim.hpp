#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hnal/matrix.hpp"

namespace hnal {

// A set of vectors with ids and cached L2 norms.
struct EmbeddingBlock {
  std::vector<std::string> ids;
  Matrix vectors;
  std::vector<double> norms;

  std::size_t size() const { return ids.size(); }
};

EmbeddingBlock make_block(std::vector<std::string> ids, Matrix vectors);

struct SimilarityMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  Matrix values;

  double operator()(std::size_t r, std::size_t c) const { return values(r, c); }
};

// Throws DimensionMismatch or ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);

// Entry (i, j) = cosine(a_i, b_j). Throws ZeroVector naming the offending id,
// DimensionMismatch if the blocks disagree on width.
SimilarityMatrix similarity_matrix(const EmbeddingBlock& a, const EmbeddingBlock& b);

// k-th largest value counting duplicates; k = 1 is the maximum.
// Throws KOutOfRange unless 1 <= k <= values.size().
double kth_largest(std::span<const double> values, std::size_t k);

}  // namespace hnal
