#include "hnal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "hnal/error.hpp"
#include "hnal/kernels.hpp"

namespace hnal {

EmbeddingBlock make_block(std::vector<std::string> ids, Matrix vectors) {
  if (ids.size() != vectors.rows) throw Error(ErrorCode::InvalidArgument, "id count does not match row count");
  EmbeddingBlock b{std::move(ids), std::move(vectors), {}};
  b.norms = kernels::row_norms(b.vectors);
  return b;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(ErrorCode::DimensionMismatch,
                "lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0 || vv == 0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(const EmbeddingBlock& a, const EmbeddingBlock& b) {
  if (a.size() > 0 && b.size() > 0 && a.vectors.cols != b.vectors.cols)
    throw Error(ErrorCode::DimensionMismatch, "blocks of width " + std::to_string(a.vectors.cols) + " and " +
                                                  std::to_string(b.vectors.cols));
  for (const auto* blk : {&a, &b})
    for (std::size_t i = 0; i < blk->size(); ++i)
      if (!(blk->norms[i] > 0)) throw Error(ErrorCode::ZeroVector, "zero vector for id '" + blk->ids[i] + "'");
  SimilarityMatrix s{a.ids, b.ids, {}};
  kernels::cosine_matrix(a.vectors, a.norms, b.vectors, b.norms, s.values);
  return s;
}

double kth_largest(std::span<const double> values, std::size_t k) {
  if (k == 0 || k > values.size())
    throw Error(ErrorCode::KOutOfRange, "k=" + std::to_string(k) + " for " + std::to_string(values.size()) + " values");
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<>());
  return v[k - 1];
}

}  // namespace hnal
