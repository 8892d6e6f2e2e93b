#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hnal/corpus.hpp"
#include "hnal/sim.hpp"
#include "hnal/trainer.hpp"

namespace hnal {

struct EpochMetrics {
  std::size_t epoch = 0;
  std::map<std::size_t, double> r_at_k_text;   // image query -> text gallery
  std::map<std::size_t, double> r_at_k_image;  // text query -> image gallery
  double paired_fraction = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

// 1-based rank of each query's true match. Ties with the true match are
// ordered by gallery id, so the rank is deterministic.
std::vector<std::size_t> match_ranks(const SimilarityMatrix& query_by_gallery,
                                     const std::map<std::string, std::string>& oracle);

// Fraction of queries whose match ranks within the top K under the model.
// Throws MissingOracleMatch, KOutOfRange.
double recall_at_k(const DualEncoderParams& model, std::span<const EmbeddingRecord> queries,
                   std::span<const EmbeddingRecord> gallery, const std::map<std::string, std::string>& oracle,
                   std::size_t k);

// Both retrieval directions over a set of held-out pairs.
EpochMetrics evaluate(const DualEncoderParams& model, const Corpus& corpus, std::span<const Pair> test_pairs,
                      std::span<const std::size_t> ks, std::size_t epoch, double paired_fraction);

// Sum over epochs of text + image R@K, in percentage points. Throws
// EmptyInput on empty history, MissingK.
double r_at_k_sum(std::span<const EpochMetrics> history, std::size_t k);

// CSV with header `epoch,paired_fraction,direction,K,recall`.
void write_metrics_csv(std::span<const EpochMetrics> history, std::ostream& out);
std::vector<EpochMetrics> read_metrics_csv(std::istream& in);

}  // namespace hnal
