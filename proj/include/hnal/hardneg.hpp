#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hnal/corpus.hpp"
#include "hnal/sim.hpp"
#include "hnal/trainer.hpp"

namespace hnal {

enum class BatchMode { FullBatch, MiniBatch };
enum class WeightMode { Surplus, Count };

std::string_view to_string(BatchMode m);
std::string_view to_string(WeightMode m);
BatchMode parse_batch_mode(std::string_view s);
WeightMode parse_weight_mode(std::string_view s);

struct HardNegConfig {
  BatchMode batch_mode = BatchMode::FullBatch;
  std::size_t zs_size = 2560;  // |Z_s|, MiniBatch only
  std::size_t k = 1;           // threshold is the k-th largest candidate similarity
  WeightMode weight_mode = WeightMode::Surplus;
  Direction direction = Direction::ImagePool;
  std::uint64_t seed = 0;  // Z_s draw
};

// |Z_s| used at full scale (2560 of ~29000 training pairs), scaled to a
// smaller corpus and kept above k.
std::size_t scaled_zs_size(std::size_t corpus_pairs, std::size_t k);

// Per-counterpart thresholds. Keys are text ids in the forward direction,
// image ids in the reverse one.
struct ThresholdVector {
  std::map<std::string, double> per_text;
  // Counterparts the score sums over: all of T (full batch) or T_s minus
  // dropped texts (mini batch), in pair order.
  std::vector<std::string> scored;
  std::optional<std::vector<std::string>> zs_used;
};

struct ScoreReport {
  std::map<std::string, double> per_item;  // pool id -> h_i
  double hard_negative_ratio = 0.0;        // fraction of pool with h_i > 0
};

struct SelectionResult {
  std::vector<std::string> selected;
  ScoreReport scores;  // empty for strategies that do not score
};

// Threshold from a candidate-by-counterpart similarity matrix: rows are the
// candidate queried-side items (all of Z, or Z_s), columns the counterparts.
// own_row[j] is the row of z_j (excluded from its own candidates) or
// kernels::kNoRow. Columns left with fewer than k candidates raise
// KExceedsCandidates in FullBatch mode and are dropped in MiniBatch mode.
ThresholdVector thresholds_from_similarity(const SimilarityMatrix& candidates, std::span<const std::size_t> own_row,
                                           std::size_t k, BatchMode mode);

// Uniform draw of `count` distinct indices out of [0, population), sorted.
std::vector<std::size_t> draw_minibatch(std::size_t population, std::size_t count, std::uint64_t seed);

// Throws TooFewPairs, KExceedsCandidates.
ThresholdVector compute_thresholds(const PairedSet& paired, const DualEncoderParams& model, const Corpus& corpus,
                                   const HardNegConfig& config);

// Surplus: max(s - xi, 0); Count: 1.
double aggregation_weight(double s_ij, double xi_j, WeightMode mode);

// h_i from a pool-by-counterpart similarity matrix. Every column must have a
// threshold (MissingThreshold otherwise).
ScoreReport scores_from_similarity(const SimilarityMatrix& pool_by_counterpart, const ThresholdVector& thresholds,
                                   WeightMode mode);

// Scores the pool against thresholds.scored with the current model.
ScoreReport score_pool(const UnpairedPool& pool, const ThresholdVector& thresholds, const DualEncoderParams& model,
                       const Corpus& corpus, const HardNegConfig& config);

// Top-min(b, |pool|) by descending score, ties by id.
SelectionResult select(const UnpairedPool& pool, std::size_t b, const ScoreReport& scores);

// Thresholds, scores and selection in one call.
SelectionResult select_hard_negatives(const UnpairedPool& pool, std::size_t b, const PairedSet& paired,
                                      const DualEncoderParams& model, const Corpus& corpus,
                                      const HardNegConfig& config);

nlohmann::json to_json(const ScoreReport& r);
nlohmann::json to_json(const SelectionResult& r);

}  // namespace hnal
