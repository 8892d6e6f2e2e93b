#include "hnal/hardneg.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "hnal/error.hpp"
#include "hnal/kernels.hpp"
#include "hnal/rng.hpp"

namespace hnal {

using nlohmann::json;

std::string_view to_string(BatchMode m) { return m == BatchMode::FullBatch ? "full" : "mini"; }
std::string_view to_string(WeightMode m) { return m == WeightMode::Surplus ? "surplus" : "count"; }

BatchMode parse_batch_mode(std::string_view s) {
  if (s == "full") return BatchMode::FullBatch;
  if (s == "mini") return BatchMode::MiniBatch;
  throw Error(ErrorCode::InvalidArgument, "batch mode must be 'full' or 'mini'");
}

WeightMode parse_weight_mode(std::string_view s) {
  if (s == "surplus") return WeightMode::Surplus;
  if (s == "count") return WeightMode::Count;
  throw Error(ErrorCode::InvalidArgument, "weight mode must be 'surplus' or 'count'");
}

std::size_t scaled_zs_size(std::size_t corpus_pairs, std::size_t k) {
  constexpr double kFullScaleZs = 2560.0;
  constexpr double kFullScaleTrainPairs = 29000.0;
  const auto scaled = static_cast<std::size_t>(std::llround(kFullScaleZs * static_cast<double>(corpus_pairs) /
                                                            kFullScaleTrainPairs));
  return std::max({scaled, k + 1, std::size_t{2}});
}

ThresholdVector thresholds_from_similarity(const SimilarityMatrix& candidates, std::span<const std::size_t> own_row,
                                           std::size_t k, BatchMode mode) {
  const std::size_t n = candidates.cols.size();
  if (own_row.size() != n) throw Error(ErrorCode::InvalidArgument, "own_row must have one entry per column");
  if (k == 0) throw Error(ErrorCode::KOutOfRange, "k must be at least 1");
  std::vector<double> xi(n);
  std::vector<std::uint8_t> valid(n);
  kernels::kth_largest_columns(candidates.values, own_row, k, xi, valid);

  ThresholdVector out;
  for (std::size_t j = 0; j < n; ++j) {
    if (!valid[j]) {
      if (mode == BatchMode::FullBatch)
        throw Error(ErrorCode::KExceedsCandidates,
                    "k=" + std::to_string(k) + " exceeds the candidates for '" + candidates.cols[j] + "'");
      continue;
    }
    out.per_text.emplace(candidates.cols[j], xi[j]);
  }
  return out;
}

std::vector<std::size_t> draw_minibatch(std::size_t population, std::size_t count, std::uint64_t seed) {
  count = std::min(count, population);
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  Rng rng(seed);
  // partial Fisher-Yates: first `count` slots become the sample
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

ThresholdVector compute_thresholds(const PairedSet& paired, const DualEncoderParams& model, const Corpus& corpus,
                                   const HardNegConfig& config) {
  const std::size_t n = paired.size();
  if (n < 2) throw Error(ErrorCode::TooFewPairs, "need at least two paired items");
  if (config.k == 0) throw Error(ErrorCode::KOutOfRange, "k must be at least 1");
  const Modality qm = queried_modality(config.direction);
  const Modality cm = counterpart_modality(config.direction);
  const auto z_ids = paired.ids(qm);
  const auto t_ids = paired.ids(cm);

  std::vector<std::size_t> candidate_rows;
  if (config.batch_mode == BatchMode::FullBatch) {
    if (n - 1 < config.k)
      throw Error(ErrorCode::KExceedsCandidates,
                  "k=" + std::to_string(config.k) + " with " + std::to_string(n) + " pairs");
    candidate_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) candidate_rows[i] = i;
  } else {
    if (config.zs_size == 0 || config.zs_size < config.k)
      throw Error(ErrorCode::KExceedsCandidates, "zs_size must be at least k");
    candidate_rows = draw_minibatch(n, config.zs_size, config.seed);
  }

  std::vector<std::string> cand_ids;
  cand_ids.reserve(candidate_rows.size());
  for (auto r : candidate_rows) cand_ids.push_back(z_ids[r]);
  std::vector<std::size_t> own_row(n, kernels::kNoRow);
  for (std::size_t r = 0; r < candidate_rows.size(); ++r) own_row[candidate_rows[r]] = r;

  const EmbeddingBlock z_block = encode_block(model, corpus, qm, cand_ids);
  const EmbeddingBlock t_block = encode_block(model, corpus, cm, t_ids);
  ThresholdVector out =
      thresholds_from_similarity(similarity_matrix(z_block, t_block), own_row, config.k, config.batch_mode);

  if (config.batch_mode == BatchMode::FullBatch) {
    out.scored = t_ids;
  } else {
    for (auto r : candidate_rows)
      if (out.per_text.contains(t_ids[r])) out.scored.push_back(t_ids[r]);
    out.zs_used = std::move(cand_ids);
  }
  return out;
}

double aggregation_weight(double s_ij, double xi_j, WeightMode mode) {
  if (mode == WeightMode::Count) return 1.0;
  return std::max(s_ij - xi_j, 0.0);
}

ScoreReport scores_from_similarity(const SimilarityMatrix& sim, const ThresholdVector& thresholds, WeightMode mode) {
  std::vector<double> xi(sim.cols.size());
  for (std::size_t j = 0; j < sim.cols.size(); ++j) {
    auto it = thresholds.per_text.find(sim.cols[j]);
    if (it == thresholds.per_text.end())
      throw Error(ErrorCode::MissingThreshold, "no threshold for '" + sim.cols[j] + "'");
    xi[j] = it->second;
  }
  std::vector<double> h(sim.rows.size());
  kernels::hard_negative_scores(sim.values, xi, mode == WeightMode::Surplus, h);

  ScoreReport out;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    out.per_item.emplace(sim.rows[i], h[i]);
    if (h[i] > 0) ++positive;
  }
  out.hard_negative_ratio = h.empty() ? 0.0 : static_cast<double>(positive) / static_cast<double>(h.size());
  return out;
}

ScoreReport score_pool(const UnpairedPool& pool, const ThresholdVector& thresholds, const DualEncoderParams& model,
                       const Corpus& corpus, const HardNegConfig& config) {
  const Modality qm = queried_modality(config.direction);
  if (pool.modality != qm) throw Error(ErrorCode::InvalidArgument, "pool modality does not match direction");
  for (const auto& id : thresholds.scored)
    if (!thresholds.per_text.contains(id)) throw Error(ErrorCode::MissingThreshold, "no threshold for '" + id + "'");
  const EmbeddingBlock x_block = encode_block(model, corpus, qm, pool.ids);
  const EmbeddingBlock t_block = encode_block(model, corpus, counterpart_modality(config.direction), thresholds.scored);
  return scores_from_similarity(similarity_matrix(x_block, t_block), thresholds, config.weight_mode);
}

SelectionResult select(const UnpairedPool& pool, std::size_t b, const ScoreReport& scores) {
  if (b == 0) throw Error(ErrorCode::InvalidArgument, "b must be at least 1");
  std::vector<std::pair<double, const std::string*>> ranked;
  ranked.reserve(pool.size());
  for (const auto& id : pool.ids) {
    auto it = scores.per_item.find(id);
    if (it == scores.per_item.end()) throw Error(ErrorCode::UnknownId, "no score for pool id '" + id + "'");
    ranked.emplace_back(it->second, &id);
  }
  const std::size_t take = std::min(b, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(),
                    [](const auto& a, const auto& c) {
                      if (a.first != c.first) return a.first > c.first;
                      return *a.second < *c.second;
                    });
  SelectionResult out;
  out.scores = scores;
  for (std::size_t i = 0; i < take; ++i) out.selected.push_back(*ranked[i].second);
  return out;
}

SelectionResult select_hard_negatives(const UnpairedPool& pool, std::size_t b, const PairedSet& paired,
                                      const DualEncoderParams& model, const Corpus& corpus,
                                      const HardNegConfig& config) {
  const ThresholdVector xi = compute_thresholds(paired, model, corpus, config);
  return select(pool, b, score_pool(pool, xi, model, corpus, config));
}

json to_json(const ScoreReport& r) {
  json scores = json::object();
  for (const auto& [id, h] : r.per_item) scores[id] = h;
  return json{{"scores", std::move(scores)}, {"hard_negative_ratio", r.hard_negative_ratio}};
}

json to_json(const SelectionResult& r) {
  json j = to_json(r.scores);
  j["selected"] = r.selected;
  return j;
}

}  // namespace hnal
