#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hnal/annotation_task.hpp"
#include "hnal/corpus.hpp"
#include "hnal/eval.hpp"
#include "hnal/hardneg.hpp"
#include "hnal/trainer.hpp"

namespace hnal {

enum class Strategy { HardNeg, Random, CoreSetMean, CoreSetBoW };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

struct CoreSetOptions {
  // BoW variant only: each item is expanded into n_local jittered copies of
  // its global vector, which are quantized against a K-word codebook.
  std::size_t n_local = 4;
  double jitter = 0.05;
  std::size_t codebook_k = 300;
  std::size_t kmeans_iters = 20;
};

struct ALRunConfig {
  double init_fraction = 0.30;
  double budget_fraction = 0.05;
  double test_fraction = 0.10;
  std::size_t max_epochs = 3;
  Strategy strategy = Strategy::HardNeg;
  // direction and seed come from this config. zs_size 0 means scaled to
  // the corpus size (scaled_zs_size).
  HardNegConfig hardneg{.zs_size = 0};
  CoreSetOptions coreset;
  Direction direction = Direction::ImagePool;
  TrainConfig train;
  std::vector<std::size_t> eval_ks = {1, 5, 10};
  std::uint64_t seed = 0;

  // Throws InvalidArgument.
  void validate() const;
  bool operator==(const ALRunConfig& o) const;
};

nlohmann::json to_json(const ALRunConfig& c);
// Fields absent from `j` keep their value from `base`.
ALRunConfig config_from_json(const nlohmann::json& j, ALRunConfig base = {});

struct SelectionRecord {
  std::size_t epoch = 0;
  Strategy strategy = Strategy::HardNeg;
  std::vector<std::string> selected;
  std::map<std::string, double> scores;  // selected ids only
  std::optional<double> hard_negative_ratio;

  bool operator==(const SelectionRecord&) const = default;
};

// (queried id, counterpart id) pairs returned by an annotator.
struct AnnotationBatch {
  std::vector<std::pair<std::string, std::string>> pairs;
};

struct RunState {
  ALRunConfig config;
  std::size_t corpus_pairs = 0;  // N, denominator of every fraction
  std::size_t epoch = 0;
  PairedSet paired;
  UnpairedPool pool;
  std::vector<Pair> test;
  DualEncoderParams model;  // trained on the current paired set
  std::vector<EpochMetrics> history;
  std::vector<SelectionRecord> trace;
  std::optional<SelectionRecord> pending;  // selection awaiting annotation
  std::vector<AnnotationTask> tasks;       // live annotation queue, if any
  std::vector<EmbeddingRecord> extra_records;  // live free-text captions, outside the oracle

  std::size_t budget_count() const { return fraction_count(config.budget_fraction, corpus_pairs); }
  bool finished() const { return epoch >= config.max_epochs; }
};

// Initial model M^(0); every round retrains from it.
DualEncoderParams initial_model(const ALRunConfig& config, const CorpusDims& dims);
// Training seed for the model trained on P_a^(epoch).
std::uint64_t training_seed(const ALRunConfig& config, std::size_t epoch);

// Split, train on P_a^(0), evaluate epoch 0.
RunState start_run(const ALRunConfig& config, const Corpus& corpus);

// Runs the configured strategy on the current pool and records the result
// as the pending selection. Throws BudgetExhausted on an empty pool.
SelectionResult propose_selection(RunState& state, const Corpus& corpus);

// Perfect annotator: oracle counterpart for every selected id.
AnnotationBatch simulated_annotator(const SelectionResult& selection, const Corpus& corpus,
                                    Direction direction = Direction::ImagePool);

// Accumulates the annotated pairs, shrinks the pool, retrains from M^(0),
// evaluates and advances the epoch. Throws AnnotationMismatch,
// BudgetExhausted, UnknownId.
RunState step_epoch(RunState state, const Corpus& corpus, const AnnotationBatch& annotations);

// Continues a (possibly resumed) state until max_epochs with the simulated
// annotator. on_epoch sees the state after every completed epoch.
RunState continue_scenario(RunState state, const Corpus& corpus,
                           const std::function<void(const RunState&)>& on_epoch = {});
RunState run_scenario(const ALRunConfig& config, const Corpus& corpus);

nlohmann::json state_to_json(const RunState& state);
RunState state_from_json(const nlohmann::json& j);

// Atomic write (temp file + rename). Throws IoError.
void save_state(const RunState& state, const std::filesystem::path& path);
// Throws IoError, VersionMismatch; never returns a partial state.
RunState load_state(const std::filesystem::path& path);

// One JSON line per completed epoch.
void write_selection_trace(const RunState& state, std::ostream& out);
void export_selection_trace(const RunState& state, const std::filesystem::path& path);
void export_metrics_csv(const RunState& state, const std::filesystem::path& path);

}  // namespace hnal
