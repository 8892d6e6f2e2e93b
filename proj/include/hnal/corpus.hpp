#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hnal {

enum class Modality { Image, Text };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);
constexpr Modality other(Modality m) { return m == Modality::Image ? Modality::Text : Modality::Image; }

// Which modality is unpaired and queried to the annotator. ImagePool is the
// forward scenario (annotator writes captions); TextPool is the reverse.
enum class Direction { ImagePool, TextPool };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);
constexpr Modality queried_modality(Direction d) {
  return d == Direction::ImagePool ? Modality::Image : Modality::Text;
}
constexpr Modality counterpart_modality(Direction d) { return other(queried_modality(d)); }

struct EmbeddingRecord {
  std::string id;
  Modality modality = Modality::Image;
  std::vector<double> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct Pair {
  std::string image_id;
  std::string text_id;

  const std::string& get(Modality m) const { return m == Modality::Image ? image_id : text_id; }
  auto operator<=>(const Pair&) const = default;
};

struct CorpusDims {
  std::size_t image_dim = 0;
  std::size_t text_dim = 0;

  std::size_t of(Modality m) const { return m == Modality::Image ? image_dim : text_dim; }
  bool operator==(const CorpusDims&) const = default;
};

// Validated embedding corpus plus its ground-truth pairing (the annotation
// oracle). Records are kept sorted by id within each modality.
class Corpus {
 public:
  Corpus() = default;
  // Throws SchemaError / DanglingPair on invalid input.
  Corpus(CorpusDims dims, std::vector<EmbeddingRecord> records, std::vector<Pair> oracle);

  const CorpusDims& dims() const { return dims_; }
  const std::vector<EmbeddingRecord>& records(Modality m) const {
    return m == Modality::Image ? images_ : texts_;
  }
  const std::vector<Pair>& oracle() const { return oracle_; }
  std::size_t size() const { return oracle_.size(); }

  const EmbeddingRecord* find(Modality m, std::string_view id) const;
  // Throws UnknownId.
  const EmbeddingRecord& at(Modality m, std::string_view id) const;
  // Oracle counterpart of an id, if paired.
  std::optional<std::string> counterpart(Modality m, std::string_view id) const;

  // Registers a record outside the oracle (live-annotated free-text
  // captions). Throws SchemaError on bad dimension or duplicate id.
  void add_record(EmbeddingRecord record);

  bool operator==(const Corpus& other) const;

 private:
  void reindex();

  CorpusDims dims_;
  std::vector<EmbeddingRecord> images_;
  std::vector<EmbeddingRecord> texts_;
  std::vector<Pair> oracle_;  // sorted by image id
  std::unordered_map<std::string, std::size_t> image_index_;
  std::unordered_map<std::string, std::size_t> text_index_;
  std::unordered_map<std::string, std::string> image_to_text_;
  std::unordered_map<std::string, std::string> text_to_image_;
};

// Accumulated relevant pairs; insertion ordered, no duplicate ids on
// either side.
class PairedSet {
 public:
  PairedSet() = default;
  explicit PairedSet(std::vector<Pair> pairs);

  // Throws InvalidArgument on a duplicate image or text id.
  void add(Pair p);

  const std::vector<Pair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  bool contains(Modality m, const std::string& id) const;
  std::vector<std::string> ids(Modality m) const;

  bool operator==(const PairedSet& o) const { return pairs_ == o.pairs_; }

 private:
  std::vector<Pair> pairs_;
  std::unordered_set<std::string> images_;
  std::unordered_set<std::string> texts_;
};

struct UnpairedPool {
  Modality modality = Modality::Image;
  std::vector<std::string> ids;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  bool operator==(const UnpairedPool&) const = default;
};

// --- I/O -------------------------------------------------------------------

Corpus ingest_corpus(std::istream& embeddings, std::istream& pairs);
Corpus ingest_corpus(const std::filesystem::path& embeddings_path,
                     const std::filesystem::path& pairs_path);

void write_corpus(const Corpus& corpus, std::ostream& embeddings, std::ostream& pairs);
void write_corpus(const Corpus& corpus, const std::filesystem::path& embeddings_path,
                  const std::filesystem::path& pairs_path);

// --- synthesis and splitting ----------------------------------------------

struct SynthParams {
  std::size_t n_clusters = 50;
  std::size_t per_cluster = 40;
  std::size_t dim = 32;
  double noise_sigma = 0.1;
  // Per-dimension std of the item-specific latent offset shared by an
  // image and its text. Zero collapses every item onto its cluster center.
  double item_spread = 0.14;
  std::uint64_t seed = 0;
};

// Clustered image/text pairs: item latent = unit center + item offset;
// image = latent + noise, text = latent + independent noise.
Corpus synth_corpus(const SynthParams& params);

// floor(fraction * n), robust to binary rounding of the fraction.
std::size_t fraction_count(double fraction, std::size_t n);

struct Split {
  std::vector<Pair> test;  // held out of both the paired set and the pool
  PairedSet paired;
  UnpairedPool pool;
};

// Shuffles the oracle pairs (seeded) and cuts them into test / initial
// paired / pool. Pool ids are the queried-modality side, sorted.
Split split_corpus(const Corpus& corpus, std::size_t test_count, std::size_t init_count,
                   Direction direction, std::uint64_t seed);

std::pair<PairedSet, UnpairedPool> split_initial(const Corpus& corpus, double init_fraction,
                                                 std::uint64_t seed);

}  // namespace hnal
