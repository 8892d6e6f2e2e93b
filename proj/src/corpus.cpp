#include "hnal/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "hnal/error.hpp"
#include "hnal/rng.hpp"

namespace hnal {

using nlohmann::json;

std::string_view to_string(Modality m) { return m == Modality::Image ? "image" : "text"; }

Modality parse_modality(std::string_view s) {
  if (s == "image") return Modality::Image;
  if (s == "text") return Modality::Text;
  throw Error(ErrorCode::SchemaError, "unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(Direction d) { return d == Direction::ImagePool ? "image_pool" : "text_pool"; }

Direction parse_direction(std::string_view s) {
  if (s == "image_pool" || s == "image") return Direction::ImagePool;
  if (s == "text_pool" || s == "text") return Direction::TextPool;
  throw Error(ErrorCode::InvalidArgument, "unknown direction '" + std::string(s) + "'");
}

// --- Corpus ----------------------------------------------------------------

namespace {

void check_record(const EmbeddingRecord& r, const CorpusDims& dims) {
  if (r.id.empty()) throw Error(ErrorCode::SchemaError, "record with empty id");
  const std::size_t want = dims.of(r.modality);
  if (r.vector.size() != want) {
    throw Error(ErrorCode::SchemaError, "record '" + r.id + "' has " + std::to_string(r.vector.size()) +
                                            " components, corpus declares " + std::string(to_string(r.modality)) +
                                            "_dim " + std::to_string(want));
  }
  for (double v : r.vector) {
    if (!std::isfinite(v)) throw Error(ErrorCode::SchemaError, "record '" + r.id + "' has a non-finite component");
  }
}

}  // namespace

Corpus::Corpus(CorpusDims dims, std::vector<EmbeddingRecord> records, std::vector<Pair> oracle)
    : dims_(dims) {
  if (dims.image_dim == 0 || dims.text_dim == 0) throw Error(ErrorCode::SchemaError, "dimensions must be positive");
  for (auto& r : records) {
    check_record(r, dims_);
    (r.modality == Modality::Image ? images_ : texts_).push_back(std::move(r));
  }
  auto by_id = [](const EmbeddingRecord& a, const EmbeddingRecord& b) { return a.id < b.id; };
  std::sort(images_.begin(), images_.end(), by_id);
  std::sort(texts_.begin(), texts_.end(), by_id);
  for (const auto* list : {&images_, &texts_}) {
    auto dup = std::adjacent_find(list->begin(), list->end(),
                                  [](const auto& a, const auto& b) { return a.id == b.id; });
    if (dup != list->end()) throw Error(ErrorCode::SchemaError, "duplicate id '" + dup->id + "'");
  }
  reindex();

  for (auto& p : oracle) {
    if (!image_index_.contains(p.image_id))
      throw Error(ErrorCode::DanglingPair, "pair references unknown image id '" + p.image_id + "'");
    if (!text_index_.contains(p.text_id))
      throw Error(ErrorCode::DanglingPair, "pair references unknown text id '" + p.text_id + "'");
    if (!image_to_text_.emplace(p.image_id, p.text_id).second)
      throw Error(ErrorCode::SchemaError, "image id '" + p.image_id + "' paired more than once");
    if (!text_to_image_.emplace(p.text_id, p.image_id).second)
      throw Error(ErrorCode::SchemaError, "text id '" + p.text_id + "' paired more than once");
  }
  for (const auto& r : images_)
    if (!image_to_text_.contains(r.id)) throw Error(ErrorCode::SchemaError, "image id '" + r.id + "' has no pair");
  for (const auto& r : texts_)
    if (!text_to_image_.contains(r.id)) throw Error(ErrorCode::SchemaError, "text id '" + r.id + "' has no pair");

  oracle_ = std::move(oracle);
  std::sort(oracle_.begin(), oracle_.end());
}

void Corpus::reindex() {
  image_index_.clear();
  text_index_.clear();
  for (std::size_t i = 0; i < images_.size(); ++i) image_index_.emplace(images_[i].id, i);
  for (std::size_t i = 0; i < texts_.size(); ++i) text_index_.emplace(texts_[i].id, i);
}

const EmbeddingRecord* Corpus::find(Modality m, std::string_view id) const {
  const auto& index = m == Modality::Image ? image_index_ : text_index_;
  auto it = index.find(std::string(id));
  if (it == index.end()) return nullptr;
  return &records(m)[it->second];
}

const EmbeddingRecord& Corpus::at(Modality m, std::string_view id) const {
  if (const auto* r = find(m, id)) return *r;
  throw Error(ErrorCode::UnknownId, std::string(to_string(m)) + " id '" + std::string(id) + "' not in corpus");
}

std::optional<std::string> Corpus::counterpart(Modality m, std::string_view id) const {
  const auto& map = m == Modality::Image ? image_to_text_ : text_to_image_;
  auto it = map.find(std::string(id));
  if (it == map.end()) return std::nullopt;
  return it->second;
}

void Corpus::add_record(EmbeddingRecord record) {
  check_record(record, dims_);
  if (find(record.modality, record.id)) throw Error(ErrorCode::SchemaError, "duplicate id '" + record.id + "'");
  auto& list = record.modality == Modality::Image ? images_ : texts_;
  auto pos = std::lower_bound(list.begin(), list.end(), record.id,
                              [](const EmbeddingRecord& r, const std::string& id) { return r.id < id; });
  list.insert(pos, std::move(record));
  reindex();
}

bool Corpus::operator==(const Corpus& o) const {
  return dims_ == o.dims_ && images_ == o.images_ && texts_ == o.texts_ && oracle_ == o.oracle_;
}

// --- PairedSet --------------------------------------------------------------

PairedSet::PairedSet(std::vector<Pair> pairs) {
  pairs_.reserve(pairs.size());
  for (auto& p : pairs) add(std::move(p));
}

void PairedSet::add(Pair p) {
  if (images_.contains(p.image_id))
    throw Error(ErrorCode::InvalidArgument, "image id '" + p.image_id + "' already paired");
  if (texts_.contains(p.text_id))
    throw Error(ErrorCode::InvalidArgument, "text id '" + p.text_id + "' already paired");
  images_.insert(p.image_id);
  texts_.insert(p.text_id);
  pairs_.push_back(std::move(p));
}

bool PairedSet::contains(Modality m, const std::string& id) const {
  return (m == Modality::Image ? images_ : texts_).contains(id);
}

std::vector<std::string> PairedSet::ids(Modality m) const {
  std::vector<std::string> out;
  out.reserve(pairs_.size());
  for (const auto& p : pairs_) out.push_back(p.get(m));
  return out;
}

// --- I/O ---------------------------------------------------------------------

Corpus ingest_corpus(std::istream& embeddings, std::istream& pairs) {
  std::string line;
  std::size_t line_no = 0;
  auto parse_line = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, "embeddings line " + std::to_string(line_no) + ": " + e.what());
    }
  };

  CorpusDims dims;
  bool have_header = false;
  std::vector<EmbeddingRecord> records;
  while (std::getline(embeddings, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j = parse_line(line);
    const std::string where = "embeddings line " + std::to_string(line_no);
    if (!j.is_object()) throw Error(ErrorCode::ParseError, where + ": expected a JSON object");
    try {
      if (!have_header) {
        if (!j.contains("image_dim") || !j.contains("text_dim"))
          throw Error(ErrorCode::SchemaError, where + ": header must declare image_dim and text_dim");
        dims.image_dim = j.at("image_dim").get<std::size_t>();
        dims.text_dim = j.at("text_dim").get<std::size_t>();
        have_header = true;
        continue;
      }
      for (const char* key : {"id", "modality", "vector"})
        if (!j.contains(key)) throw Error(ErrorCode::SchemaError, where + ": missing field '" + key + "'");
      EmbeddingRecord r;
      r.id = j.at("id").get<std::string>();
      r.modality = parse_modality(j.at("modality").get<std::string>());
      r.vector = j.at("vector").get<std::vector<double>>();
      check_record(r, dims);
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SchemaError && e.detail().rfind("embeddings line", 0) != 0)
        throw Error(ErrorCode::SchemaError, where + ": " + e.detail());
      throw;
    }
  }
  if (!have_header) throw Error(ErrorCode::SchemaError, "embeddings file has no header line");

  std::vector<Pair> oracle;
  line_no = 0;
  bool have_pair_header = false;
  while (std::getline(pairs, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_pair_header) {
      if (line != "image_id,text_id")
        throw Error(ErrorCode::ParseError, "pairs line " + std::to_string(line_no) + ": expected header 'image_id,text_id'");
      have_pair_header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos || comma == 0 ||
        comma + 1 == line.size())
      throw Error(ErrorCode::ParseError, "pairs line " + std::to_string(line_no) + ": expected 'image_id,text_id'");
    oracle.push_back({line.substr(0, comma), line.substr(comma + 1)});
  }
  if (!have_pair_header) throw Error(ErrorCode::ParseError, "pairs file has no header line");

  return Corpus(dims, std::move(records), std::move(oracle));
}

Corpus ingest_corpus(const std::filesystem::path& embeddings_path, const std::filesystem::path& pairs_path) {
  std::ifstream emb(embeddings_path);
  if (!emb) throw Error(ErrorCode::IoError, "cannot open " + embeddings_path.string());
  std::ifstream prs(pairs_path);
  if (!prs) throw Error(ErrorCode::IoError, "cannot open " + pairs_path.string());
  return ingest_corpus(emb, prs);
}

void write_corpus(const Corpus& corpus, std::ostream& embeddings, std::ostream& pairs) {
  json header = {{"image_dim", corpus.dims().image_dim}, {"text_dim", corpus.dims().text_dim}};
  embeddings << header.dump() << '\n';
  for (Modality m : {Modality::Image, Modality::Text}) {
    for (const auto& r : corpus.records(m)) {
      json j = {{"id", r.id}, {"modality", std::string(to_string(m))}, {"vector", r.vector}};
      embeddings << j.dump() << '\n';
    }
  }
  pairs << "image_id,text_id\n";
  for (const auto& p : corpus.oracle()) pairs << p.image_id << ',' << p.text_id << '\n';
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& embeddings_path,
                  const std::filesystem::path& pairs_path) {
  std::ofstream emb(embeddings_path, std::ios::binary);
  std::ofstream prs(pairs_path, std::ios::binary);
  if (!emb || !prs) throw Error(ErrorCode::IoError, "cannot write corpus files");
  write_corpus(corpus, emb, prs);
  if (!emb || !prs) throw Error(ErrorCode::IoError, "write failed");
}

// --- synthesis ---------------------------------------------------------------

Corpus synth_corpus(const SynthParams& params) {
  if (params.n_clusters == 0 || params.per_cluster == 0 || params.dim == 0)
    throw Error(ErrorCode::InvalidArgument, "n_clusters, per_cluster and dim must be positive");
  if (params.noise_sigma < 0 || params.item_spread < 0)
    throw Error(ErrorCode::InvalidArgument, "noise_sigma and item_spread must be nonnegative");

  Rng rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = params.n_clusters * params.per_cluster;
  const int width = std::max<int>(5, static_cast<int>(std::to_string(n - 1).size()));
  auto make_id = [width](const char* prefix, std::size_t i) {
    std::ostringstream os;
    os << prefix << std::setw(width) << std::setfill('0') << i;
    return os.str();
  };

  std::vector<std::vector<double>> centers(params.n_clusters, std::vector<double>(params.dim));
  for (auto& c : centers) {
    double norm = 0;
    do {
      norm = 0;
      for (auto& v : c) {
        v = gauss(rng);
        norm += v * v;
      }
    } while (norm == 0);
    norm = std::sqrt(norm);
    for (auto& v : c) v /= norm;
  }

  std::vector<EmbeddingRecord> records;
  std::vector<Pair> oracle;
  records.reserve(2 * n);
  std::vector<double> latent(params.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& center = centers[i / params.per_cluster];
    for (std::size_t d = 0; d < params.dim; ++d) latent[d] = center[d] + params.item_spread * gauss(rng);
    EmbeddingRecord img{make_id("img_", i), Modality::Image, latent};
    EmbeddingRecord txt{make_id("txt_", i), Modality::Text, latent};
    for (auto& v : img.vector) v += params.noise_sigma * gauss(rng);
    for (auto& v : txt.vector) v += params.noise_sigma * gauss(rng);
    oracle.push_back({img.id, txt.id});
    records.push_back(std::move(img));
    records.push_back(std::move(txt));
  }
  return Corpus({params.dim, params.dim}, std::move(records), std::move(oracle));
}

// --- splitting ---------------------------------------------------------------

std::size_t fraction_count(double fraction, std::size_t n) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "fraction must lie in [0,1]");
  return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
}

Split split_corpus(const Corpus& corpus, std::size_t test_count, std::size_t init_count, Direction direction,
                   std::uint64_t seed) {
  const auto& oracle = corpus.oracle();
  if (test_count + init_count > oracle.size())
    throw Error(ErrorCode::InvalidArgument, "test + initial pairs exceed corpus size");

  std::vector<std::size_t> order(oracle.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Fisher-Yates with explicit draws (std::shuffle's draw pattern is unspecified).
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }

  Split out;
  out.pool.modality = queried_modality(direction);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Pair& p = oracle[order[i]];
    if (i < test_count)
      out.test.push_back(p);
    else if (i < test_count + init_count)
      out.paired.add(p);
    else
      out.pool.ids.push_back(p.get(out.pool.modality));
  }
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.pool.ids.begin(), out.pool.ids.end());
  return out;
}

std::pair<PairedSet, UnpairedPool> split_initial(const Corpus& corpus, double init_fraction, std::uint64_t seed) {
  auto s = split_corpus(corpus, 0, fraction_count(init_fraction, corpus.size()), Direction::ImagePool, seed);
  return {std::move(s.paired), std::move(s.pool)};
}

}  // namespace hnal
