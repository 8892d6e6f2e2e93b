#include "hnal/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hnal/error.hpp"
#include "hnal/kernels.hpp"

namespace hnal {

namespace {

EmbeddingBlock encode_records(const DualEncoderParams& model, std::span<const EmbeddingRecord> records) {
  std::vector<std::string> ids;
  Matrix encoded(records.size(), model.embed_dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    ids.push_back(records[i].id);
    const auto v = encode(model, records[i]);
    std::copy(v.begin(), v.end(), encoded.row(i).begin());
  }
  return make_block(std::move(ids), std::move(encoded));
}

double recall_from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) return 0.0;
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

void check_k(std::size_t k, std::size_t gallery) {
  if (k == 0 || k > gallery)
    throw Error(ErrorCode::KOutOfRange, "K=" + std::to_string(k) + " for a gallery of " + std::to_string(gallery));
}

}  // namespace

std::vector<std::size_t> match_ranks(const SimilarityMatrix& sim, const std::map<std::string, std::string>& oracle) {
  std::map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < sim.cols.size(); ++j) col_of.emplace(sim.cols[j], j);
  // position of each column in lexicographic id order
  std::vector<std::size_t> tie_order(sim.cols.size());
  {
    std::size_t pos = 0;
    for (const auto& [id, j] : col_of) tie_order[j] = pos++;
  }
  std::vector<std::size_t> truth(sim.rows.size());
  for (std::size_t i = 0; i < sim.rows.size(); ++i) {
    auto o = oracle.find(sim.rows[i]);
    if (o == oracle.end()) throw Error(ErrorCode::MissingOracleMatch, "no oracle match for '" + sim.rows[i] + "'");
    auto c = col_of.find(o->second);
    if (c == col_of.end())
      throw Error(ErrorCode::MissingOracleMatch, "match '" + o->second + "' of '" + sim.rows[i] + "' not in gallery");
    truth[i] = c->second;
  }
  std::vector<std::size_t> ranks(sim.rows.size());
  kernels::match_ranks(sim.values, truth, tie_order, ranks);
  return ranks;
}

double recall_at_k(const DualEncoderParams& model, std::span<const EmbeddingRecord> queries,
                   std::span<const EmbeddingRecord> gallery, const std::map<std::string, std::string>& oracle,
                   std::size_t k) {
  check_k(k, gallery.size());
  const auto sim = similarity_matrix(encode_records(model, queries), encode_records(model, gallery));
  return recall_from_ranks(match_ranks(sim, oracle), k);
}

EpochMetrics evaluate(const DualEncoderParams& model, const Corpus& corpus, std::span<const Pair> test_pairs,
                      std::span<const std::size_t> ks, std::size_t epoch, double paired_fraction) {
  std::vector<std::string> image_ids, text_ids;
  std::map<std::string, std::string> i2t, t2i;
  for (const auto& p : test_pairs) {
    image_ids.push_back(p.image_id);
    text_ids.push_back(p.text_id);
    i2t.emplace(p.image_id, p.text_id);
    t2i.emplace(p.text_id, p.image_id);
  }
  for (auto k : ks) check_k(k, test_pairs.size());
  const EmbeddingBlock img = encode_block(model, corpus, Modality::Image, image_ids);
  const EmbeddingBlock txt = encode_block(model, corpus, Modality::Text, text_ids);
  const auto text_ranks = match_ranks(similarity_matrix(img, txt), i2t);
  const auto image_ranks = match_ranks(similarity_matrix(txt, img), t2i);

  EpochMetrics m;
  m.epoch = epoch;
  m.paired_fraction = paired_fraction;
  for (auto k : ks) {
    m.r_at_k_text[k] = recall_from_ranks(text_ranks, k);
    m.r_at_k_image[k] = recall_from_ranks(image_ranks, k);
  }
  return m;
}

double r_at_k_sum(std::span<const EpochMetrics> history, std::size_t k) {
  if (history.empty()) throw Error(ErrorCode::EmptyInput, "empty metric history");
  double total = 0;
  for (const auto& m : history) {
    auto t = m.r_at_k_text.find(k);
    auto i = m.r_at_k_image.find(k);
    if (t == m.r_at_k_text.end() || i == m.r_at_k_image.end())
      throw Error(ErrorCode::MissingK, "epoch " + std::to_string(m.epoch) + " has no R@" + std::to_string(k));
    total += t->second + i->second;
  }
  return 100.0 * total;
}

void write_metrics_csv(std::span<const EpochMetrics> history, std::ostream& out) {
  out << "epoch,paired_fraction,direction,K,recall\n";
  char buf[128];
  for (const auto& m : history) {
    for (const auto* series : {&m.r_at_k_text, &m.r_at_k_image}) {
      const char* dir = series == &m.r_at_k_text ? "text_retrieval" : "image_retrieval";
      for (const auto& [k, r] : *series) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%s,%zu,%.6f\n", m.epoch, m.paired_fraction, dir, k, r);
        out << buf;
      }
    }
  }
}

std::vector<EpochMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<EpochMetrics> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "epoch,paired_fraction,direction,K,recall")
        throw Error(ErrorCode::ParseError, "metrics line 1: unexpected header");
      continue;
    }
    std::stringstream ss(line);
    std::string f[5];
    for (int i = 0; i < 5; ++i)
      if (!std::getline(ss, f[i], ','))
        throw Error(ErrorCode::ParseError, "metrics line " + std::to_string(line_no) + ": expected 5 fields");
    try {
      const std::size_t epoch = std::stoul(f[0]);
      auto it = std::find_if(out.begin(), out.end(), [&](const EpochMetrics& m) { return m.epoch == epoch; });
      if (it == out.end()) {
        out.push_back({});
        it = std::prev(out.end());
        it->epoch = epoch;
      }
      it->paired_fraction = std::stod(f[1]);
      const std::size_t k = std::stoul(f[3]);
      const double r = std::stod(f[4]);
      if (f[2] == "text_retrieval")
        it->r_at_k_text[k] = r;
      else if (f[2] == "image_retrieval")
        it->r_at_k_image[k] = r;
      else
        throw Error(ErrorCode::ParseError, "metrics line " + std::to_string(line_no) + ": unknown direction");
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "metrics line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

}  // namespace hnal
