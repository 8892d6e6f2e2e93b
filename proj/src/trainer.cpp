#include "hnal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hnal/base64.hpp"
#include "hnal/error.hpp"
#include "hnal/kernels.hpp"
#include "hnal/rng.hpp"

namespace hnal {

using nlohmann::json;

DualEncoderParams init_params(const CorpusDims& dims, std::size_t embed_dim, std::uint64_t seed) {
  if (embed_dim == 0) throw Error(ErrorCode::InvalidArgument, "embed_dim must be positive");
  Rng rng(seed);
  auto fill = [&](std::size_t rows) {
    Matrix m(rows, embed_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : m.data) v = u(rng);
    return m;
  };
  DualEncoderParams p;
  p.w_img = fill(dims.image_dim);
  p.w_txt = fill(dims.text_dim);
  p.embed_dim = embed_dim;
  return p;
}

std::vector<double> encode(const DualEncoderParams& model, const EmbeddingRecord& record) {
  const Matrix& w = model.projection(record.modality);
  if (record.vector.size() != w.rows)
    throw Error(ErrorCode::DimensionMismatch, "record '" + record.id + "' has " + std::to_string(record.vector.size()) +
                                                  " components, projection expects " + std::to_string(w.rows));
  std::vector<double> out(w.cols, 0.0);
  for (std::size_t d = 0; d < w.rows; ++d)
    for (std::size_t e = 0; e < w.cols; ++e) out[e] += record.vector[d] * w(d, e);
  return out;
}

namespace {

Matrix gather(const Corpus& corpus, Modality m, std::span<const std::string> ids) {
  Matrix x(ids.size(), corpus.dims().of(m));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = corpus.at(m, ids[i]).vector;
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  return x;
}

}  // namespace

EmbeddingBlock encode_block(const DualEncoderParams& model, const Corpus& corpus, Modality m,
                            std::span<const std::string> ids) {
  const Matrix& w = model.projection(m);
  if (corpus.dims().of(m) != w.rows) throw Error(ErrorCode::DimensionMismatch, "model does not match corpus dims");
  Matrix x = gather(corpus, m, ids);
  Matrix out;
  kernels::project_rows(x, w, out);
  return make_block({ids.begin(), ids.end()}, std::move(out));
}

HingeLossGrad max_hinge_loss_grad(const Matrix& sim, double alpha) {
  if (sim.rows != sim.cols) throw Error(ErrorCode::InvalidArgument, "similarity matrix must be square");
  const std::size_t n = sim.rows;
  if (n < 2) throw Error(ErrorCode::BatchTooSmall, "need at least two pairs per batch");
  HingeLossGrad out{0.0, Matrix(n, n)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    // hardest negative text for image i (row), hardest negative image for text i (column)
    std::size_t neg_txt = i == 0 ? 1 : 0;
    std::size_t neg_img = neg_txt;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (sim(i, j) > sim(i, neg_txt)) neg_txt = j;
      if (sim(j, i) > sim(neg_img, i)) neg_img = j;
    }
    const double pos = sim(i, i);
    const double h_txt = alpha + sim(i, neg_txt) - pos;
    const double h_img = alpha + sim(neg_img, i) - pos;
    if (h_txt > 0) {
      out.loss += h_txt;
      out.d_sim(i, neg_txt) += inv_n;
      out.d_sim(i, i) -= inv_n;
    }
    if (h_img > 0) {
      out.loss += h_img;
      out.d_sim(neg_img, i) += inv_n;
      out.d_sim(i, i) -= inv_n;
    }
  }
  out.loss *= inv_n;
  return out;
}

double max_hinge_loss(const Matrix& sim, double alpha) { return max_hinge_loss_grad(sim, alpha).loss; }

BatchGradient batch_loss_gradient(const DualEncoderParams& model, const Matrix& images, const Matrix& texts,
                                  double alpha) {
  if (images.rows != texts.rows) throw Error(ErrorCode::InvalidArgument, "batch sides differ in size");
  const std::size_t n = images.rows;
  const std::size_t e = model.embed_dim;
  Matrix a, b;
  kernels::reference::project_rows(images, model.w_img, a);
  kernels::reference::project_rows(texts, model.w_txt, b);
  const auto na = kernels::reference::row_norms(a);
  const auto nb = kernels::reference::row_norms(b);
  for (std::size_t i = 0; i < n; ++i)
    if (!(na[i] > 0) || !(nb[i] > 0)) throw Error(ErrorCode::ZeroVector, "zero embedding in batch");
  Matrix sim;
  kernels::reference::cosine_matrix(a, na, b, nb, sim);
  const HingeLossGrad hl = max_hinge_loss_grad(sim, alpha);

  // Unit vectors.
  Matrix ua = a, ub = b;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < e; ++k) {
      ua(i, k) /= na[i];
      ub(i, k) /= nb[i];
    }

  // dS_ij/da_i = (ub_j - S_ij ua_i) / |a_i|,  dS_ij/db_j = (ua_i - S_ij ub_j) / |b_j|
  Matrix ga(n, e), gb(n, e);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = hl.d_sim(i, j);
      if (g == 0.0) continue;
      const double s = sim(i, j);
      for (std::size_t k = 0; k < e; ++k) {
        ga(i, k) += g * (ub(j, k) - s * ua(i, k)) / na[i];
        gb(j, k) += g * (ua(i, k) - s * ub(j, k)) / nb[j];
      }
    }
  }

  BatchGradient out{hl.loss, Matrix(images.cols, e), Matrix(texts.cols, e)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < images.cols; ++d) {
      const double x = images(i, d);
      if (x != 0.0)
        for (std::size_t k = 0; k < e; ++k) out.d_img(d, k) += x * ga(i, k);
    }
    for (std::size_t d = 0; d < texts.cols; ++d) {
      const double y = texts(i, d);
      if (y != 0.0)
        for (std::size_t k = 0; k < e; ++k) out.d_txt(d, k) += y * gb(i, k);
    }
  }
  return out;
}

DualEncoderParams train(const DualEncoderParams& initial, const PairedSet& paired, const Corpus& corpus,
                        const TrainConfig& config, TrainReport* report) {
  if (config.batch_size < 2) throw Error(ErrorCode::BatchTooSmall, "batch_size must be at least 2");
  if (paired.size() < config.batch_size)
    throw Error(ErrorCode::TooFewPairs, std::to_string(paired.size()) + " pairs for batch size " +
                                            std::to_string(config.batch_size));
  if (initial.w_img.rows != corpus.dims().image_dim || initial.w_txt.rows != corpus.dims().text_dim)
    throw Error(ErrorCode::DimensionMismatch, "model does not match corpus dims");

  const auto image_ids = paired.ids(Modality::Image);
  const auto text_ids = paired.ids(Modality::Text);
  const Matrix all_img = gather(corpus, Modality::Image, image_ids);
  const Matrix all_txt = gather(corpus, Modality::Text, text_ids);

  DualEncoderParams model = initial;
  Rng rng(config.seed);
  std::vector<std::size_t> order(paired.size());
  std::iota(order.begin(), order.end(), 0);
  if (report) report->epoch_mean_loss.clear();

  const std::size_t n = order.size();
  const std::size_t bs = config.batch_size;
  Matrix bx, by;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    const double lr = epoch < config.lr_decay_epoch ? config.learning_rate : config.learning_rate / 10.0;
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n;) {
      std::size_t end = std::min(n, start + bs);
      if (n - end < 2) end = n;  // fold a trailing singleton into this batch
      const std::size_t m = end - start;
      bx = Matrix(m, all_img.cols);
      by = Matrix(m, all_txt.cols);
      for (std::size_t r = 0; r < m; ++r) {
        const auto src = order[start + r];
        std::copy_n(all_img.row(src).begin(), all_img.cols, bx.row(r).begin());
        std::copy_n(all_txt.row(src).begin(), all_txt.cols, by.row(r).begin());
      }
      const BatchGradient g = batch_loss_gradient(model, bx, by, config.alpha);
      if (!std::isfinite(g.loss))
        throw Error(ErrorCode::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch));
      for (std::size_t k = 0; k < model.w_img.data.size(); ++k) model.w_img.data[k] -= lr * g.d_img.data[k];
      for (std::size_t k = 0; k < model.w_txt.data.size(); ++k) model.w_txt.data[k] -= lr * g.d_txt.data[k];
      loss_sum += g.loss;
      ++batches;
      start = end;
    }
    if (report) report->epoch_mean_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  for (double v : model.w_img.data)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLoss, "non-finite image projection");
  for (double v : model.w_txt.data)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLoss, "non-finite text projection");
  return model;
}

// --- checkpoint --------------------------------------------------------------

json model_to_json(const DualEncoderParams& model) {
  return json{{"format", "hnal-model"},
              {"version", 1},
              {"image_dim", model.w_img.rows},
              {"text_dim", model.w_txt.rows},
              {"embed_dim", model.embed_dim},
              {"w_img", encode_doubles_base64(model.w_img.data)},
              {"w_txt", encode_doubles_base64(model.w_txt.data)}};
}

DualEncoderParams model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "hnal-model" || j.at("version").get<int>() != 1)
      throw Error(ErrorCode::VersionMismatch, "unsupported model checkpoint");
    DualEncoderParams p;
    p.embed_dim = j.at("embed_dim").get<std::size_t>();
    const auto image_dim = j.at("image_dim").get<std::size_t>();
    const auto text_dim = j.at("text_dim").get<std::size_t>();
    p.w_img = Matrix(image_dim, p.embed_dim);
    p.w_txt = Matrix(text_dim, p.embed_dim);
    p.w_img.data = decode_doubles_base64(j.at("w_img").get<std::string>());
    p.w_txt.data = decode_doubles_base64(j.at("w_txt").get<std::string>());
    if (p.w_img.data.size() != image_dim * p.embed_dim || p.w_txt.data.size() != text_dim * p.embed_dim)
      throw Error(ErrorCode::VersionMismatch, "model payload size does not match declared dims");
    for (const auto* m : {&p.w_img, &p.w_txt})
      for (double v : m->data)
        if (!std::isfinite(v)) throw Error(ErrorCode::VersionMismatch, "non-finite model entry");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::VersionMismatch, std::string("malformed model checkpoint: ") + e.what());
  }
}

void save_model(const DualEncoderParams& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << model_to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

DualEncoderParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::VersionMismatch, "unreadable model checkpoint: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace hnal
