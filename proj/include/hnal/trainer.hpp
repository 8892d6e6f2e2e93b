#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hnal/corpus.hpp"
#include "hnal/matrix.hpp"
#include "hnal/sim.hpp"

namespace hnal {

// Two linear projections into a shared embedding space.
struct DualEncoderParams {
  Matrix w_img;  // image_dim x embed_dim
  Matrix w_txt;  // text_dim x embed_dim
  std::size_t embed_dim = 0;

  const Matrix& projection(Modality m) const { return m == Modality::Image ? w_img : w_txt; }
  bool operator==(const DualEncoderParams&) const = default;
};

struct TrainConfig {
  double alpha = 0.2;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1.0;
  std::size_t lr_decay_epoch = 15;  // lr drops 10x from this epoch on
  std::size_t embed_dim = 32;
  std::uint64_t seed = 0;
};

// Seeded uniform init in [-1/sqrt(rows), 1/sqrt(rows)] per matrix.
DualEncoderParams init_params(const CorpusDims& dims, std::size_t embed_dim, std::uint64_t seed);

// Throws DimensionMismatch.
std::vector<double> encode(const DualEncoderParams& model, const EmbeddingRecord& record);

// Encodes the given ids of one modality as a block (rows in id order).
EmbeddingBlock encode_block(const DualEncoderParams& model, const Corpus& corpus, Modality m,
                            std::span<const std::string> ids);

// Max-of-hinges triplet loss over a square in-batch similarity matrix whose
// diagonal holds the positive pairs; rows are images, columns texts.
// Averaged over pairs. Throws BatchTooSmall for n < 2.
double max_hinge_loss(const Matrix& sim, double alpha);

struct HingeLossGrad {
  double loss = 0;
  Matrix d_sim;  // dLoss / dSim
};

// Subgradient conventions: an inactive hinge (value <= 0) contributes
// nothing; argmax ties resolve to the lowest batch index.
HingeLossGrad max_hinge_loss_grad(const Matrix& sim, double alpha);

struct BatchGradient {
  double loss = 0;
  Matrix d_img;
  Matrix d_txt;
};

// Loss and gradient w.r.t. both projections for one batch of raw vectors
// (row i of images pairs with row i of texts).
BatchGradient batch_loss_gradient(const DualEncoderParams& model, const Matrix& images, const Matrix& texts,
                                  double alpha);

struct TrainReport {
  std::vector<double> epoch_mean_loss;
};

// Mini-batch SGD starting from `initial`. Callers pass the same initial
// parameters every round to retrain from scratch.
// Throws TooFewPairs, NonFiniteLoss.
DualEncoderParams train(const DualEncoderParams& initial, const PairedSet& paired, const Corpus& corpus,
                        const TrainConfig& config, TrainReport* report = nullptr);

// Checkpoint: dims plus base64 little-endian float64 payloads.
nlohmann::json model_to_json(const DualEncoderParams& model);
DualEncoderParams model_from_json(const nlohmann::json& j);
void save_model(const DualEncoderParams& model, const std::filesystem::path& path);
DualEncoderParams load_model(const std::filesystem::path& path);

}  // namespace hnal
