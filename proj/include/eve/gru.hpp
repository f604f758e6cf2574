#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "eve/ingest.hpp"

namespace eve {

/// Trainable word vectors plus hashed character n-gram buckets used to
/// synthesize vectors for out-of-vocabulary words.
struct EmbeddingTable {
  std::size_t dim = 300;
  Eigen::MatrixXd word_vectors;   // |V| x dim
  Eigen::MatrixXd ngram_buckets;  // B x dim
};

/// One GRU layer; gate weights act on the concatenation [h_prev; x].
struct GruLayerParams {
  Eigen::MatrixXd w_update, w_reset, w_cand;  // state x (state + input)
  Eigen::VectorXd b_update, b_reset, b_cand;  // state

  std::size_t state() const { return static_cast<std::size_t>(b_update.size()); }
  std::size_t input() const {
    return static_cast<std::size_t>(w_update.cols()) - state();
  }
};

struct TrainConfig {
  double lr = 2e-4;
  std::size_t batch = 60;
  std::size_t epochs = 50;
  double dropout = 0.5;
  std::size_t max_len = 30;
  std::uint64_t seed = 1;
  double rms_decay = 0.9;
  double rms_eps = 1e-8;
  double clip_norm = 5.0;
  std::size_t beam = 1;
};

/// Two-layer GRU language model conditioned on a visual code: both layers
/// start from h0 = upsilon, layer 1 consumes word embeddings, layer 2
/// consumes layer 1's (dropout-masked) output.
struct GruModel {
  Vocabulary vocab;
  EmbeddingTable embedding;
  GruLayerParams layer1, layer2;
  Eigen::MatrixXd output_w;  // |V| x state
  Eigen::VectorXd output_b;  // |V|
  std::size_t state_size = 2048;
  TrainConfig config;
};

/// Fresh model with zero biases, Glorot-uniform weight matrices and
/// uniform(-0.1, 0.1) embeddings, all drawn in a fixed documented order
/// from mt19937_64 seeded by config.seed.
GruModel init_model(Vocabulary vocab, std::size_t state_size, TrainConfig config,
                    std::size_t embed_dim = 300, std::size_t ngram_buckets = 4096);

/// Single GRU step: update/reset gates, candidate state, convex blend.
Eigen::VectorXd gru_cell(const GruLayerParams& params, const Eigen::VectorXd& h_prev,
                         const Eigen::VectorXd& x);

/// Embedding row of an in-vocabulary index.
Eigen::VectorXd embed(const GruModel& model, std::int32_t token_index);

/// Vocabulary row when known; otherwise the sum of hashed bucket vectors
/// for all character n-grams (n = 3..6) of "<word>" (FNV-1a 64, modulo B).
Eigen::VectorXd embed_word(const GruModel& model, const std::string& word);

/// Teacher-forced batch over L = max_len - 1 steps: input is the encoded
/// caption, target the same sequence shifted left; mask is 1 exactly on
/// non-PAD targets.
struct TrainingBatch {
  Eigen::MatrixXd upsilon;                     // state x B
  Eigen::Matrix<std::int32_t, -1, -1> input;   // B x L
  Eigen::Matrix<std::int32_t, -1, -1> target;  // B x L
  Eigen::MatrixXd mask;                        // B x L
};

TrainingBatch make_batch(const std::vector<Eigen::VectorXd>& upsilons,
                         const std::vector<std::vector<std::int32_t>>& encoded_captions);

/// Inverted-dropout masks (0 or 1/(1-rate)) for each layer output at each
/// step. Draw order: step 0 layer 1, step 0 layer 2, step 1 layer 1, ...;
/// each mask is filled row-major. rate 0 draws nothing and keeps everything.
struct DropoutPlan {
  double rate = 0.0;
  std::vector<Eigen::MatrixXd> layer1, layer2;  // per step, state x B
};

DropoutPlan make_dropout_plan(std::size_t state, std::size_t batch, std::size_t steps,
                              double rate, std::mt19937_64& eng);

struct LayerStepCache {
  Eigen::MatrixXd h_prev, update, reset, cand, x;
};

struct Forward {
  std::vector<Eigen::MatrixXd> logits;  // per step, |V| x B
  std::vector<LayerStepCache> layer1, layer2;
  std::vector<Eigen::MatrixXd> layer2_out;  // logits input (post-dropout)
  const DropoutPlan* plan = nullptr;        // null for inference
  bool training = false;
};

/// plan == nullptr runs inference (no dropout, nothing cached for backward
/// beyond what forward itself needs).
Forward forward(const GruModel& model, const TrainingBatch& batch,
                const DropoutPlan* plan = nullptr);

/// Mean negative log-likelihood of targets over unmasked positions.
double loss(const std::vector<Eigen::MatrixXd>& logits, const TrainingBatch& batch);

struct Gradients {
  Eigen::MatrixXd word_vectors;
  GruLayerParams layer1, layer2;  // same shapes, holding gradients
  Eigen::MatrixXd output_w;
  Eigen::VectorXd output_b;
};

/// Exact gradients via backpropagation through time; requires the cache of
/// a training-mode forward on the same batch.
Gradients backward(const GruModel& model, const TrainingBatch& batch, const Forward& fwd);

/// s <- decay*s + (1-decay)*g^2; p <- p - lr*g/(sqrt(s)+eps), elementwise.
void rmsprop_step(std::span<double> params, std::span<const double> grads,
                  std::span<double> state, double lr, double decay = 0.9, double eps = 1e-8);

double gradient_norm(const Gradients& grads);
void scale_gradients(Gradients& grads, double factor);

struct TrainSample {
  std::size_t code_index = 0;               // into the codes vector
  std::vector<std::int32_t> encoded;        // encode_caption output, max_len long
};

using EpochSink = std::function<void(std::size_t epoch, const GruModel& model, double loss)>;

/// Shuffle/batch/update loop; deterministic for a fixed config.seed. Returns
/// the per-token cross-entropy of each epoch and calls sink after each one.
std::vector<double> train(GruModel& model, const std::vector<Eigen::VectorXd>& codes,
                          const std::vector<TrainSample>& samples,
                          const EpochSink& sink = EpochSink());

/// Argmax decoding from BOS until EOS or max_len tokens; ties take the
/// lowest index. Returns content token indices (no BOS/EOS).
std::vector<std::int32_t> greedy_decode(const GruModel& model, const Eigen::VectorXd& upsilon,
                                        std::size_t max_len);

/// Length-normalized beam search; finished hypotheses are frozen. beam=1
/// reproduces greedy_decode exactly.
std::vector<std::int32_t> beam_decode(const GruModel& model, const Eigen::VectorXd& upsilon,
                                      std::size_t max_len, std::size_t beam = 5);

/// Sum of per-step log-probabilities of the token sequence plus the final
/// EOS, under teacher forcing.
double sequence_logprob(const GruModel& model, const Eigen::VectorXd& upsilon,
                        const std::vector<std::int32_t>& tokens);

// Checkpoint format: magic "EVEM", u32 version=1, u32 header length, JSON
// header (shapes, config, seed, vocabulary), then named parameter tensors
// as u32 name length, name, u32 rows, u32 cols, row-major little-endian
// binary64 payload.
void save_checkpoint(const GruModel& model, const std::filesystem::path& path);
GruModel load_checkpoint(const std::filesystem::path& path);

}  // namespace eve
