#include "eve/gru.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "eve/errors.hpp"
#include "eve/rng.hpp"
#include "json.hpp"

namespace eve {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

MatrixXd glorot(std::size_t rows, std::size_t cols, std::mt19937_64& eng) {
  MatrixXd m(static_cast<long>(rows), static_cast<long>(cols));
  const double scale = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) m(r, c) = uniform_symmetric(eng, scale);
  return m;
}

MatrixXd uniform_matrix(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& eng) {
  MatrixXd m(static_cast<long>(rows), static_cast<long>(cols));
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) m(r, c) = uniform_symmetric(eng, scale);
  return m;
}

GruLayerParams init_layer(std::size_t state, std::size_t input, std::mt19937_64& eng) {
  GruLayerParams p;
  p.w_update = glorot(state, state + input, eng);
  p.w_reset = glorot(state, state + input, eng);
  p.w_cand = glorot(state, state + input, eng);
  p.b_update = VectorXd::Zero(static_cast<long>(state));
  p.b_reset = VectorXd::Zero(static_cast<long>(state));
  p.b_cand = VectorXd::Zero(static_cast<long>(state));
  return p;
}

inline MatrixXd sigmoid(const MatrixXd& m) {
  return ((-m.array()).exp() + 1.0).inverse().matrix();
}

// One batched GRU step; fills the cache entry used by cell_backward.
MatrixXd cell_step(const GruLayerParams& p, const MatrixXd& h_prev, const MatrixXd& x,
                   LayerStepCache* cache) {
  const long state = static_cast<long>(p.state());
  const long input = static_cast<long>(p.input());
  const long batch = h_prev.cols();

  MatrixXd z(state + input, batch);
  z.topRows(state) = h_prev;
  z.bottomRows(input) = x;

  MatrixXd update = sigmoid((p.w_update * z).colwise() + p.b_update);
  MatrixXd reset = sigmoid((p.w_reset * z).colwise() + p.b_reset);

  MatrixXd zr(state + input, batch);
  zr.topRows(state) = reset.cwiseProduct(h_prev);
  zr.bottomRows(input) = x;

  MatrixXd cand = ((p.w_cand * zr).colwise() + p.b_cand).array().tanh().matrix();
  MatrixXd h = update.cwiseProduct(cand) + (1.0 - update.array()).matrix().cwiseProduct(h_prev);

  if (cache) {
    cache->h_prev = h_prev;
    cache->update = std::move(update);
    cache->reset = std::move(reset);
    cache->cand = std::move(cand);
    cache->x = x;
  }
  return h;
}

// Reverse of cell_step: accumulates parameter gradients into g and returns
// the gradients flowing to h_prev and x.
void cell_backward(const GruLayerParams& p, const LayerStepCache& c, const MatrixXd& d_h,
                   GruLayerParams& g, MatrixXd& d_h_prev, MatrixXd& d_x) {
  const long state = static_cast<long>(p.state());
  const long input = static_cast<long>(p.input());
  const long batch = d_h.cols();

  MatrixXd d_update = d_h.cwiseProduct(c.cand - c.h_prev);
  MatrixXd d_cand = d_h.cwiseProduct(c.update);
  d_h_prev = d_h.cwiseProduct((1.0 - c.update.array()).matrix());

  MatrixXd d_a_cand = d_cand.cwiseProduct((1.0 - c.cand.array().square()).matrix());
  MatrixXd zr(state + input, batch);
  zr.topRows(state) = c.reset.cwiseProduct(c.h_prev);
  zr.bottomRows(input) = c.x;
  g.w_cand.noalias() += d_a_cand * zr.transpose();
  g.b_cand += d_a_cand.rowwise().sum();

  MatrixXd d_zr = p.w_cand.transpose() * d_a_cand;
  MatrixXd d_reset_h = d_zr.topRows(state);
  d_x = d_zr.bottomRows(input);

  MatrixXd d_reset = d_reset_h.cwiseProduct(c.h_prev);
  d_h_prev += d_reset_h.cwiseProduct(c.reset);

  MatrixXd d_a_update =
      d_update.cwiseProduct(c.update).cwiseProduct((1.0 - c.update.array()).matrix());
  MatrixXd d_a_reset =
      d_reset.cwiseProduct(c.reset).cwiseProduct((1.0 - c.reset.array()).matrix());

  MatrixXd z(state + input, batch);
  z.topRows(state) = c.h_prev;
  z.bottomRows(input) = c.x;
  g.w_update.noalias() += d_a_update * z.transpose();
  g.b_update += d_a_update.rowwise().sum();
  g.w_reset.noalias() += d_a_reset * z.transpose();
  g.b_reset += d_a_reset.rowwise().sum();

  MatrixXd d_z = p.w_update.transpose() * d_a_update + p.w_reset.transpose() * d_a_reset;
  d_h_prev += d_z.topRows(state);
  d_x += d_z.bottomRows(input);
}

GruLayerParams zeros_like(const GruLayerParams& p) {
  GruLayerParams g;
  g.w_update = MatrixXd::Zero(p.w_update.rows(), p.w_update.cols());
  g.w_reset = MatrixXd::Zero(p.w_reset.rows(), p.w_reset.cols());
  g.w_cand = MatrixXd::Zero(p.w_cand.rows(), p.w_cand.cols());
  g.b_update = VectorXd::Zero(p.b_update.size());
  g.b_reset = VectorXd::Zero(p.b_reset.size());
  g.b_cand = VectorXd::Zero(p.b_cand.size());
  return g;
}

Gradients zero_gradients(const GruModel& model) {
  Gradients g;
  g.word_vectors = MatrixXd::Zero(model.embedding.word_vectors.rows(),
                                  model.embedding.word_vectors.cols());
  g.layer1 = zeros_like(model.layer1);
  g.layer2 = zeros_like(model.layer2);
  g.output_w = MatrixXd::Zero(model.output_w.rows(), model.output_w.cols());
  g.output_b = VectorXd::Zero(model.output_b.size());
  return g;
}

// Flat views of every trainable tensor, in one fixed order shared by the
// optimizer loop, gradient norm and checkpointing.
struct FlatView {
  double* data;
  std::size_t size;
};

template <typename G>
std::vector<FlatView> flat_views(G& grads) {
  auto view = [](auto& m) {
    return FlatView{const_cast<double*>(m.data()), static_cast<std::size_t>(m.size())};
  };
  std::vector<FlatView> out{view(grads.word_vectors)};
  for (auto* layer : {&grads.layer1, &grads.layer2}) {
    out.push_back(view(layer->w_update));
    out.push_back(view(layer->w_reset));
    out.push_back(view(layer->w_cand));
    out.push_back(view(layer->b_update));
    out.push_back(view(layer->b_reset));
    out.push_back(view(layer->b_cand));
  }
  out.push_back(view(grads.output_w));
  out.push_back(view(grads.output_b));
  return out;
}

std::vector<FlatView> model_views(GruModel& model) {
  auto view = [](auto& m) {
    return FlatView{m.data(), static_cast<std::size_t>(m.size())};
  };
  std::vector<FlatView> out{view(model.embedding.word_vectors)};
  for (auto* layer : {&model.layer1, &model.layer2}) {
    out.push_back(view(layer->w_update));
    out.push_back(view(layer->w_reset));
    out.push_back(view(layer->w_cand));
    out.push_back(view(layer->b_update));
    out.push_back(view(layer->b_reset));
    out.push_back(view(layer->b_cand));
  }
  out.push_back(view(model.output_w));
  out.push_back(view(model.output_b));
  return out;
}

std::size_t count_unmasked(const TrainingBatch& batch) {
  return static_cast<std::size_t>(batch.mask.sum() + 0.5);
}

VectorXd col_logsumexp(const MatrixXd& logits) {
  VectorXd out(logits.cols());
  for (long c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    out(c) = mx + std::log((logits.col(c).array() - mx).exp().sum());
  }
  return out;
}

}  // namespace

GruModel init_model(Vocabulary vocab, std::size_t state_size, TrainConfig config,
                    std::size_t embed_dim, std::size_t ngram_buckets) {
  if (state_size < 1) throw ArgumentError("init_model: state_size must be >= 1");
  if (vocab.size() < 4) throw ArgumentError("init_model: vocabulary too small");
  if (ngram_buckets < 1) throw ArgumentError("init_model: need at least one n-gram bucket");

  GruModel model;
  model.vocab = std::move(vocab);
  model.state_size = state_size;
  model.config = config;

  // Draw order: word vectors, n-gram buckets, layer 1 gates, layer 2 gates,
  // output matrix; each matrix row-major. Biases start at zero.
  auto eng = seeded_engine(config.seed, 0x6d6f64656cull);
  model.embedding.dim = embed_dim;
  model.embedding.word_vectors = uniform_matrix(model.vocab.size(), embed_dim, 0.1, eng);
  model.embedding.ngram_buckets = uniform_matrix(ngram_buckets, embed_dim, 0.1, eng);
  model.layer1 = init_layer(state_size, embed_dim, eng);
  model.layer2 = init_layer(state_size, state_size, eng);
  model.output_w = glorot(model.vocab.size(), state_size, eng);
  model.output_b = VectorXd::Zero(static_cast<long>(model.vocab.size()));
  return model;
}

Eigen::VectorXd gru_cell(const GruLayerParams& params, const Eigen::VectorXd& h_prev,
                         const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(h_prev.size()) != params.state() ||
      static_cast<std::size_t>(x.size()) != params.input())
    throw DimensionError("gru_cell: h_prev/x dimensions do not match the layer");
  return cell_step(params, h_prev, x, nullptr);
}

Eigen::VectorXd embed(const GruModel& model, std::int32_t token_index) {
  if (token_index < 0 || static_cast<std::size_t>(token_index) >= model.vocab.size())
    throw ArgumentError("embed: token index out of range");
  return model.embedding.word_vectors.row(token_index).transpose();
}

Eigen::VectorXd embed_word(const GruModel& model, const std::string& word) {
  if (model.vocab.contains(word)) return embed(model, model.vocab.lookup(word));
  VectorXd sum = VectorXd::Zero(static_cast<long>(model.embedding.dim));
  const std::string bracketed = "<" + word + ">";
  const std::size_t buckets = static_cast<std::size_t>(model.embedding.ngram_buckets.rows());
  for (std::size_t n = 3; n <= 6; ++n) {
    if (bracketed.size() < n) break;
    for (std::size_t i = 0; i + n <= bracketed.size(); ++i) {
      const auto bucket = fnv1a64(std::string_view(bracketed).substr(i, n)) % buckets;
      sum += model.embedding.ngram_buckets.row(static_cast<long>(bucket)).transpose();
    }
  }
  return sum;
}

TrainingBatch make_batch(const std::vector<Eigen::VectorXd>& upsilons,
                         const std::vector<std::vector<std::int32_t>>& encoded_captions) {
  if (upsilons.empty() || upsilons.size() != encoded_captions.size())
    throw ArgumentError("make_batch: need matching nonempty codes and captions");
  const std::size_t max_len = encoded_captions.front().size();
  if (max_len < 2) throw ArgumentError("make_batch: encoded captions too short");
  const long steps = static_cast<long>(max_len - 1);
  const long batch = static_cast<long>(upsilons.size());

  TrainingBatch out;
  out.upsilon.resize(upsilons.front().size(), batch);
  out.input.resize(batch, steps);
  out.target.resize(batch, steps);
  out.mask.resize(batch, steps);
  for (long b = 0; b < batch; ++b) {
    const auto& enc = encoded_captions[static_cast<std::size_t>(b)];
    if (enc.size() != max_len)
      throw DimensionError("make_batch: encoded captions must share one length");
    if (upsilons[static_cast<std::size_t>(b)].size() != out.upsilon.rows())
      throw DimensionError("make_batch: visual codes must share one dimension");
    out.upsilon.col(b) = upsilons[static_cast<std::size_t>(b)];
    for (long t = 0; t < steps; ++t) {
      out.input(b, t) = enc[static_cast<std::size_t>(t)];
      out.target(b, t) = enc[static_cast<std::size_t>(t) + 1];
      out.mask(b, t) = out.target(b, t) == Vocabulary::kPad ? 0.0 : 1.0;
    }
  }
  return out;
}

DropoutPlan make_dropout_plan(std::size_t state, std::size_t batch, std::size_t steps,
                              double rate, std::mt19937_64& eng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ArgumentError("make_dropout_plan: rate must be in [0, 1)");
  DropoutPlan plan;
  plan.rate = rate;
  if (rate == 0.0) return plan;  // no draws, keep everything

  const double keep_scale = 1.0 / (1.0 - rate);
  auto draw_mask = [&]() {
    MatrixXd m(static_cast<long>(state), static_cast<long>(batch));
    for (long r = 0; r < m.rows(); ++r)
      for (long c = 0; c < m.cols(); ++c) m(r, c) = unit_open(eng) >= rate ? keep_scale : 0.0;
    return m;
  };
  for (std::size_t t = 0; t < steps; ++t) {
    plan.layer1.push_back(draw_mask());
    plan.layer2.push_back(draw_mask());
  }
  return plan;
}

Forward forward(const GruModel& model, const TrainingBatch& batch, const DropoutPlan* plan) {
  if (static_cast<std::size_t>(batch.upsilon.rows()) != model.state_size)
    throw ConfigError("forward: visual code dimension " + std::to_string(batch.upsilon.rows()) +
                      " != model state size " + std::to_string(model.state_size));
  const std::size_t steps = static_cast<std::size_t>(batch.input.cols());
  const long bsz = batch.input.rows();
  const bool dropping = plan && plan->rate > 0.0;
  if (dropping && (plan->layer1.size() < steps || plan->layer2.size() < steps))
    throw DimensionError("forward: dropout plan shorter than the batch");

  Forward fwd;
  fwd.plan = plan;
  fwd.training = plan != nullptr;
  fwd.logits.reserve(steps);
  fwd.layer1.resize(steps);
  fwd.layer2.resize(steps);
  fwd.layer2_out.reserve(steps);

  MatrixXd h1 = batch.upsilon;
  MatrixXd h2 = batch.upsilon;
  MatrixXd x(static_cast<long>(model.embedding.dim), bsz);
  for (std::size_t t = 0; t < steps; ++t) {
    for (long b = 0; b < bsz; ++b) {
      const std::int32_t tok = batch.input(b, static_cast<long>(t));
      if (tok < 0 || static_cast<std::size_t>(tok) >= model.vocab.size())
        throw ArgumentError("forward: token index out of range");
      x.col(b) = model.embedding.word_vectors.row(tok).transpose();
    }
    h1 = cell_step(model.layer1, h1, x, &fwd.layer1[t]);
    MatrixXd layer2_in = dropping ? h1.cwiseProduct(plan->layer1[t]) : h1;
    h2 = cell_step(model.layer2, h2, layer2_in, &fwd.layer2[t]);
    MatrixXd out = dropping ? h2.cwiseProduct(plan->layer2[t]) : h2;
    fwd.logits.push_back((model.output_w * out).colwise() + model.output_b);
    fwd.layer2_out.push_back(std::move(out));
  }
  return fwd;
}

double loss(const std::vector<Eigen::MatrixXd>& logits, const TrainingBatch& batch) {
  if (logits.size() != static_cast<std::size_t>(batch.target.cols()))
    throw DimensionError("loss: logits/target step mismatch");
  const std::size_t n = count_unmasked(batch);
  if (n == 0) throw ArgumentError("loss: every position is masked");

  double total = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const VectorXd lse = col_logsumexp(logits[t]);
    for (long b = 0; b < batch.target.rows(); ++b) {
      if (batch.mask(b, static_cast<long>(t)) == 0.0) continue;
      const std::int32_t tok = batch.target(b, static_cast<long>(t));
      total += lse(b) - logits[t](tok, b);
    }
  }
  return total / static_cast<double>(n);
}

Gradients backward(const GruModel& model, const TrainingBatch& batch, const Forward& fwd) {
  if (!fwd.training)
    throw InternalError("backward: cache was produced by an inference forward");
  const std::size_t steps = static_cast<std::size_t>(batch.input.cols());
  if (fwd.logits.size() != steps || fwd.layer1.size() != steps || fwd.layer2.size() != steps)
    throw InternalError("backward: cache does not match the batch");
  const long bsz = batch.input.rows();
  if (steps > 0 && fwd.logits.front().cols() != bsz)
    throw InternalError("backward: cache batch size does not match");
  const bool dropping = fwd.plan && fwd.plan->rate > 0.0;
  const std::size_t n = count_unmasked(batch);
  if (n == 0) throw ArgumentError("backward: every position is masked");

  Gradients g = zero_gradients(model);
  const long state = static_cast<long>(model.state_size);
  MatrixXd carry1 = MatrixXd::Zero(state, bsz);
  MatrixXd carry2 = MatrixXd::Zero(state, bsz);

  for (std::size_t ti = steps; ti-- > 0;) {
    const long t = static_cast<long>(ti);
    // d loss / d logits = (softmax - onehot(target)) * mask / n
    MatrixXd d_logits = fwd.logits[ti];
    const VectorXd lse = col_logsumexp(d_logits);
    for (long b = 0; b < bsz; ++b) {
      const double w = batch.mask(b, t) / static_cast<double>(n);
      if (w == 0.0) {
        d_logits.col(b).setZero();
        continue;
      }
      d_logits.col(b) = (d_logits.col(b).array() - lse(b)).exp().matrix() * w;
      d_logits(batch.target(b, t), b) -= w;
    }

    g.output_w.noalias() += d_logits * fwd.layer2_out[ti].transpose();
    g.output_b += d_logits.rowwise().sum();

    MatrixXd d_out = model.output_w.transpose() * d_logits;
    MatrixXd d_h2 = carry2 + (dropping ? d_out.cwiseProduct(fwd.plan->layer2[ti]) : d_out);

    MatrixXd d_h2_prev, d_layer2_in;
    cell_backward(model.layer2, fwd.layer2[ti], d_h2, g.layer2, d_h2_prev, d_layer2_in);

    MatrixXd d_h1 =
        carry1 + (dropping ? d_layer2_in.cwiseProduct(fwd.plan->layer1[ti]) : d_layer2_in);
    MatrixXd d_h1_prev, d_x;
    cell_backward(model.layer1, fwd.layer1[ti], d_h1, g.layer1, d_h1_prev, d_x);

    for (long b = 0; b < bsz; ++b)
      g.word_vectors.row(batch.input(b, t)) += d_x.col(b).transpose();

    carry1 = std::move(d_h1_prev);
    carry2 = std::move(d_h2_prev);
  }
  return g;
}

void rmsprop_step(std::span<double> params, std::span<const double> grads,
                  std::span<double> state, double lr, double decay, double eps) {
  if (params.size() != grads.size() || params.size() != state.size())
    throw DimensionError("rmsprop_step: parameter/gradient/state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    state[i] = decay * state[i] + (1.0 - decay) * grads[i] * grads[i];
    params[i] -= lr * grads[i] / (std::sqrt(state[i]) + eps);
  }
}

double gradient_norm(const Gradients& grads) {
  double sum = 0.0;
  for (const auto& v : flat_views(const_cast<Gradients&>(grads)))
    for (std::size_t i = 0; i < v.size; ++i) sum += v.data[i] * v.data[i];
  return std::sqrt(sum);
}

void scale_gradients(Gradients& grads, double factor) {
  for (auto& v : flat_views(grads))
    for (std::size_t i = 0; i < v.size; ++i) v.data[i] *= factor;
}

std::vector<double> train(GruModel& model, const std::vector<Eigen::VectorXd>& codes,
                          const std::vector<TrainSample>& samples, const EpochSink& sink) {
  if (samples.empty()) throw ArgumentError("train: no samples");
  for (const auto& s : samples) {
    if (s.code_index >= codes.size())
      throw ArgumentError("train: sample code index out of range");
    if (s.encoded.size() != model.config.max_len)
      throw DimensionError("train: encoded caption length != max_len");
  }
  for (const auto& c : codes)
    if (static_cast<std::size_t>(c.size()) != model.state_size)
      throw ConfigError("train: visual code dimension != state size");

  const TrainConfig cfg = model.config;
  auto eng = seeded_engine(cfg.seed, 0x747261696eull);  // shuffle + dropout stream
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  Gradients opt = zero_gradients(model);  // RMSProp accumulators

  std::vector<double> epoch_losses;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates, back to front, one index_below draw per position.
    for (std::size_t i = order.size(); i-- > 1;)
      std::swap(order[i], order[index_below(eng, i + 1)]);

    double token_loss_sum = 0.0;
    std::size_t token_count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<Eigen::VectorXd> ups;
      std::vector<std::vector<std::int32_t>> caps;
      for (std::size_t i = start; i < end; ++i) {
        ups.push_back(codes[samples[order[i]].code_index]);
        caps.push_back(samples[order[i]].encoded);
      }
      TrainingBatch batch = make_batch(ups, caps);
      DropoutPlan plan =
          make_dropout_plan(model.state_size, end - start,
                            static_cast<std::size_t>(batch.input.cols()), cfg.dropout, eng);
      Forward fwd = forward(model, batch, &plan);
      const double batch_loss = loss(fwd.logits, batch);
      Gradients grads = backward(model, batch, fwd);

      const double norm = gradient_norm(grads);
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm)
        scale_gradients(grads, cfg.clip_norm / norm);

      auto params = model_views(model);
      auto gviews = flat_views(grads);
      auto sviews = flat_views(opt);
      for (std::size_t i = 0; i < params.size(); ++i)
        rmsprop_step({params[i].data, params[i].size}, {gviews[i].data, gviews[i].size},
                     {sviews[i].data, sviews[i].size}, cfg.lr, cfg.rms_decay, cfg.rms_eps);

      const std::size_t tokens = count_unmasked(batch);
      token_loss_sum += batch_loss * static_cast<double>(tokens);
      token_count += tokens;
    }
    epoch_losses.push_back(token_loss_sum / static_cast<double>(token_count));
    if (sink) sink(epoch, model, epoch_losses.back());
  }
  return epoch_losses;
}

namespace {

struct DecoderState {
  VectorXd h1, h2;
};

VectorXd decode_step(const GruModel& model, DecoderState& st, std::int32_t prev_token) {
  const VectorXd x = embed(model, prev_token);
  st.h1 = gru_cell(model.layer1, st.h1, x);
  st.h2 = gru_cell(model.layer2, st.h2, st.h1);
  return model.output_w * st.h2 + model.output_b;
}

std::int32_t argmax_lowest(const VectorXd& v) {
  long best = 0;
  for (long i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<std::int32_t>(best);
}

double logsumexp(const VectorXd& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

std::vector<std::int32_t> greedy_decode(const GruModel& model, const Eigen::VectorXd& upsilon,
                                        std::size_t max_len) {
  if (static_cast<std::size_t>(upsilon.size()) != model.state_size)
    throw ConfigError("greedy_decode: visual code dimension != state size");
  DecoderState st{upsilon, upsilon};
  std::vector<std::int32_t> tokens;
  std::int32_t prev = Vocabulary::kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    const std::int32_t tok = argmax_lowest(decode_step(model, st, prev));
    if (tok == Vocabulary::kEos) break;
    tokens.push_back(tok);
    prev = tok;
  }
  return tokens;
}

std::vector<std::int32_t> beam_decode(const GruModel& model, const Eigen::VectorXd& upsilon,
                                      std::size_t max_len, std::size_t beam) {
  if (beam < 1) throw ArgumentError("beam_decode: beam must be >= 1");
  if (static_cast<std::size_t>(upsilon.size()) != model.state_size)
    throw ConfigError("beam_decode: visual code dimension != state size");

  struct Hyp {
    std::vector<std::int32_t> tokens;
    double logprob = 0.0;
    DecoderState state;
  };
  std::vector<Hyp> live{{{}, 0.0, {upsilon, upsilon}}};
  std::vector<Hyp> finished;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    struct Candidate {
      double cum;
      std::size_t parent;
      std::int32_t token;
    };
    std::vector<Candidate> candidates;
    std::vector<DecoderState> advanced(live.size());
    for (std::size_t pi = 0; pi < live.size(); ++pi) {
      Hyp& hyp = live[pi];
      advanced[pi] = hyp.state;
      const std::int32_t prev = hyp.tokens.empty() ? Vocabulary::kBos : hyp.tokens.back();
      const VectorXd logits = decode_step(model, advanced[pi], prev);
      const double lse = logsumexp(logits);

      const std::size_t top_k = std::min<std::size_t>(beam, static_cast<std::size_t>(logits.size()));
      std::vector<std::int32_t> idx(static_cast<std::size_t>(logits.size()));
      std::iota(idx.begin(), idx.end(), 0);
      std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(top_k), idx.end(),
                        [&](std::int32_t a, std::int32_t b) {
                          if (logits(a) != logits(b)) return logits(a) > logits(b);
                          return a < b;
                        });
      for (std::size_t k = 0; k < top_k; ++k)
        candidates.push_back({hyp.logprob + logits(idx[k]) - lse, pi, idx[k]});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.cum != b.cum) return a.cum > b.cum;
                       if (a.parent != b.parent) return a.parent < b.parent;
                       return a.token < b.token;
                     });

    // Top `beam` candidates overall; EOS extensions freeze, others stay live.
    std::vector<Hyp> next;
    const std::size_t take = std::min<std::size_t>(beam, candidates.size());
    for (std::size_t i = 0; i < take; ++i) {
      const Candidate& cand = candidates[i];
      Hyp hyp;
      hyp.tokens = live[cand.parent].tokens;
      hyp.logprob = cand.cum;
      hyp.state = advanced[cand.parent];
      if (cand.token == Vocabulary::kEos) {
        finished.push_back(std::move(hyp));
      } else {
        hyp.tokens.push_back(cand.token);
        next.push_back(std::move(hyp));
      }
    }
    live = std::move(next);
  }
  for (auto& hyp : live) finished.push_back(std::move(hyp));

  // Length-normalized selection; ties keep the earliest finisher.
  const Hyp* best = nullptr;
  double best_score = 0.0;
  for (const auto& hyp : finished) {
    const double score = hyp.logprob / static_cast<double>(hyp.tokens.size() + 1);
    if (!best || score > best_score) {
      best = &hyp;
      best_score = score;
    }
  }
  return best ? best->tokens : std::vector<std::int32_t>{};
}

double sequence_logprob(const GruModel& model, const Eigen::VectorXd& upsilon,
                        const std::vector<std::int32_t>& tokens) {
  DecoderState st{upsilon, upsilon};
  double total = 0.0;
  std::int32_t prev = Vocabulary::kBos;
  for (std::size_t i = 0; i <= tokens.size(); ++i) {
    const VectorXd logits = decode_step(model, st, prev);
    const std::int32_t tok = i < tokens.size() ? tokens[i] : Vocabulary::kEos;
    total += logits(tok) - logsumexp(logits);
    prev = tok;
  }
  return total;
}

namespace {

constexpr char kModelMagic[4] = {'E', 'V', 'E', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_tensor(std::string& out, const std::string& name, const MatrixXd& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) {
      const std::uint64_t bits = std::bit_cast<std::uint64_t>(m(r, c));
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
}

struct Reader {
  const unsigned char* p;
  std::size_t size;
  std::size_t pos = 0;
  std::string path;

  std::uint32_t u32() {
    if (pos + 4 > size) throw FormatError(path + ": truncated at byte " + std::to_string(pos));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    if (pos + n > size) throw FormatError(path + ": truncated at byte " + std::to_string(pos));
    std::string s(reinterpret_cast<const char*>(p + pos), n);
    pos += n;
    return s;
  }
  MatrixXd tensor(const std::string& expected_name) {
    const std::string name = bytes(u32());
    if (name != expected_name)
      throw FormatError(path + ": expected tensor '" + expected_name + "', found '" + name + "'");
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    if (pos + 8ull * rows * cols > size) throw FormatError(path + ": truncated tensor payload");
    MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        m(static_cast<long>(r), static_cast<long>(c)) = std::bit_cast<double>(bits);
      }
    return m;
  }
};

}  // namespace

void save_checkpoint(const GruModel& model, const std::filesystem::path& path) {
  json header;
  header["state_size"] = model.state_size;
  header["embed_dim"] = model.embedding.dim;
  header["ngram_buckets"] = static_cast<std::size_t>(model.embedding.ngram_buckets.rows());
  header["vocab"] = model.vocab.tokens();
  header["config"] = {{"lr", model.config.lr},
                      {"batch", model.config.batch},
                      {"epochs", model.config.epochs},
                      {"dropout", model.config.dropout},
                      {"max_len", model.config.max_len},
                      {"seed", model.config.seed},
                      {"rms_decay", model.config.rms_decay},
                      {"rms_eps", model.config.rms_eps},
                      {"clip_norm", model.config.clip_norm},
                      {"beam", model.config.beam}};
  const std::string header_str = header.dump();

  std::string out;
  out.append(kModelMagic, 4);
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out.append(header_str);

  put_tensor(out, "embedding.word", model.embedding.word_vectors);
  put_tensor(out, "embedding.ngram", model.embedding.ngram_buckets);
  int layer_no = 1;
  for (const auto* layer : {&model.layer1, &model.layer2}) {
    const std::string prefix = "layer" + std::to_string(layer_no++) + ".";
    put_tensor(out, prefix + "w_update", layer->w_update);
    put_tensor(out, prefix + "w_reset", layer->w_reset);
    put_tensor(out, prefix + "w_cand", layer->w_cand);
    put_tensor(out, prefix + "b_update", MatrixXd(layer->b_update));
    put_tensor(out, prefix + "b_reset", MatrixXd(layer->b_reset));
    put_tensor(out, prefix + "b_cand", MatrixXd(layer->b_cand));
  }
  put_tensor(out, "output.w", model.output_w);
  put_tensor(out, "output.b", MatrixXd(model.output_b));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw ValidationError(path.string() + ": cannot open for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw ValidationError(path.string() + ": write failed");
}

GruModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0, path.string()};

  if (r.bytes(4) != std::string(kModelMagic, 4))
    throw FormatError(path.string() + ": bad magic, expected EVEM");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  json header;
  try {
    header = json::parse(r.bytes(r.u32()));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }

  GruModel model;
  try {
    model.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
    model.state_size = header.at("state_size").get<std::size_t>();
    model.embedding.dim = header.at("embed_dim").get<std::size_t>();
    const auto& cfg = header.at("config");
    model.config.lr = cfg.at("lr").get<double>();
    model.config.batch = cfg.at("batch").get<std::size_t>();
    model.config.epochs = cfg.at("epochs").get<std::size_t>();
    model.config.dropout = cfg.at("dropout").get<double>();
    model.config.max_len = cfg.at("max_len").get<std::size_t>();
    model.config.seed = cfg.at("seed").get<std::uint64_t>();
    model.config.rms_decay = cfg.at("rms_decay").get<double>();
    model.config.rms_eps = cfg.at("rms_eps").get<double>();
    model.config.clip_norm = cfg.at("clip_norm").get<double>();
    model.config.beam = cfg.at("beam").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": incomplete header: " + e.what());
  }

  model.embedding.word_vectors = r.tensor("embedding.word");
  model.embedding.ngram_buckets = r.tensor("embedding.ngram");
  int layer_no = 1;
  for (auto* layer : {&model.layer1, &model.layer2}) {
    const std::string prefix = "layer" + std::to_string(layer_no++) + ".";
    layer->w_update = r.tensor(prefix + "w_update");
    layer->w_reset = r.tensor(prefix + "w_reset");
    layer->w_cand = r.tensor(prefix + "w_cand");
    layer->b_update = r.tensor(prefix + "b_update");
    layer->b_reset = r.tensor(prefix + "b_reset");
    layer->b_cand = r.tensor(prefix + "b_cand");
  }
  model.output_w = r.tensor("output.w");
  model.output_b = r.tensor("output.b");
  if (r.pos != r.size) throw FormatError(path.string() + ": trailing bytes after tensors");

  if (static_cast<std::size_t>(model.embedding.word_vectors.rows()) != model.vocab.size() ||
      static_cast<std::size_t>(model.output_w.rows()) != model.vocab.size())
    throw FormatError(path.string() + ": tensor shapes do not match the vocabulary");
  return model;
}

}  // namespace eve
