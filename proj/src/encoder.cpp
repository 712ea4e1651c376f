#include "proxyel/encoder.hpp"

#include <algorithm>
#include <string>

#include "proxyel/errors.hpp"

namespace proxyel {

std::size_t TokenSequence::active_count() const noexcept {
  return static_cast<std::size_t>(std::count(pad_mask.begin(), pad_mask.end(), true));
}

EncoderParams EncoderParams::zeros(const EncoderDims& dims) {
  EncoderParams p;
  p.word_embeddings = Matrix(dims.vocab_size, dims.dim);
  p.position_embeddings = Matrix(dims.max_seq_len, dims.dim);
  p.projection = Matrix(dims.dim, dims.out_dim);
  p.projection_bias.assign(dims.out_dim, 0.0);
  return p;
}

EncoderDims EncoderParams::dims() const noexcept {
  return {word_embeddings.rows, word_embeddings.cols, position_embeddings.rows, projection.cols};
}

std::array<std::span<double>, 4> EncoderParams::tensors() {
  return {std::span<double>(word_embeddings.data), std::span<double>(position_embeddings.data),
          std::span<double>(projection.data), std::span<double>(projection_bias)};
}

std::array<std::span<const double>, 4> EncoderParams::tensors() const {
  return {std::span<const double>(word_embeddings.data),
          std::span<const double>(position_embeddings.data),
          std::span<const double>(projection.data), std::span<const double>(projection_bias)};
}

void EncoderParams::validate() const {
  const EncoderDims d = dims();
  require(d.dim >= 1 && d.out_dim >= 1 && d.vocab_size >= 1 && d.max_seq_len >= 1,
          ErrorCategory::invalid_argument, "encoder: all dimensions must be >= 1");
  require(position_embeddings.cols == d.dim && projection.rows == d.dim &&
              projection_bias.size() == d.out_dim,
          ErrorCategory::dimension_mismatch, "encoder: inconsistent tensor shapes");
  for (auto t : tensors()) {
    require(all_finite(t), ErrorCategory::non_finite, "encoder: non-finite parameter");
  }
}

EncoderParams init_encoder(const EncoderDims& dims, std::mt19937_64& rng, double scale) {
  EncoderParams p = EncoderParams::zeros(dims);
  std::uniform_real_distribution<double> uniform(-scale, scale);
  for (double& x : p.word_embeddings.data) x = uniform(rng);
  for (double& x : p.position_embeddings.data) x = uniform(rng);
  for (double& x : p.projection.data) x = uniform(rng);
  return p;
}

BiEncoder BiEncoder::initialize(const EncoderDims& dims, SimilarityKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BiEncoder model;
  model.mention_tower = init_encoder(dims, rng);
  model.entity_tower = init_encoder(dims, rng);
  model.similarity = kind;
  return model;
}

void BiEncoder::validate() const {
  mention_tower.validate();
  entity_tower.validate();
  require(mention_tower.dims().out_dim == entity_tower.dims().out_dim,
          ErrorCategory::dimension_mismatch, "bi-encoder: towers disagree on output dimension");
}

BiEncoderGrads BiEncoderGrads::zeros_like(const BiEncoder& model) {
  return {EncoderParams::zeros(model.mention_tower.dims()),
          EncoderParams::zeros(model.entity_tower.dims())};
}

Matrix compose_input_embeddings(const TokenSequence& seq, const EncoderParams& params) {
  const EncoderDims d = params.dims();
  require(seq.pad_mask.size() == seq.size(), ErrorCategory::dimension_mismatch,
          "token sequence: mask length differs from token count");
  require(seq.size() >= 1 && seq.size() <= d.max_seq_len, ErrorCategory::out_of_range,
          "token sequence: length " + std::to_string(seq.size()) + " outside [1, " +
              std::to_string(d.max_seq_len) + "]");
  Matrix z(seq.size(), d.dim);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto id = seq.token_ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= d.vocab_size) {
      fail(ErrorCategory::out_of_range, "token id " + std::to_string(id) + " at position " +
                                            std::to_string(t) + " outside vocabulary of size " +
                                            std::to_string(d.vocab_size));
    }
    auto word = params.word_embeddings.row(static_cast<std::size_t>(id));
    auto pos = params.position_embeddings.row(t);
    auto out = z.row(t);
    for (std::size_t k = 0; k < d.dim; ++k) out[k] = word[k] + pos[k];
  }
  return z;
}

namespace {

Vector mean_pool(const Matrix& inputs, const std::vector<bool>& pad_mask, std::size_t& active) {
  require(pad_mask.size() == inputs.rows, ErrorCategory::dimension_mismatch,
          "encode: mask length differs from input rows");
  Vector pooled(inputs.cols, 0.0);
  active = 0;
  for (std::size_t t = 0; t < inputs.rows; ++t) {
    if (!pad_mask[t]) continue;
    ++active;
    auto r = inputs.row(t);
    for (std::size_t k = 0; k < inputs.cols; ++k) pooled[k] += r[k];
  }
  require(active > 0, ErrorCategory::invalid_argument, "encode: every position is masked");
  const double inv = 1.0 / static_cast<double>(active);
  for (double& x : pooled) x *= inv;
  return pooled;
}

Vector project(const Vector& pooled, const EncoderParams& params) {
  require(pooled.size() == params.projection.rows, ErrorCategory::dimension_mismatch,
          "encode: input width differs from projection rows");
  Vector out = params.projection_bias;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double p = pooled[i];
    auto w = params.projection.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += p * w[j];
  }
  return out;
}

/// d(loss)/d(pooled) = projection * grad_output.
Vector pooled_grad(const EncoderParams& params, std::span<const double> grad_output) {
  Vector g(params.projection.rows, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto w = params.projection.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < grad_output.size(); ++j) acc += w[j] * grad_output[j];
    g[i] = acc;
  }
  return g;
}

void check_forward(const TowerForward& fwd, const EncoderParams& params,
                   std::span<const double> grad_output) {
  require(fwd.active > 0 && !fwd.output.empty() && fwd.pooled.size() == params.projection.rows,
          ErrorCategory::invalid_argument, "backward: missing or stale forward cache");
  require(grad_output.size() == params.projection.cols, ErrorCategory::dimension_mismatch,
          "backward: upstream gradient width differs from output dimension");
}

}  // namespace

Vector encode(const Matrix& inputs, const std::vector<bool>& pad_mask, const EncoderParams& params) {
  std::size_t active = 0;
  return project(mean_pool(inputs, pad_mask, active), params);
}

TowerForward forward_tower_from_inputs(const TokenSequence& seq, Matrix inputs,
                                       const EncoderParams& params) {
  TowerForward fwd;
  fwd.sequence = seq;
  fwd.pooled = mean_pool(inputs, seq.pad_mask, fwd.active);
  fwd.output = project(fwd.pooled, params);
  fwd.inputs = std::move(inputs);
  return fwd;
}

TowerForward forward_tower(const TokenSequence& seq, const EncoderParams& params) {
  return forward_tower_from_inputs(seq, compose_input_embeddings(seq, params), params);
}

double score(std::span<const double> mention, std::span<const double> entity, SimilarityKind kind) {
  return similarity(mention, entity, kind);
}

void backprop_tower(const EncoderParams& params, const TowerForward& fwd,
                    std::span<const double> grad_output, EncoderParams& grads) {
  check_forward(fwd, params, grad_output);
  for (std::size_t j = 0; j < grad_output.size(); ++j) grads.projection_bias[j] += grad_output[j];
  for (std::size_t i = 0; i < fwd.pooled.size(); ++i) {
    const double p = fwd.pooled[i];
    auto g = grads.projection.row(i);
    for (std::size_t j = 0; j < grad_output.size(); ++j) g[j] += p * grad_output[j];
  }
  Vector row_grad = pooled_grad(params, grad_output);
  const double inv = 1.0 / static_cast<double>(fwd.active);
  for (double& x : row_grad) x *= inv;
  const auto& seq = fwd.sequence;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (!seq.pad_mask[t]) continue;
    auto word = grads.word_embeddings.row(static_cast<std::size_t>(seq.token_ids[t]));
    auto pos = grads.position_embeddings.row(t);
    for (std::size_t k = 0; k < row_grad.size(); ++k) {
      word[k] += row_grad[k];
      pos[k] += row_grad[k];
    }
  }
}

Matrix backprop_to_inputs(const EncoderParams& params, const TowerForward& fwd,
                          std::span<const double> grad_output) {
  check_forward(fwd, params, grad_output);
  Vector row_grad = pooled_grad(params, grad_output);
  const double inv = 1.0 / static_cast<double>(fwd.active);
  for (double& x : row_grad) x *= inv;
  Matrix g(fwd.sequence.size(), row_grad.size());
  for (std::size_t t = 0; t < g.rows; ++t) {
    if (!fwd.sequence.pad_mask[t]) continue;
    std::copy(row_grad.begin(), row_grad.end(), g.row(t).begin());
  }
  return g;
}

ScoringContext forward_scoring(const BiEncoder& model, const TokenSequence& mention,
                               std::span<const TokenSequence> entities) {
  ScoringContext ctx;
  ctx.mention = forward_tower(mention, model.mention_tower);
  ctx.entities.reserve(entities.size());
  for (const auto& e : entities) ctx.entities.push_back(forward_tower(e, model.entity_tower));
  return ctx;
}

Vector context_scores(const BiEncoder& model, const ScoringContext& ctx) {
  Vector s;
  s.reserve(ctx.entities.size());
  for (const auto& e : ctx.entities) s.push_back(score(ctx.mention.output, e.output, model.similarity));
  return s;
}

void accumulate_grad_params(const BiEncoder& model, const ScoringContext& ctx,
                            std::span<const double> score_grads, BiEncoderGrads& grads) {
  require(!ctx.mention.output.empty(), ErrorCategory::invalid_argument,
          "grad_params: missing mention forward cache");
  require(score_grads.size() == ctx.entities.size(), ErrorCategory::dimension_mismatch,
          "grad_params: " + std::to_string(score_grads.size()) + " score gradients for " +
              std::to_string(ctx.entities.size()) + " entities");
  Vector mention_grad(ctx.mention.output.size(), 0.0);
  for (std::size_t j = 0; j < ctx.entities.size(); ++j) {
    const auto& e = ctx.entities[j];
    if (score_grads[j] == 0.0) continue;
    const SimilarityGrad sg = similarity_with_grad(ctx.mention.output, e.output, model.similarity);
    Vector entity_grad(sg.d_right.size());
    for (std::size_t k = 0; k < entity_grad.size(); ++k) {
      entity_grad[k] = score_grads[j] * sg.d_right[k];
      mention_grad[k] += score_grads[j] * sg.d_left[k];
    }
    backprop_tower(model.entity_tower, e, entity_grad, grads.entity_tower);
  }
  backprop_tower(model.mention_tower, ctx.mention, mention_grad, grads.mention_tower);
}

BiEncoderGrads grad_params(const BiEncoder& model, const ScoringContext& ctx,
                           std::span<const double> score_grads) {
  BiEncoderGrads grads = BiEncoderGrads::zeros_like(model);
  accumulate_grad_params(model, ctx, score_grads, grads);
  return grads;
}

Matrix grad_input_embeddings(std::span<const double> mention_repr, const TowerForward& entity,
                             const EncoderParams& entity_tower, SimilarityKind kind) {
  const SimilarityGrad sg = similarity_with_grad(mention_repr, entity.output, kind);
  return backprop_to_inputs(entity_tower, entity, sg.d_right);
}

}  // namespace proxyel
