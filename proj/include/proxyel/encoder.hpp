#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "proxyel/numerics.hpp"

namespace proxyel {

inline constexpr std::size_t kDefaultMaxSeqLen = 128;

/// Token ids plus a per-position mask (true = real token, false = padding).
struct TokenSequence {
  std::vector<std::int32_t> token_ids;
  std::vector<bool> pad_mask;

  TokenSequence() = default;
  /// Unpadded sequence: every position is a real token.
  explicit TokenSequence(std::vector<std::int32_t> ids)
      : token_ids(std::move(ids)), pad_mask(token_ids.size(), true) {}
  TokenSequence(std::vector<std::int32_t> ids, std::vector<bool> mask)
      : token_ids(std::move(ids)), pad_mask(std::move(mask)) {}

  std::size_t size() const noexcept { return token_ids.size(); }
  std::size_t active_count() const noexcept;

  bool operator==(const TokenSequence&) const = default;
};

struct EncoderDims {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::size_t max_seq_len = kDefaultMaxSeqLen;
  std::size_t out_dim = 0;

  bool operator==(const EncoderDims&) const = default;
};

/// One encoder tower: composite token embedding (word + position), mean
/// pooling over real tokens, then an affine projection.
///
/// projection is dim x out_dim; the output is pooled^T * projection + bias.
/// The same struct doubles as the gradient accumulator for a tower.
struct EncoderParams {
  Matrix word_embeddings;      // vocab_size x dim
  Matrix position_embeddings;  // max_seq_len x dim
  Matrix projection;           // dim x out_dim
  Vector projection_bias;      // out_dim

  static EncoderParams zeros(const EncoderDims& dims);

  EncoderDims dims() const noexcept;
  std::array<std::span<double>, 4> tensors();
  std::array<std::span<const double>, 4> tensors() const;
  void validate() const;

  bool operator==(const EncoderParams&) const = default;
};

/// Uniform(-scale, scale) for every embedding and projection entry; zero bias.
EncoderParams init_encoder(const EncoderDims& dims, std::mt19937_64& rng, double scale = 0.05);

struct BiEncoder {
  EncoderParams mention_tower;
  EncoderParams entity_tower;
  SimilarityKind similarity = SimilarityKind::dot;

  static BiEncoder initialize(const EncoderDims& dims, SimilarityKind kind, std::uint64_t seed);
  void validate() const;

  bool operator==(const BiEncoder&) const = default;
};

struct BiEncoderGrads {
  EncoderParams mention_tower;
  EncoderParams entity_tower;

  static BiEncoderGrads zeros_like(const BiEncoder& model);
};

/// Row t = word_embeddings[token_ids[t]] + position_embeddings[t]. Padded
/// rows are filled too; encode() ignores them.
Matrix compose_input_embeddings(const TokenSequence& seq, const EncoderParams& params);

/// projection applied to the mean of the unmasked rows of `inputs`, plus bias.
Vector encode(const Matrix& inputs, const std::vector<bool>& pad_mask, const EncoderParams& params);

/// Everything the backward pass needs, returned by value from the forward pass.
struct TowerForward {
  TokenSequence sequence;
  Matrix inputs;
  Vector pooled;
  Vector output;
  std::size_t active = 0;
};

TowerForward forward_tower(const TokenSequence& seq, const EncoderParams& params);
/// Forward from explicit input embeddings (e.g. adversarially perturbed ones).
TowerForward forward_tower_from_inputs(const TokenSequence& seq, Matrix inputs,
                                       const EncoderParams& params);

double score(std::span<const double> mention, std::span<const double> entity, SimilarityKind kind);

/// Adds d(loss)/d(params) to `grads` given d(loss)/d(output). Embedding rows
/// are reached through the token ids and positions of the cached sequence.
void backprop_tower(const EncoderParams& params, const TowerForward& fwd,
                    std::span<const double> grad_output, EncoderParams& grads);

/// d(loss)/d(inputs) given d(loss)/d(output); padded rows are zero.
Matrix backprop_to_inputs(const EncoderParams& params, const TowerForward& fwd,
                          std::span<const double> grad_output);

/// One mention scored against a list of entities.
struct ScoringContext {
  TowerForward mention;
  std::vector<TowerForward> entities;
};

ScoringContext forward_scoring(const BiEncoder& model, const TokenSequence& mention,
                               std::span<const TokenSequence> entities);
Vector context_scores(const BiEncoder& model, const ScoringContext& ctx);

/// Accumulates parameter gradients of sum_j score_grads[j] * s(m, e_j) into
/// `grads`. Mention- and entity-tower contributions go to separate tensors.
void accumulate_grad_params(const BiEncoder& model, const ScoringContext& ctx,
                            std::span<const double> score_grads, BiEncoderGrads& grads);
BiEncoderGrads grad_params(const BiEncoder& model, const ScoringContext& ctx,
                           std::span<const double> score_grads);

/// Gradient of s(m, e) with respect to each input-embedding row of the entity.
Matrix grad_input_embeddings(std::span<const double> mention_repr, const TowerForward& entity,
                             const EncoderParams& entity_tower, SimilarityKind kind);

}  // namespace proxyel
