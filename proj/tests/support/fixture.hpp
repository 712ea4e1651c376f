#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "proxyel/datakit.hpp"
#include "proxyel/encoder.hpp"
#include "proxyel/objectives.hpp"
#include "proxyel/trainer.hpp"

namespace proxyel::testing {

/// The directional-experiment corpus: 1,000 entities, 5,000 train and
/// 1,000 test mentions, half of the test gold entities unseen in training.
inline SyntheticConfig fixture_corpus() {
  SyntheticConfig c;
  c.n_entities = 1000;
  c.n_train_mentions = 5000;
  c.n_validation_mentions = 1000;
  c.n_test_mentions = 1000;
  c.seed = 13;
  return c;
}

/// Reference hyperparameters except the learning rate, which is raised for the
/// randomly initialised toy encoder. Identical for both losses.
inline TrainConfig fixture_training(LossKind loss, SamplingKind sampling) {
  TrainConfig t;
  t.learning_rate = 2e-2;
  t.loss = loss;
  t.sampling.kind = sampling;
  t.sampling.n_negatives = 64;
  t.sampling.hard_fraction = 0.5;
  t.seed = 0;
  return t;
}

inline TokenSequence random_sequence(std::mt19937_64& rng, std::size_t vocab, std::size_t max_len,
                                     bool allow_padding) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  const std::size_t n = len(rng);
  std::size_t active = n;
  if (allow_padding && n > 1) active = std::uniform_int_distribution<std::size_t>(1, n)(rng);
  std::uniform_int_distribution<std::int32_t> tok(0, static_cast<std::int32_t>(vocab) - 1);
  std::vector<std::int32_t> ids(n);
  std::vector<bool> mask(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = i < active ? tok(rng) : 0;
    mask[i] = i < active;
  }
  return TokenSequence(std::move(ids), std::move(mask));
}

inline void fill_uniform(std::span<double> values, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : values) v = u(rng);
}

/// A bi-encoder with every tensor (bias included) drawn from U(-scale, scale).
inline BiEncoder random_model(std::mt19937_64& rng, const EncoderDims& dims, SimilarityKind kind, double scale) {
  BiEncoder m = BiEncoder::initialize(dims, kind, rng());
  for (auto* tower : {&m.mention_tower, &m.entity_tower}) {
    for (auto t : tower->tensors()) fill_uniform(t, rng, -scale, scale);
  }
  return m;
}

}  // namespace proxyel::testing
