#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "proxyel/checkpoint.hpp"
#include "proxyel/errors.hpp"
#include "proxyel/trainer.hpp"
#include "support/errors.hpp"
#include "support/fixture.hpp"

using namespace proxyel;
using proxyel::testing::thrown_category;

namespace {

struct SmallCorpus {
  DatasetSplit data;
  Vocabulary vocab;
};

const SmallCorpus& small_corpus() {
  static const SmallCorpus corpus = [] {
    SyntheticConfig c;
    c.n_entities = 60;
    c.n_train_mentions = 240;
    c.n_validation_mentions = 40;
    c.n_test_mentions = 40;
    c.n_types = 4;
    c.name_tokens_per_type = 12;
    c.context_tokens_per_type = 10;
    c.shared_tokens = 10;
    c.seed = 5;
    SmallCorpus s;
    s.data = generate_synthetic(c);
    const auto texts = s.data.all_texts();
    s.vocab = Vocabulary::build(texts);
    return s;
  }();
  return corpus;
}

TrainConfig small_training(LossKind loss, SamplingKind sampling) {
  TrainConfig t;
  t.learning_rate = 2e-2;
  t.loss = loss;
  t.sampling.kind = sampling;
  t.sampling.n_negatives = 8;
  t.batch_size = 16;
  t.epochs = 2;
  t.model.dim = 8;
  t.model.out_dim = 8;
  t.model.max_seq_len = 24;
  return t;
}

}  // namespace

TEST_CASE("lr_at: warmup then linear decay") {
  TrainConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.warmup_proportion = 0.25;
  CHECK(lr_at(0, 100, cfg) == 0.0);
  CHECK(lr_at(10, 100, cfg) == doctest::Approx(0.4));
  CHECK(lr_at(25, 100, cfg) == 1.0);
  CHECK(lr_at(50, 100, cfg) == doctest::Approx(50.0 / 75.0));
  CHECK(lr_at(100, 100, cfg) == 0.0);
  cfg.warmup_proportion = 0.0;
  CHECK(lr_at(0, 10, cfg) == 1.0);
  CHECK(thrown_category([&] { lr_at(11, 10, cfg); }) == ErrorCategory::out_of_range);

  cfg.warmup_proportion = 0.3;
  for (std::size_t total = 1; total < 60; ++total) {
    double peak = 0.0;
    for (std::size_t s = 0; s <= total; ++s) {
      const double lr = lr_at(s, total, cfg);
      CHECK(lr >= 0.0);
      CHECK(lr <= 1.0);
      peak = std::max(peak, lr);
    }
    CHECK(peak == 1.0);
  }
}

TEST_CASE("clip_gradients") {
  std::mt19937_64 rng(1);
  const BiEncoder model = testing::random_model(rng, {5, 3, 4, 2}, SimilarityKind::dot, 0.1);
  for (int trial = 0; trial < 100; ++trial) {
    BiEncoderGrads g = BiEncoderGrads::zeros_like(model);
    const double scale = std::pow(10.0, static_cast<double>(rng() % 7) - 3.0);
    for (auto* tower : {&g.mention_tower, &g.entity_tower}) {
      for (auto t : tower->tensors()) testing::fill_uniform(t, rng, -scale, scale);
    }
    const BiEncoderGrads before = g;
    const double raw = clip_gradients(g, 1.0);
    CHECK(raw == doctest::Approx(global_grad_norm(before)));
    if (raw <= 1.0) {
      CHECK(g.mention_tower == before.mention_tower);
    } else {
      CHECK(global_grad_norm(g) == doctest::Approx(1.0).epsilon(1e-12));
      const double ratio = g.entity_tower.projection(0, 0) / before.entity_tower.projection(0, 0);
      CHECK(ratio == doctest::Approx(1.0 / raw).epsilon(1e-12));
    }
  }
  BiEncoderGrads bad = BiEncoderGrads::zeros_like(model);
  bad.mention_tower.projection_bias[0] = NAN;
  CHECK(thrown_category([&] { clip_gradients(bad, 1.0); }) == ErrorCategory::non_finite);
}

TEST_CASE("adamw_step: reference trajectory") {
  std::mt19937_64 rng(2);
  BiEncoder model = testing::random_model(rng, {4, 2, 3, 2}, SimilarityKind::dot, 0.5);
  TrainConfig cfg;
  cfg.weight_decay = 0.01;
  const double lr = 0.1;
  OptimizerState state = OptimizerState::zeros_like(model);
  double p = model.mention_tower.projection(1, 0), m = 0, v = 0;
  const double grads[3] = {0.3, -0.7, 0.05};
  for (int step = 1; step <= 3; ++step) {
    BiEncoderGrads g = BiEncoderGrads::zeros_like(model);
    g.mention_tower.projection(1, 0) = grads[step - 1];
    adamw_step(model, g, state, lr, cfg);
    p *= 1.0 - lr * cfg.weight_decay;
    m = 0.9 * m + 0.1 * grads[step - 1];
    v = 0.999 * v + 0.001 * grads[step - 1] * grads[step - 1];
    p -= lr * (m / (1 - std::pow(0.9, step))) / (std::sqrt(v / (1 - std::pow(0.999, step))) + cfg.adam_eps);
    CHECK(model.mention_tower.projection(1, 0) == doctest::Approx(p).epsilon(1e-14));
  }
  CHECK(state.step == 3);
}

TEST_CASE("adamw_step: zero gradient without decay leaves parameters fixed") {
  std::mt19937_64 rng(3);
  BiEncoder model = testing::random_model(rng, {4, 2, 3, 2}, SimilarityKind::cosine, 0.5);
  const BiEncoder before = model;
  TrainConfig cfg;
  OptimizerState state = OptimizerState::zeros_like(model);
  adamw_step(model, BiEncoderGrads::zeros_like(model), state, 0.5, cfg);
  CHECK(model == before);

  cfg.weight_decay = 0.1;
  adamw_step(model, BiEncoderGrads::zeros_like(model), state, 0.5, cfg);
  CHECK(model.entity_tower.word_embeddings(2, 1) ==
        doctest::Approx(before.entity_tower.word_embeddings(2, 1) * 0.95).epsilon(1e-15));
}

TEST_CASE("ema_smooth and sample_variance") {
  CHECK(ema_smooth(std::vector<double>{}, 0.98).empty());
  const auto s = ema_smooth(std::vector<double>{1.0, 3.0, 3.0}, 0.5);
  CHECK(s == std::vector<double>{1.0, 2.0, 2.5});
  const auto flat = ema_smooth(std::vector<double>(50, 4.25), 0.98);
  for (double x : flat) CHECK(x == doctest::Approx(4.25).epsilon(1e-15));
  CHECK(sample_variance(std::vector<double>{7.0}) == 0.0);
  CHECK(sample_variance(std::vector<double>{1.0, 2.0, 3.0, 4.0}) == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("train: zero epochs returns the initialisation") {
  const auto& c = small_corpus();
  auto cfg = small_training(LossKind::ce, SamplingKind::random);
  cfg.epochs = 0;
  const auto result = train(c.data, c.vocab, cfg);
  const EncoderDims dims{c.vocab.size(), 8, 24, 8};
  CHECK(result.model == BiEncoder::initialize(dims, SimilarityKind::dot, cfg.seed));
  CHECK(result.trace.size() == 0);
  CHECK(result.epochs.empty());
}

TEST_CASE("train: deterministic for a fixed configuration") {
  const auto& c = small_corpus();
  for (auto loss : {LossKind::ce, LossKind::pb}) {
    auto cfg = small_training(loss, SamplingKind::mixed);
    cfg.fgsm_enabled = true;
    const auto a = train(c.data, c.vocab, cfg);
    const auto b = train(c.data, c.vocab, cfg);
    CHECK(a.model == b.model);
    CHECK(a.trace == b.trace);
    CHECK(a.epochs == b.epochs);
    cfg.seed = 1;
    CHECK_FALSE(train(c.data, c.vocab, cfg).model == a.model);
  }
}

TEST_CASE("train: FGSM disabled equals a zero-strength adversary") {
  const auto& c = small_corpus();
  auto off = small_training(LossKind::pb, SamplingKind::random);
  const auto base = train(c.data, c.vocab, off);

  auto no_weight = off;
  no_weight.fgsm_enabled = true;
  no_weight.fgsm.lambda = 0.0;
  CHECK(train(c.data, c.vocab, no_weight).model == base.model);

  // Zero step: the adversarial set repeats the clean one, so the total
  // gradient is (1 + lambda) times the clean gradient; clipping and Adam's
  // scale invariance make the update nearly identical.
  auto no_step = off;
  no_step.fgsm_enabled = true;
  no_step.fgsm.epsilon = 0.0;
  no_step.fgsm.lambda = 1.0;
  const auto doubled = train(c.data, c.vocab, no_step);
  for (std::size_t i = 0; i < base.trace.size(); ++i) {
    CHECK(doubled.trace.losses[i] == doctest::Approx(2.0 * base.trace.losses[i]).epsilon(1e-3));
  }
}

TEST_CASE("train: trace is finite and clipped") {
  const auto& c = small_corpus();
  for (auto loss : {LossKind::ce, LossKind::pb}) {
    const auto cfg = small_training(loss, SamplingKind::mixed);
    const auto result = train(c.data, c.vocab, cfg);
    const std::size_t per_epoch = (240 + 15) / 16;
    CHECK(result.trace.size() == per_epoch * 2);
    CHECK(result.epochs.size() == 2);
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
      CHECK(result.trace.steps[i] == i);
      CHECK(std::isfinite(result.trace.raw_norms[i]));
      CHECK(result.trace.clipped_norms[i] <= cfg.clip_max_norm * (1 + 1e-12));
      CHECK(std::isfinite(result.trace.losses[i]));
    }
    CHECK(result.trace.smoothed_norms == ema_smooth(result.trace.raw_norms, cfg.trace_smoothing));
  }
}

TEST_CASE("train: loss on training mentions decreases") {
  const auto& c = small_corpus();
  for (auto loss : {LossKind::ce, LossKind::pb}) {
    auto cfg = small_training(loss, SamplingKind::random);
    cfg.epochs = 7;
    std::vector<double> per_epoch;
    const auto init = BiEncoder::initialize({c.vocab.size(), 8, 24, 8}, cfg.similarity(), cfg.seed);
    const double before = evaluate_loss(init, c.data.train, c.data.entities, c.vocab, cfg, 99);
    const auto result = train(c.data, c.vocab, cfg, [&](std::size_t, const BiEncoder& m) {
      per_epoch.push_back(evaluate_loss(m, c.data.train, c.data.entities, c.vocab, cfg, 99));
    });
    CHECK(per_epoch.size() == 7);
    CHECK(per_epoch.back() < before);
    CHECK(evaluate_loss(result.model, c.data.train, c.data.entities, c.vocab, cfg, 99) == per_epoch.back());
  }
}

TEST_CASE("train: invalid configuration") {
  const auto& c = small_corpus();
  auto cfg = small_training(LossKind::ce, SamplingKind::random);
  cfg.batch_size = 0;
  CHECK(thrown_category([&] { train(c.data, c.vocab, cfg); }) == ErrorCategory::config);
  cfg = small_training(LossKind::ce, SamplingKind::random);
  cfg.sampling.n_negatives = 10000;
  CHECK(thrown_category([&] { train(c.data, c.vocab, cfg); }).has_value());
}

TEST_CASE("similarity resolution") {
  TrainConfig cfg;
  cfg.loss = LossKind::ce;
  CHECK(cfg.similarity() == SimilarityKind::dot);
  cfg.loss = LossKind::pb;
  CHECK(cfg.similarity() == SimilarityKind::cosine);
  cfg.model.similarity = SimilarityKind::dot;
  CHECK(cfg.similarity() == SimilarityKind::dot);
}

TEST_CASE("trace file round trip") {
  GradNormTrace t;
  t.smoothing = 0.98;
  t.record(0, 0.0, 1.5, 1.0, 3.25);
  t.record(1, 1e-5, 0.125, 0.125, 2.0);
  t.record(2, 2e-5, 1.0 / 3.0, 1.0 / 3.0, 0.1);
  const auto path = std::filesystem::temp_directory_path() / "proxyel_test_trace.tsv";
  write_trace(path, t);
  const auto back = read_trace(path);
  CHECK(back.steps == t.steps);
  CHECK(back.raw_norms == t.raw_norms);
  CHECK(back.smoothed_norms == t.smoothed_norms);
  CHECK(back.learning_rates == t.learning_rates);
  CHECK(back.losses == t.losses);
  {
    std::ofstream out(path);
    out << "step\tlr\n";
  }
  CHECK(thrown_category([&] { read_trace(path); }) == ErrorCategory::parse);
  std::filesystem::remove(path);
}
