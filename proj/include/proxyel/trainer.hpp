#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "proxyel/datakit.hpp"
#include "proxyel/encoder.hpp"
#include "proxyel/objectives.hpp"
#include "proxyel/sampling.hpp"

namespace proxyel {

struct ModelConfig {
  std::size_t dim = 32;
  std::size_t out_dim = 32;
  std::size_t max_seq_len = kDefaultMaxSeqLen;
  EntityStyle entity_style = EntityStyle::zeshel;
  /// Unset: dot for CE, cosine for Pb.
  std::optional<SimilarityKind> similarity;

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-5;
  double warmup_proportion = 0.25;
  double adam_eps = 1e-6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double weight_decay = 0.0;
  double clip_max_norm = 1.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 7;
  LossKind loss = LossKind::pb;
  PbHyper pb;
  bool fgsm_enabled = false;
  FgsmHyper fgsm;
  SamplingPolicy sampling;
  std::uint64_t seed = 0;
  double trace_smoothing = 0.98;
  ModelConfig model;

  void validate() const;
  SimilarityKind similarity() const;
};

/// Linear warmup from 0 to the peak over floor(warmup_proportion * total)
/// steps, then linear decay to 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

double global_grad_norm(const BiEncoderGrads& grads);

/// Rescales every tensor by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns the norm before clipping. Throws on non-finite entries.
double clip_gradients(BiEncoderGrads& grads, double max_norm);

struct OptimizerState {
  BiEncoderGrads first_moment;
  BiEncoderGrads second_moment;
  std::int64_t step = 0;

  static OptimizerState zeros_like(const BiEncoder& model);
};

/// AdamW with bias correction and decoupled weight decay, in place.
void adamw_step(BiEncoder& model, const BiEncoderGrads& grads, OptimizerState& state, double lr,
                const TrainConfig& cfg);

struct GradNormTrace {
  double smoothing = 0.98;
  std::vector<std::size_t> steps;
  std::vector<double> learning_rates;
  std::vector<double> raw_norms;      // before clipping
  std::vector<double> clipped_norms;  // after clipping
  std::vector<double> smoothed_norms;  // EMA of raw_norms
  std::vector<double> losses;

  void record(std::size_t step, double lr, double raw, double clipped, double loss);
  std::size_t size() const noexcept { return steps.size(); }

  bool operator==(const GradNormTrace&) const = default;
};

/// s_0 = x_0, s_t = factor * s_{t-1} + (1 - factor) * x_t.
std::vector<double> ema_smooth(std::span<const double> series, double factor);
/// Unbiased (n - 1) sample variance; 0 for fewer than two points.
double sample_variance(std::span<const double> series);

/// Tab-separated: step, lr, raw_grad_norm, smoothed_grad_norm, loss.
void write_trace(const std::filesystem::path& path, const GradNormTrace& trace);
GradNormTrace read_trace(const std::filesystem::path& path);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double mean_loss = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

struct TrainResult {
  BiEncoder model;
  GradNormTrace trace;
  std::vector<EpochMetrics> epochs;
};

using EpochCallback = std::function<void(std::size_t epoch, const BiEncoder& model)>;

/// Trains on the non-NIL mentions of data.train against data.entities.
/// Deterministic for a fixed config: same seed, same bits.
TrainResult train(const DatasetSplit& data, const Vocabulary& vocab, const TrainConfig& cfg,
                  const EpochCallback& on_epoch_end = {});

/// Mean base loss (no adversarial term) over `mentions` with frozen
/// parameters, using random negatives drawn from `seed`.
double evaluate_loss(const BiEncoder& model, std::span<const MentionRecord> mentions,
                     std::span<const EntityRecord> entities, const Vocabulary& vocab, const TrainConfig& cfg,
                     std::uint64_t seed);

}  // namespace proxyel
