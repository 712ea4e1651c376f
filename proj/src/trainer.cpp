#include "proxyel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "proxyel/errors.hpp"

namespace proxyel {

void ModelConfig::validate() const {
  require(dim >= 1 && out_dim >= 1, ErrorCategory::config, "model: dim and out_dim must be >= 1");
  require(max_seq_len >= 5, ErrorCategory::config, "model: max_seq_len must be >= 5");
}

void TrainConfig::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, ErrorCategory::config,
          "train: learning_rate must be >= 0");
  require(warmup_proportion >= 0.0 && warmup_proportion <= 1.0, ErrorCategory::config,
          "train: warmup_proportion must lie in [0, 1]");
  require(positive(adam_eps), ErrorCategory::config, "train: adam_eps must be > 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, ErrorCategory::config,
          "train: adam betas must lie in [0, 1)");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, ErrorCategory::config,
          "train: weight_decay must be >= 0");
  require(positive(clip_max_norm), ErrorCategory::config, "train: clip_max_norm must be > 0");
  require(batch_size >= 1, ErrorCategory::config, "train: batch_size must be >= 1");
  require(trace_smoothing >= 0.0 && trace_smoothing < 1.0, ErrorCategory::config,
          "train: trace_smoothing must lie in [0, 1)");
  pb.validate();
  fgsm.validate();
  sampling.validate();
  model.validate();
}

SimilarityKind TrainConfig::similarity() const {
  if (model.similarity) return *model.similarity;
  return loss == LossKind::ce ? SimilarityKind::dot : SimilarityKind::cosine;
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  require(step <= total_steps, ErrorCategory::out_of_range, "lr_at: step beyond total_steps");
  const auto warmup = static_cast<std::size_t>(std::floor(cfg.warmup_proportion * static_cast<double>(total_steps)));
  if (step < warmup) {
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps == warmup) return cfg.learning_rate;
  return cfg.learning_rate * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

namespace {

std::array<std::span<double>, 8> all_tensors(BiEncoderGrads& g) {
  auto a = g.mention_tower.tensors();
  auto b = g.entity_tower.tensors();
  return {a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]};
}

std::array<std::span<const double>, 8> all_tensors(const BiEncoderGrads& g) {
  auto a = g.mention_tower.tensors();
  auto b = g.entity_tower.tensors();
  return {a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]};
}

std::array<std::span<double>, 8> all_tensors(BiEncoder& m) {
  auto a = m.mention_tower.tensors();
  auto b = m.entity_tower.tensors();
  return {a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double global_grad_norm(const BiEncoderGrads& grads) {
  double acc = 0.0;
  for (auto t : all_tensors(grads)) {
    for (double x : t) acc += x * x;
  }
  return std::sqrt(acc);
}

double clip_gradients(BiEncoderGrads& grads, double max_norm) {
  require(max_norm > 0.0, ErrorCategory::invalid_argument, "clip_gradients: max_norm must be > 0");
  for (auto t : all_tensors(std::as_const(grads))) {
    require(all_finite(t), ErrorCategory::non_finite, "clip_gradients: non-finite gradient");
  }
  const double norm = global_grad_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto t : all_tensors(grads)) {
      for (double& x : t) x *= scale;
    }
  }
  return norm;
}

OptimizerState OptimizerState::zeros_like(const BiEncoder& model) {
  return {BiEncoderGrads::zeros_like(model), BiEncoderGrads::zeros_like(model), 0};
}

void adamw_step(BiEncoder& model, const BiEncoderGrads& grads, OptimizerState& state, double lr,
                const TrainConfig& cfg) {
  auto params = all_tensors(model);
  const auto g = all_tensors(grads);
  auto m = all_tensors(state.first_moment);
  auto v = all_tensors(state.second_moment);
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t].size() == g[t].size() && params[t].size() == m[t].size() && params[t].size() == v[t].size(),
            ErrorCategory::dimension_mismatch, "adamw_step: parameter/gradient/state shapes differ");
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] *= decay;
      m[t][i] = b1 * m[t][i] + (1.0 - b1) * g[t][i];
      v[t][i] = b2 * v[t][i] + (1.0 - b2) * g[t][i] * g[t][i];
      const double m_hat = m[t][i] / bias1;
      const double v_hat = v[t][i] / bias2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

void GradNormTrace::record(std::size_t step, double lr, double raw, double clipped, double loss) {
  const double smoothed = smoothed_norms.empty() ? raw : smoothing * smoothed_norms.back() + (1.0 - smoothing) * raw;
  steps.push_back(step);
  learning_rates.push_back(lr);
  raw_norms.push_back(raw);
  clipped_norms.push_back(clipped);
  smoothed_norms.push_back(smoothed);
  losses.push_back(loss);
}

std::vector<double> ema_smooth(std::span<const double> series, double factor) {
  std::vector<double> out;
  out.reserve(series.size());
  for (double x : series) out.push_back(out.empty() ? x : factor * out.back() + (1.0 - factor) * x);
  return out;
}

double sample_variance(std::span<const double> series) {
  if (series.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(series.size());
  double acc = 0.0;
  for (double x : series) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(series.size() - 1);
}

void write_trace(const std::filesystem::path& path, const GradNormTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCategory::io, "cannot write trace '" + path.string() + "'");
  out << "step\tlr\traw_grad_norm\tsmoothed_grad_norm\tloss\n";
  out.precision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << trace.steps[i] << '\t' << trace.learning_rates[i] << '\t' << trace.raw_norms[i] << '\t'
        << trace.smoothed_norms[i] << '\t' << trace.losses[i] << '\n';
  }
  require(out.good(), ErrorCategory::io, "write to '" + path.string() + "' failed");
}

GradNormTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open trace '" + path.string() + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "step\tlr\traw_grad_norm\tsmoothed_grad_norm\tloss",
          ErrorCategory::parse, "trace '" + path.string() + "': unexpected header");
  GradNormTrace trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t step = 0;
    double lr = 0, raw = 0, smoothed = 0, loss = 0;
    require(static_cast<bool>(row >> step >> lr >> raw >> smoothed >> loss), ErrorCategory::parse,
            path.string() + ":" + std::to_string(line_no) + ": malformed trace row");
    trace.steps.push_back(step);
    trace.learning_rates.push_back(lr);
    trace.raw_norms.push_back(raw);
    trace.clipped_norms.push_back(raw);
    trace.smoothed_norms.push_back(smoothed);
    trace.losses.push_back(loss);
  }
  return trace;
}

// ---------------------------------------------------------------------------

namespace {

struct PreparedCorpus {
  std::vector<std::string> entity_ids;
  std::vector<TokenSequence> entities;
  std::vector<TokenSequence> mentions;
  std::vector<std::size_t> gold;  // row into entities
};

PreparedCorpus prepare(std::span<const MentionRecord> mentions, std::span<const EntityRecord> entities,
                       const Vocabulary& vocab, const ModelConfig& model) {
  PreparedCorpus c;
  c.entities = render_entities(entities, vocab, model.max_seq_len, model.entity_style);
  std::unordered_map<std::string, std::size_t> rows;
  for (const auto& e : entities) {
    rows.emplace(e.entity_id, c.entity_ids.size());
    c.entity_ids.push_back(e.entity_id);
  }
  for (const auto& m : mentions) {
    if (m.is_nil()) continue;
    auto it = rows.find(m.label);
    require(it != rows.end(), ErrorCategory::data,
            "mention '" + m.mention_id + "' references unknown entity '" + m.label + "'");
    c.mentions.push_back(render_mention(m, vocab, model.max_seq_len));
    c.gold.push_back(it->second);
  }
  return c;
}

std::vector<TokenSequence> gather(const PreparedCorpus& c, std::size_t gold, std::span<const std::size_t> negatives) {
  std::vector<TokenSequence> out;
  out.reserve(negatives.size() + 1);
  out.push_back(c.entities[gold]);
  for (auto r : negatives) out.push_back(c.entities[r]);
  return out;
}

ScoredProxySet to_proxy_set(std::span<const double> scores) {
  return {scores[0], Vector(scores.begin() + 1, scores.end())};
}

Vector flatten(const ScoreGrads& g, double scale) {
  Vector out;
  out.reserve(g.negatives.size() + 1);
  out.push_back(scale * g.positive);
  for (double x : g.negatives) out.push_back(scale * x);
  return out;
}

/// Forward, loss and backward for one mention; returns the combined
/// objective and accumulates `weight`-scaled parameter gradients.
double mention_step(const BiEncoder& model, const TrainConfig& cfg, const TokenSequence& mention,
                    std::span<const TokenSequence> entities, double weight, BiEncoderGrads& grads) {
  ScoringContext ctx = forward_scoring(model, mention, entities);
  const ScoredProxySet base = to_proxy_set(context_scores(model, ctx));
  const double base_loss = loss_value(cfg.loss, base, cfg.pb);
  accumulate_grad_params(model, ctx, flatten(loss_grad(cfg.loss, base, cfg.pb), weight), grads);
  if (!cfg.fgsm_enabled || cfg.fgsm.lambda == 0.0) return base_loss;

  const AdversarialProxySet adv = build_adversarial_set(ctx.mention.output, ctx.entities, model.entity_tower,
                                                        model.similarity, cfg.fgsm.epsilon);
  ScoringContext adv_ctx;
  adv_ctx.mention = std::move(ctx.mention);
  adv_ctx.entities.reserve(adv.size());
  adv_ctx.entities.push_back(
      forward_tower_from_inputs(entities[0], adv.adv_positive_embedding, model.entity_tower));
  for (std::size_t j = 0; j < adv.adv_negative_embeddings.size(); ++j) {
    adv_ctx.entities.push_back(
        forward_tower_from_inputs(entities[j + 1], adv.adv_negative_embeddings[j], model.entity_tower));
  }
  const ScoredProxySet adv_scores = to_proxy_set(context_scores(model, adv_ctx));
  accumulate_grad_params(model, adv_ctx,
                         flatten(loss_grad(cfg.loss, adv_scores, cfg.pb), weight * cfg.fgsm.lambda), grads);
  return combined_objective(base, adv_scores, cfg.loss, cfg.pb, cfg.fgsm);
}

}  // namespace

TrainResult train(const DatasetSplit& data, const Vocabulary& vocab, const TrainConfig& cfg,
                  const EpochCallback& on_epoch_end) {
  cfg.validate();
  const PreparedCorpus corpus = prepare(data.train, data.entities, vocab, cfg.model);
  const EncoderDims dims{vocab.size(), cfg.model.dim, cfg.model.max_seq_len, cfg.model.out_dim};

  TrainResult result;
  result.model = BiEncoder::initialize(dims, cfg.similarity(), cfg.seed);
  result.trace.smoothing = cfg.trace_smoothing;
  BiEncoder& model = result.model;
  OptimizerState opt = OptimizerState::zeros_like(model);

  const std::size_t n = corpus.mentions.size();
  const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * cfg.epochs;
  std::mt19937_64 sampler(mix_seed(cfg.seed, cfg.sampling.rng_seed));

  EntityIndex index;
  std::vector<Vector> mention_reprs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.sampling.kind == SamplingKind::mixed && epoch % cfg.sampling.refresh_every_epochs == 0) {
      index = build_index(corpus.entity_ids, corpus.entities, model, static_cast<std::int64_t>(step));
      mention_reprs.clear();
      mention_reprs.reserve(n);
      for (const auto& m : corpus.mentions) mention_reprs.push_back(forward_tower(m, model.mention_tower).output);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 shuffler(mix_seed(cfg.seed, epoch + 1));
    std::shuffle(order.begin(), order.end(), shuffler);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      BiEncoderGrads grads = BiEncoderGrads::zeros_like(model);
      double batch_loss = 0.0;
      try {
        for (std::size_t k = begin; k < end; ++k) {
          const std::size_t i = order[k];
          const std::size_t gold = corpus.gold[i];
          const std::vector<std::size_t> negatives =
              cfg.sampling.kind == SamplingKind::mixed
                  ? sample_mixed(cfg.sampling, index, mention_reprs[i], gold, sampler)
                  : sample_random(corpus.entities.size(), gold, cfg.sampling.n_negatives, sampler);
          batch_loss += mention_step(model, cfg, corpus.mentions[i], gather(corpus, gold, negatives), weight, grads);
        }
        batch_loss *= weight;
        const double raw = clip_gradients(grads, cfg.clip_max_norm);
        const double lr = lr_at(step, total_steps, cfg);
        adamw_step(model, grads, opt, lr, cfg);
        result.trace.record(step, lr, raw, global_grad_norm(grads), batch_loss);
      } catch (const Error& e) {
        fail(e.category(), "train: epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ", step " +
                               std::to_string(step) + ": " + e.what());
      }
      epoch_loss += batch_loss * static_cast<double>(end - begin);
      ++step;
    }
    result.epochs.push_back({epoch, batches_per_epoch, n == 0 ? 0.0 : epoch_loss / static_cast<double>(n)});
    if (on_epoch_end) on_epoch_end(epoch, model);
  }
  return result;
}

double evaluate_loss(const BiEncoder& model, std::span<const MentionRecord> mentions,
                     std::span<const EntityRecord> entities, const Vocabulary& vocab, const TrainConfig& cfg,
                     std::uint64_t seed) {
  const PreparedCorpus corpus = prepare(mentions, entities, vocab, cfg.model);
  require(!corpus.mentions.empty(), ErrorCategory::invalid_argument, "evaluate_loss: no in-KB mentions");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < corpus.mentions.size(); ++i) {
    const auto negatives = sample_random(corpus.entities.size(), corpus.gold[i], cfg.sampling.n_negatives, rng);
    const auto seqs = gather(corpus, corpus.gold[i], negatives);
    const ScoringContext ctx = forward_scoring(model, corpus.mentions[i], seqs);
    total += loss_value(cfg.loss, to_proxy_set(context_scores(model, ctx)), cfg.pb);
  }
  return total / static_cast<double>(corpus.mentions.size());
}

}  // namespace proxyel
