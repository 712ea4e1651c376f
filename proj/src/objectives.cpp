#include "proxyel/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "proxyel/errors.hpp"

namespace proxyel {

void ScoredProxySet::validate() const {
  require(!negatives.empty(), ErrorCategory::invalid_argument, "proxy set: at least one negative required");
  require(std::isfinite(positive) && all_finite(negatives), ErrorCategory::non_finite,
          "proxy set: non-finite score");
}

void PbHyper::validate() const {
  require(std::isfinite(alpha) && alpha > 0.0, ErrorCategory::invalid_argument, "pb: alpha must be > 0");
  require(std::isfinite(delta) && delta >= 0.0, ErrorCategory::invalid_argument, "pb: delta must be >= 0");
}

void FgsmHyper::validate() const {
  require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorCategory::invalid_argument,
          "fgsm: epsilon must be finite and >= 0");
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCategory::invalid_argument,
          "fgsm: lambda must be finite and >= 0");
}

const char* loss_name(LossKind kind) noexcept { return kind == LossKind::ce ? "ce" : "pb"; }

LossKind parse_loss(const std::string& name) {
  if (name == "ce" || name == "CE") return LossKind::ce;
  if (name == "pb" || name == "Pb") return LossKind::pb;
  fail(ErrorCategory::parse, "unknown loss kind '" + name + "'");
}

namespace {

Vector all_scores(const ScoredProxySet& s) {
  Vector v;
  v.reserve(s.negatives.size() + 1);
  v.push_back(s.positive);
  v.insert(v.end(), s.negatives.begin(), s.negatives.end());
  return v;
}

Vector shifted_negatives(const ScoredProxySet& s, const PbHyper& h) {
  Vector a(s.negatives.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = h.alpha * (s.negatives[i] + h.delta);
  return a;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Matrix perturb(const Matrix& z, const Matrix& g, double step) {
  require(z.rows == g.rows && z.cols == g.cols, ErrorCategory::dimension_mismatch,
          "fgsm: embedding and gradient shapes differ");
  Matrix out = z;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += step * sign(g.data[i]);
  return out;
}

}  // namespace

double ce_loss(const ScoredProxySet& s) {
  s.validate();
  // Shifted by the positive score so a confident positive keeps full
  // relative precision through log1p.
  double peak = 0.0;
  for (double x : s.negatives) peak = std::max(peak, x - s.positive);
  double tail = 0.0;
  for (double x : s.negatives) tail += std::exp(x - s.positive - peak);
  if (peak == 0.0) return std::log1p(tail);
  return peak + std::log(std::exp(-peak) + tail);
}

ScoreGrads ce_grad(const ScoredProxySet& s) {
  s.validate();
  const Vector p = stable_softmax(all_scores(s));
  ScoreGrads g;
  g.positive = -1.0 + p[0];
  g.negatives.assign(p.begin() + 1, p.end());
  return g;
}

double pb_loss(const ScoredProxySet& s, const PbHyper& h) {
  s.validate();
  h.validate();
  const double pos_term = softplus(-h.alpha * (s.positive - h.delta));
  const double neg_term = softplus(log_sum_exp(shifted_negatives(s, h)));
  return pos_term + neg_term;
}

ScoreGrads pb_grad(const ScoredProxySet& s, const PbHyper& h) {
  s.validate();
  h.validate();
  ScoreGrads g;
  // -alpha e^{-a}/(1 + e^{-a}) = -alpha * sigmoid(-a), a = alpha (s+ - delta)
  g.positive = -h.alpha * sigmoid(-h.alpha * (s.positive - h.delta));

  // alpha e^{a_i} / (1 + sum_j e^{a_j}), both sides scaled by e^{-peak} with
  // peak >= 0 so the leading 1 is kept exactly when it dominates.
  const Vector a = shifted_negatives(s, h);
  const double peak = std::max(0.0, *std::max_element(a.begin(), a.end()));
  Vector e(a.size());
  double denom = std::exp(-peak);
  for (std::size_t i = 0; i < a.size(); ++i) {
    e[i] = std::exp(a[i] - peak);
    denom += e[i];
  }
  g.negatives.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g.negatives[i] = h.alpha * e[i] / denom;
  return g;
}

double loss_value(LossKind kind, const ScoredProxySet& s, const PbHyper& h) {
  return kind == LossKind::ce ? ce_loss(s) : pb_loss(s, h);
}

ScoreGrads loss_grad(LossKind kind, const ScoredProxySet& s, const PbHyper& h) {
  return kind == LossKind::ce ? ce_grad(s) : pb_grad(s, h);
}

Matrix perturb_negative(const Matrix& z, const Matrix& g, double eps) {
  require(std::isfinite(eps) && eps >= 0.0, ErrorCategory::invalid_argument, "fgsm: eps must be >= 0");
  return perturb(z, g, eps);
}

Matrix perturb_positive(const Matrix& z, const Matrix& g, double eps) {
  require(std::isfinite(eps) && eps >= 0.0, ErrorCategory::invalid_argument, "fgsm: eps must be >= 0");
  return perturb(z, g, -eps);
}

AdversarialProxySet build_adversarial_set(std::span<const double> mention_repr,
                                          std::span<const TowerForward> entities,
                                          const EncoderParams& entity_tower, SimilarityKind kind,
                                          double eps) {
  require(entities.size() >= 2, ErrorCategory::invalid_argument,
          "fgsm: need a positive and at least one negative");
  AdversarialProxySet adv;
  const Matrix g_pos = grad_input_embeddings(mention_repr, entities[0], entity_tower, kind);
  adv.adv_positive_embedding = perturb_positive(entities[0].inputs, g_pos, eps);
  adv.adv_negative_embeddings.reserve(entities.size() - 1);
  for (std::size_t j = 1; j < entities.size(); ++j) {
    const Matrix g = grad_input_embeddings(mention_repr, entities[j], entity_tower, kind);
    adv.adv_negative_embeddings.push_back(perturb_negative(entities[j].inputs, g, eps));
  }
  return adv;
}

double combined_objective(const ScoredProxySet& base, const ScoredProxySet& adversarial,
                          LossKind kind, const PbHyper& pb, const FgsmHyper& fgsm) {
  fgsm.validate();
  const double main = loss_value(kind, base, pb);
  if (fgsm.lambda == 0.0) return main;
  return main + fgsm.lambda * loss_value(kind, adversarial, pb);
}

}  // namespace proxyel
