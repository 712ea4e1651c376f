#pragma once

#include <span>
#include <vector>

#include "proxyel/encoder.hpp"
#include "proxyel/numerics.hpp"

namespace proxyel {

/// Similarities of one mention against its positive proxy and N >= 1
/// negative proxies.
struct ScoredProxySet {
  double positive = 0.0;
  Vector negatives;

  void validate() const;
};

struct ScoreGrads {
  double positive = 0.0;
  Vector negatives;
};

struct PbHyper {
  double alpha = 32.0;  // scale
  double delta = 0.0;   // margin

  void validate() const;
};

struct FgsmHyper {
  double epsilon = 0.01;
  double lambda = 1.0;

  void validate() const;
};

enum class LossKind { ce, pb };

const char* loss_name(LossKind kind) noexcept;
LossKind parse_loss(const std::string& name);

/// -log softmax(positive) over {positive} U negatives, via log-sum-exp.
double ce_loss(const ScoredProxySet& s);
ScoreGrads ce_grad(const ScoredProxySet& s);

/// softplus(-alpha (s+ - delta)) + log(1 + sum_i exp(alpha (s-_i + delta))).
/// The negative term is evaluated as softplus(logsumexp(.)) so large alpha
/// cannot overflow.
double pb_loss(const ScoredProxySet& s, const PbHyper& h);

/// The positive component depends only on s+ and each negative component
/// only on the negatives; no term couples the two.
ScoreGrads pb_grad(const ScoredProxySet& s, const PbHyper& h);

double loss_value(LossKind kind, const ScoredProxySet& s, const PbHyper& h);
ScoreGrads loss_grad(LossKind kind, const ScoredProxySet& s, const PbHyper& h);

/// z + eps * sign(g); sign(0) = 0.
Matrix perturb_negative(const Matrix& z, const Matrix& g, double eps);
/// z - eps * sign(g); sign(0) = 0.
Matrix perturb_positive(const Matrix& z, const Matrix& g, double eps);

struct AdversarialProxySet {
  std::vector<Matrix> adv_negative_embeddings;
  Matrix adv_positive_embedding;

  std::size_t size() const noexcept { return adv_negative_embeddings.size() + 1; }
};

/// `entities[0]` is the positive; the rest are negatives. Perturbations
/// follow the gradient of the similarity s(m, e) wrt each entity's input
/// embeddings; they are constants for any later differentiation.
AdversarialProxySet build_adversarial_set(std::span<const double> mention_repr,
                                          std::span<const TowerForward> entities,
                                          const EncoderParams& entity_tower, SimilarityKind kind,
                                          double eps);

/// L(m, P) + lambda * L(m, P_adv).
double combined_objective(const ScoredProxySet& base, const ScoredProxySet& adversarial,
                          LossKind kind, const PbHyper& pb, const FgsmHyper& fgsm);

}  // namespace proxyel
