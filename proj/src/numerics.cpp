#include "proxyel/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "proxyel/errors.hpp"

namespace proxyel {

namespace {

constexpr double kSoftplusBranch = 30.0;

void check_same_dim(std::span<const double> u, std::span<const double> v, const char* op) {
  if (u.size() != v.size()) {
    fail(ErrorCategory::dimension_mismatch, std::string(op) + ": dimension mismatch (" +
                                                std::to_string(u.size()) + " vs " +
                                                std::to_string(v.size()) + ")");
  }
}

double raw_dot(std::span<const double> u, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

}  // namespace

const char* similarity_name(SimilarityKind kind) noexcept {
  return kind == SimilarityKind::dot ? "dot" : "cosine";
}

SimilarityKind parse_similarity(const std::string& name) {
  if (name == "dot") return SimilarityKind::dot;
  if (name == "cosine") return SimilarityKind::cosine;
  fail(ErrorCategory::parse, "unknown similarity kind '" + name + "'");
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> u, std::span<const double> v) {
  check_same_dim(u, v, "dot");
  const double result = raw_dot(u, v);
  require(std::isfinite(result), ErrorCategory::non_finite, "dot: non-finite result");
  return result;
}

double l2_norm(std::span<const double> v) { return std::sqrt(raw_dot(v, v)); }

double cosine(std::span<const double> u, std::span<const double> v) {
  check_same_dim(u, v, "cosine");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  require(nu > 0.0, ErrorCategory::invalid_argument, "cosine: first argument has zero norm");
  require(nv > 0.0, ErrorCategory::invalid_argument, "cosine: second argument has zero norm");
  const double c = raw_dot(u, v) / (nu * nv);
  require(std::isfinite(c), ErrorCategory::non_finite, "cosine: non-finite result");
  return std::clamp(c, -1.0, 1.0);
}

double softplus(double x) {
  require(std::isfinite(x), ErrorCategory::non_finite, "softplus: non-finite input");
  if (x > kSoftplusBranch) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> values) {
  require(!values.empty(), ErrorCategory::invalid_argument, "log_sum_exp: empty input");
  const double peak = *std::max_element(values.begin(), values.end());
  double acc = 0.0;
  for (double x : values) acc += std::exp(x - peak);
  return peak + std::log(acc);
}

Vector stable_softmax(std::span<const double> scores) {
  require(!scores.empty(), ErrorCategory::invalid_argument, "stable_softmax: empty input");
  require(all_finite(scores), ErrorCategory::non_finite, "stable_softmax: non-finite score");
  const double peak = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - peak);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

double similarity(std::span<const double> left, std::span<const double> right, SimilarityKind kind) {
  return kind == SimilarityKind::dot ? dot(left, right) : cosine(left, right);
}

SimilarityGrad similarity_with_grad(std::span<const double> left, std::span<const double> right,
                                    SimilarityKind kind) {
  SimilarityGrad g;
  if (kind == SimilarityKind::dot) {
    g.value = dot(left, right);
    g.d_left.assign(right.begin(), right.end());
    g.d_right.assign(left.begin(), left.end());
    return g;
  }
  g.value = cosine(left, right);
  const double nl = l2_norm(left);
  const double nr = l2_norm(right);
  // Unclamped value for the derivative; clamping only absorbs rounding.
  const double c = raw_dot(left, right) / (nl * nr);
  const double inv = 1.0 / (nl * nr);
  g.d_left.resize(left.size());
  g.d_right.resize(right.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    g.d_left[i] = right[i] * inv - c * left[i] / (nl * nl);
    g.d_right[i] = left[i] * inv - c * right[i] / (nr * nr);
  }
  return g;
}

}  // namespace proxyel
