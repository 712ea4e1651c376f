#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace proxyel {

using Vector = std::vector<double>;

/// Dense row-major matrix. Rows are exposed as spans so the encoder can treat
/// one row per token position.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

enum class SimilarityKind { dot, cosine };

const char* similarity_name(SimilarityKind kind) noexcept;
SimilarityKind parse_similarity(const std::string& name);

bool all_finite(std::span<const double> values) noexcept;

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);

/// Cosine similarity clamped to [-1, 1]. Throws if either argument has zero
/// norm; the message names the offending argument.
double cosine(std::span<const double> u, std::span<const double> v);

double softplus(double x);
double sigmoid(double x);
double log_sum_exp(std::span<const double> values);
Vector stable_softmax(std::span<const double> scores);

/// Similarity under `kind` plus its partial derivatives with respect to each
/// argument.
struct SimilarityGrad {
  double value = 0.0;
  Vector d_left;
  Vector d_right;
};

double similarity(std::span<const double> left, std::span<const double> right, SimilarityKind kind);
SimilarityGrad similarity_with_grad(std::span<const double> left, std::span<const double> right,
                                    SimilarityKind kind);

}  // namespace proxyel
