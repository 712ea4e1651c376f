#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "proxyel/encoder.hpp"

namespace proxyel {

/// Immutable snapshot of entity-tower outputs over the whole knowledge base.
/// Row i belongs to entity_ids[i].
struct EntityIndex {
  std::vector<std::string> entity_ids;
  Matrix embeddings;
  SimilarityKind similarity = SimilarityKind::dot;
  std::int64_t built_at_step = 0;

  std::size_t size() const noexcept { return entity_ids.size(); }
  void validate() const;

  bool operator==(const EntityIndex&) const = default;
};

/// Encodes every entity with the current entity tower, in the given order.
EntityIndex build_index(std::span<const std::string> entity_ids, std::span<const TokenSequence> rendered,
                        const BiEncoder& model, std::int64_t step = 0);

/// Scores of `query` against every index row.
Vector index_scores(const EntityIndex& index, std::span<const double> query);

/// The k rows most similar to `query`, excluding row `exclude` (pass
/// index.size() to exclude nothing). Descending score, ties by ascending
/// entity id.
std::vector<std::size_t> query_hard(const EntityIndex& index, std::span<const double> query, std::size_t k,
                                    std::size_t exclude);

enum class SamplingKind { random, mixed };

const char* sampling_name(SamplingKind kind) noexcept;
SamplingKind parse_sampling(const std::string& name);

struct SamplingPolicy {
  SamplingKind kind = SamplingKind::random;
  std::size_t n_negatives = 64;
  double hard_fraction = 0.5;
  std::size_t refresh_every_epochs = 1;
  std::uint64_t rng_seed = 0;

  void validate() const;
  /// ceil(hard_fraction * n_negatives) for mixed, 0 for random.
  std::size_t hard_count() const;
};

/// n distinct rows of [0, kb_size) drawn uniformly without replacement,
/// never `gold` nor any row in `exclude`. Returned in draw order.
std::vector<std::size_t> sample_random(std::size_t kb_size, std::size_t gold, std::size_t n, std::mt19937_64& rng,
                                       std::span<const std::size_t> exclude = {});

/// hard_count() rows from query_hard, then random rows to reach n_negatives.
std::vector<std::size_t> sample_mixed(const SamplingPolicy& policy, const EntityIndex& index,
                                      std::span<const double> mention_repr, std::size_t gold, std::mt19937_64& rng);

/// Same container as checkpoints, magic "PXELINDX".
void save_index(const std::filesystem::path& path, const EntityIndex& index);
EntityIndex load_index(const std::filesystem::path& path);

}  // namespace proxyel
