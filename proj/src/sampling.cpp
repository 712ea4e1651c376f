#include "proxyel/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "binary_container.hpp"
#include "proxyel/errors.hpp"

namespace proxyel {

void EntityIndex::validate() const {
  require(embeddings.rows == entity_ids.size(), ErrorCategory::dimension_mismatch,
          "index: embedding rows differ from id count");
  std::unordered_set<std::string> seen(entity_ids.begin(), entity_ids.end());
  require(seen.size() == entity_ids.size(), ErrorCategory::data, "index: duplicate entity id");
  require(all_finite(embeddings.data), ErrorCategory::non_finite, "index: non-finite embedding");
}

EntityIndex build_index(std::span<const std::string> entity_ids, std::span<const TokenSequence> rendered,
                        const BiEncoder& model, std::int64_t step) {
  require(entity_ids.size() == rendered.size(), ErrorCategory::dimension_mismatch,
          "build_index: id count differs from rendered entity count");
  EntityIndex index;
  index.entity_ids.assign(entity_ids.begin(), entity_ids.end());
  index.similarity = model.similarity;
  index.built_at_step = step;
  const std::size_t out_dim = model.entity_tower.dims().out_dim;
  index.embeddings = Matrix(entity_ids.size(), out_dim);
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    Vector y;
    try {
      y = encode(compose_input_embeddings(rendered[i], model.entity_tower), rendered[i].pad_mask,
                 model.entity_tower);
    } catch (const Error& e) {
      fail(e.category(), "build_index: entity '" + entity_ids[i] + "': " + e.what());
    }
    std::copy(y.begin(), y.end(), index.embeddings.row(i).begin());
  }
  index.validate();
  return index;
}

Vector index_scores(const EntityIndex& index, std::span<const double> query) {
  Vector s(index.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = similarity(query, index.embeddings.row(i), index.similarity);
  return s;
}

std::vector<std::size_t> query_hard(const EntityIndex& index, std::span<const double> query, std::size_t k,
                                    std::size_t exclude) {
  const std::size_t available = index.size() - (exclude < index.size() ? 1 : 0);
  require(k < index.size() && k <= available, ErrorCategory::out_of_range,
          "query_hard: k=" + std::to_string(k) + " must be below index size " + std::to_string(index.size()));
  const Vector s = index_scores(index, query);
  std::vector<std::size_t> rows;
  rows.reserve(available);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (i != exclude) rows.push_back(i);
  }
  auto better = [&](std::size_t a, std::size_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return index.entity_ids[a] < index.entity_ids[b];
  };
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end(), better);
  rows.resize(k);
  return rows;
}

const char* sampling_name(SamplingKind kind) noexcept { return kind == SamplingKind::random ? "random" : "mixed"; }

SamplingKind parse_sampling(const std::string& name) {
  if (name == "random") return SamplingKind::random;
  if (name == "mixed") return SamplingKind::mixed;
  fail(ErrorCategory::parse, "unknown sampling kind '" + name + "'");
}

void SamplingPolicy::validate() const {
  require(n_negatives >= 1, ErrorCategory::config, "sampling: n_negatives must be >= 1");
  require(refresh_every_epochs >= 1, ErrorCategory::config, "sampling: refresh_every_epochs must be >= 1");
  if (kind == SamplingKind::mixed) {
    require(hard_fraction > 0.0 && hard_fraction <= 1.0, ErrorCategory::config,
            "sampling: mixed policy needs 0 < hard_fraction <= 1");
  } else {
    require(hard_fraction >= 0.0 && hard_fraction <= 1.0, ErrorCategory::config,
            "sampling: hard_fraction must lie in [0, 1]");
  }
}

std::size_t SamplingPolicy::hard_count() const {
  if (kind == SamplingKind::random) return 0;
  // Small slack so products like 0.3 * 10 = 3.0000000000000004 round to 3.
  const double raw = hard_fraction * static_cast<double>(n_negatives);
  return std::min(n_negatives, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

std::vector<std::size_t> sample_random(std::size_t kb_size, std::size_t gold, std::size_t n, std::mt19937_64& rng,
                                       std::span<const std::size_t> exclude) {
  std::unordered_set<std::size_t> taken(exclude.begin(), exclude.end());
  if (gold < kb_size) taken.insert(gold);
  require(taken.size() + n <= kb_size, ErrorCategory::out_of_range,
          "sample_random: cannot draw " + std::to_string(n) + " negatives from a knowledge base of " +
              std::to_string(kb_size) + " with " + std::to_string(taken.size()) + " excluded");
  std::vector<std::size_t> out;
  out.reserve(n);
  // Rejection sampling; n is small relative to the knowledge base in practice.
  std::uniform_int_distribution<std::size_t> draw(0, kb_size - 1);
  while (out.size() < n) {
    const std::size_t r = draw(rng);
    if (taken.insert(r).second) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> sample_mixed(const SamplingPolicy& policy, const EntityIndex& index,
                                      std::span<const double> mention_repr, std::size_t gold, std::mt19937_64& rng) {
  policy.validate();
  std::vector<std::size_t> out = query_hard(index, mention_repr, policy.hard_count(), gold);
  const auto rest = sample_random(index.size(), gold, policy.n_negatives - out.size(), rng, out);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

namespace {
constexpr std::string_view kIndexMagic = "PXELINDX";
}

void save_index(const std::filesystem::path& path, const EntityIndex& index) {
  index.validate();
  detail::ContainerWriter w(path, kIndexMagic);
  w.u8(index.similarity == SimilarityKind::dot ? 0 : 1);
  w.u64(static_cast<std::uint64_t>(index.built_at_step));
  w.u64(index.entity_ids.size());
  for (const auto& id : index.entity_ids) w.str(id);
  w.matrix(index.embeddings);
  w.finish();
}

EntityIndex load_index(const std::filesystem::path& path) {
  detail::ContainerReader r(path, kIndexMagic);
  EntityIndex index;
  const auto kind = r.u8();
  require(kind <= 1, ErrorCategory::parse, "index: unknown similarity tag");
  index.similarity = kind == 0 ? SimilarityKind::dot : SimilarityKind::cosine;
  index.built_at_step = static_cast<std::int64_t>(r.u64());
  const auto n = r.u64();
  require(n < (std::uint64_t{1} << 32), ErrorCategory::parse, "index: implausible entity count");
  index.entity_ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) index.entity_ids.push_back(r.str());
  index.embeddings = r.matrix();
  r.expect_end();
  index.validate();
  return index;
}

}  // namespace proxyel
