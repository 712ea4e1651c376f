#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "proxyel/encoder.hpp"

namespace proxyel {

/// Reserved label for mentions without a knowledge-base entry. Never a valid
/// entity id.
inline constexpr std::string_view kNilLabel = "NIL";

struct MentionRecord {
  std::string mention_id;
  std::string context_left;
  std::string mention;
  std::string context_right;
  std::string label;  // entity id or kNilLabel
  std::optional<std::string> group;

  bool is_nil() const noexcept { return label == kNilLabel; }
  bool operator==(const MentionRecord&) const = default;
};

struct EntityRecord {
  std::string entity_id;
  std::string title;
  std::vector<std::string> types;
  std::string description;

  bool operator==(const EntityRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Tokenization

/// Lowercases ASCII letters, splits on whitespace, and emits every ASCII
/// punctuation character as its own token. Bytes >= 0x80 are word characters.
std::vector<std::string> split_words(std::string_view text);

enum SpecialToken : std::int32_t {
  kPad = 0,
  kUnk = 1,
  kCls = 2,
  kSep = 3,
  kMentionStart = 4,
  kMentionEnd = 5,
  kEnt = 6,
};

class Vocabulary {
public:
  static constexpr std::size_t kReservedCount = 7;

  /// Only the reserved tokens.
  Vocabulary();

  /// Reserved tokens followed by the distinct words of `texts` in sorted order.
  static Vocabulary build(std::span<const std::string> texts);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

std::vector<std::int32_t> tokenize(std::string_view text, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Input templates

enum class EntityStyle { zeshel, medmentions };

const char* entity_style_name(EntityStyle style) noexcept;
EntityStyle parse_entity_style(const std::string& name);

/// [CLS] ctxt_l [M_s] mention [M_e] ctxt_r [SEP]. Context is trimmed around
/// the mention (left side keeps its tail, right side its head) with the
/// remaining budget split as evenly as possible.
TokenSequence render_mention(const MentionRecord& m, const Vocabulary& vocab,
                             std::size_t max_len = kDefaultMaxSeqLen);

/// zeshel:      [CLS] title [ENT] description [SEP]
/// medmentions: [CLS] title [SEP] types [SEP] description [SEP]
/// Only description tokens are dropped (from the tail) to fit max_len.
TokenSequence render_entity(const EntityRecord& e, const Vocabulary& vocab,
                            std::size_t max_len = kDefaultMaxSeqLen,
                            EntityStyle style = EntityStyle::zeshel);

std::vector<TokenSequence> render_entities(std::span<const EntityRecord> entities, const Vocabulary& vocab,
                                           std::size_t max_len, EntityStyle style);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetSplit {
  std::vector<MentionRecord> train;
  std::vector<MentionRecord> validation;
  std::vector<MentionRecord> test;
  std::vector<EntityRecord> entities;

  /// Checks unique entity ids, nonempty titles/mentions, and that every
  /// label is NIL or an existing entity.
  void validate() const;
  /// entity_id -> position in `entities`.
  std::unordered_map<std::string, std::size_t> entity_positions() const;
  std::vector<std::string> all_texts() const;

  bool operator==(const DatasetSplit&) const = default;
};

struct SplitStats {
  std::size_t mentions = 0;
  std::size_t nil_mentions = 0;
  std::size_t distinct_gold = 0;
  /// Percentage of distinct gold entities that also occur as gold in train.
  double percent_entities_seen = 0.0;
};

struct DatasetStats {
  SplitStats train;
  SplitStats validation;
  SplitStats test;
  std::size_t entities = 0;
};

DatasetStats dataset_stats(const DatasetSplit& d);

/// One JSON object per line with the record's named fields, UTF-8.
void write_mentions(const std::filesystem::path& path, std::span<const MentionRecord> mentions);
std::vector<MentionRecord> read_mentions(const std::filesystem::path& path);
void write_entities(const std::filesystem::path& path, std::span<const EntityRecord> entities);
std::vector<EntityRecord> read_entities(const std::filesystem::path& path);

struct DatasetPaths {
  std::filesystem::path entities;
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> validation;
  std::optional<std::filesystem::path> test;

  /// entities.jsonl, train.jsonl, val.jsonl, test.jsonl under `dir`.
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

/// Loads and validates. Dangling labels are reported with the entity id.
DatasetSplit load_dataset(const DatasetPaths& paths);
/// Writes the four record files of DatasetPaths::in_directory(dir).
void save_dataset(const std::filesystem::path& dir, const DatasetSplit& d);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticConfig {
  std::size_t n_entities = 1000;
  std::size_t n_train_mentions = 5000;
  std::size_t n_validation_mentions = 1000;
  std::size_t n_test_mentions = 1000;
  std::size_t n_types = 10;
  double alias_noise = 0.2;
  /// Fraction of validation/test mentions whose gold entity never appears in train.
  double zero_shot_fraction = 0.5;
  std::uint64_t seed = 13;

  std::size_t name_tokens_per_type = 40;
  std::size_t context_tokens_per_type = 30;
  std::size_t shared_tokens = 60;
  std::size_t title_min_tokens = 2;
  std::size_t title_max_tokens = 3;
  std::size_t description_tokens = 6;
  std::size_t context_tokens = 4;  // per side
  /// Probability that a context/description token is drawn from the shared
  /// pool rather than the type's own pool.
  double context_shared_rate = 0.5;

  void validate() const;
};

/// Entities get type-specific title and description vocabularies; mentions
/// are noisy aliases of titles with type-flavoured context. Deterministic
/// given the seed.
DatasetSplit generate_synthetic(const SyntheticConfig& config);

/// Relabels mentions whose gold entity carries any held-out type as NIL and
/// removes those entities from the knowledge base.
DatasetSplit make_nil_split(const DatasetSplit& d, std::span<const std::string> holdout_types);

/// Distinct types in knowledge-base order of first appearance.
std::vector<std::string> kb_types(const DatasetSplit& d);

}  // namespace proxyel
