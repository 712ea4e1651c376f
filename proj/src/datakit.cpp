#include "proxyel/datakit.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "proxyel/errors.hpp"

namespace proxyel {

using ojson = nlohmann::ordered_json;

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kTokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                   "[M_s]", "[M_e]", "[ENT]"};
  return kTokens;
}

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }
bool is_ascii_space(unsigned char c) { return c < 0x80 && std::isspace(c); }

void append(std::vector<std::int32_t>& out, std::span<const std::int32_t> ids) {
  out.insert(out.end(), ids.begin(), ids.end());
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return words;
}

Vocabulary::Vocabulary() : tokens_(reserved_tokens()) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::int32_t>(i));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    require(!t.empty() && std::none_of(t.begin(), t.end(), [](char c) { return is_ascii_space(static_cast<unsigned char>(c)); }),
            ErrorCategory::data, "vocabulary: tokens must be nonempty and whitespace-free");
    if (v.index_.contains(t)) continue;
    v.index_.emplace(t, static_cast<std::int32_t>(v.tokens_.size()));
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& text : texts) {
    for (auto& w : split_words(text)) words.insert(std::move(w));
  }
  return from_tokens({words.begin(), words.end()});
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  const auto& reserved = reserved_tokens();
  require(lines.size() >= reserved.size() &&
              std::equal(reserved.begin(), reserved.end(), lines.begin()),
          ErrorCategory::parse, "vocabulary '" + path.string() + "': reserved tokens must come first");
  const std::size_t before = lines.size();
  Vocabulary v = from_tokens({lines.begin() + static_cast<std::ptrdiff_t>(reserved.size()), lines.end()});
  require(v.size() == before, ErrorCategory::parse, "vocabulary '" + path.string() + "': duplicate token");
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCategory::io, "cannot write vocabulary '" + path.string() + "'");
  for (const auto& t : tokens_) out << t << '\n';
  require(out.good(), ErrorCategory::io, "write to '" + path.string() + "' failed");
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(), ErrorCategory::out_of_range,
          "vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::int32_t> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::int32_t> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

const char* entity_style_name(EntityStyle style) noexcept {
  return style == EntityStyle::zeshel ? "zeshel" : "medmentions";
}

EntityStyle parse_entity_style(const std::string& name) {
  if (name == "zeshel") return EntityStyle::zeshel;
  if (name == "medmentions") return EntityStyle::medmentions;
  fail(ErrorCategory::parse, "unknown entity style '" + name + "'");
}

TokenSequence render_mention(const MentionRecord& m, const Vocabulary& vocab, std::size_t max_len) {
  const auto left = tokenize(m.context_left, vocab);
  const auto mention = tokenize(m.mention, vocab);
  const auto right = tokenize(m.context_right, vocab);
  require(!mention.empty(), ErrorCategory::data, "mention '" + m.mention_id + "': empty mention text");
  constexpr std::size_t kSpecials = 4;
  if (mention.size() + kSpecials > max_len) {
    fail(ErrorCategory::out_of_range, "mention '" + m.mention_id + "': mention span of " +
                                          std::to_string(mention.size()) +
                                          " tokens does not fit max_len " + std::to_string(max_len));
  }
  const std::size_t budget = max_len - kSpecials - mention.size();
  const std::size_t keep_right = std::min(right.size(), std::max(budget / 2, budget - std::min(left.size(), budget)));
  const std::size_t keep_left = std::min(left.size(), budget - keep_right);

  std::vector<std::int32_t> ids;
  ids.reserve(kSpecials + keep_left + mention.size() + keep_right);
  ids.push_back(kCls);
  append(ids, std::span(left).subspan(left.size() - keep_left));
  ids.push_back(kMentionStart);
  append(ids, mention);
  ids.push_back(kMentionEnd);
  append(ids, std::span(right).first(keep_right));
  ids.push_back(kSep);
  return TokenSequence(std::move(ids));
}

TokenSequence render_entity(const EntityRecord& e, const Vocabulary& vocab, std::size_t max_len,
                            EntityStyle style) {
  const auto title = tokenize(e.title, vocab);
  const auto description = tokenize(e.description, vocab);
  std::vector<std::int32_t> types;
  if (style == EntityStyle::medmentions) {
    for (const auto& t : e.types) append(types, tokenize(t, vocab));
  }
  const std::size_t specials = style == EntityStyle::zeshel ? 3 : 4;
  const std::size_t fixed = specials + title.size() + types.size();
  if (fixed > max_len) {
    fail(ErrorCategory::out_of_range, "entity '" + e.entity_id + "': title" +
                                          (style == EntityStyle::medmentions ? " and types" : "") +
                                          " do not fit max_len " + std::to_string(max_len));
  }
  const std::size_t keep = std::min(description.size(), max_len - fixed);

  std::vector<std::int32_t> ids;
  ids.reserve(fixed + keep);
  ids.push_back(kCls);
  append(ids, title);
  if (style == EntityStyle::zeshel) {
    ids.push_back(kEnt);
  } else {
    ids.push_back(kSep);
    append(ids, types);
    ids.push_back(kSep);
  }
  append(ids, std::span(description).first(keep));
  ids.push_back(kSep);
  return TokenSequence(std::move(ids));
}

std::vector<TokenSequence> render_entities(std::span<const EntityRecord> entities, const Vocabulary& vocab,
                                           std::size_t max_len, EntityStyle style) {
  std::vector<TokenSequence> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back(render_entity(e, vocab, max_len, style));
  return out;
}

// ---------------------------------------------------------------------------

void DatasetSplit::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& e : entities) {
    require(e.entity_id != kNilLabel, ErrorCategory::data, "entity id 'NIL' is reserved");
    require(!e.entity_id.empty(), ErrorCategory::data, "entity with empty id");
    require(!e.title.empty(), ErrorCategory::data, "entity '" + e.entity_id + "': empty title");
    require(ids.insert(e.entity_id).second, ErrorCategory::data, "duplicate entity id '" + e.entity_id + "'");
  }
  for (const auto* split : {&train, &validation, &test}) {
    for (const auto& m : *split) {
      require(!m.mention.empty(), ErrorCategory::data, "mention '" + m.mention_id + "': empty mention text");
      if (!m.is_nil() && !ids.contains(m.label)) {
        fail(ErrorCategory::data, "mention '" + m.mention_id + "' references unknown entity '" + m.label + "'");
      }
    }
  }
}

std::unordered_map<std::string, std::size_t> DatasetSplit::entity_positions() const {
  std::unordered_map<std::string, std::size_t> pos;
  pos.reserve(entities.size());
  for (std::size_t i = 0; i < entities.size(); ++i) pos.emplace(entities[i].entity_id, i);
  return pos;
}

std::vector<std::string> DatasetSplit::all_texts() const {
  std::vector<std::string> texts;
  for (const auto& e : entities) {
    texts.push_back(e.title);
    texts.push_back(e.description);
    texts.insert(texts.end(), e.types.begin(), e.types.end());
  }
  for (const auto* split : {&train, &validation, &test}) {
    for (const auto& m : *split) {
      texts.push_back(m.context_left);
      texts.push_back(m.mention);
      texts.push_back(m.context_right);
    }
  }
  return texts;
}

namespace {

SplitStats split_stats(std::span<const MentionRecord> mentions, const std::unordered_set<std::string>& seen) {
  SplitStats s;
  s.mentions = mentions.size();
  std::unordered_set<std::string> gold;
  for (const auto& m : mentions) {
    if (m.is_nil()) {
      ++s.nil_mentions;
    } else {
      gold.insert(m.label);
    }
  }
  s.distinct_gold = gold.size();
  const auto hits = std::count_if(gold.begin(), gold.end(), [&](const auto& g) { return seen.contains(g); });
  s.percent_entities_seen = gold.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(gold.size());
  return s;
}

}  // namespace

DatasetStats dataset_stats(const DatasetSplit& d) {
  std::unordered_set<std::string> seen;
  for (const auto& m : d.train) {
    if (!m.is_nil()) seen.insert(m.label);
  }
  return {split_stats(d.train, seen), split_stats(d.validation, seen), split_stats(d.test, seen),
          d.entities.size()};
}

// ---------------------------------------------------------------------------
// JSONL I/O

namespace {

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCategory::parse, where + ": " + e.what());
    }
    require(j.is_object(), ErrorCategory::parse, where + ": record is not an object");
    fn(j, where);
  }
}

void check_keys(const ojson& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    require(std::find(allowed.begin(), allowed.end(), key) != allowed.end(), ErrorCategory::parse,
            where + ": unknown field '" + key + "'");
  }
}

std::string string_field(const ojson& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  require(it != j.end() && it->is_string(), ErrorCategory::parse,
          where + ": field '" + key + "' missing or not a string");
  return it->get<std::string>();
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot write '" + path.string() + "'");
  for (const auto& l : lines) out << l << '\n';
  require(out.good(), ErrorCategory::io, "write to '" + path.string() + "' failed");
}

}  // namespace

void write_mentions(const std::filesystem::path& path, std::span<const MentionRecord> mentions) {
  std::vector<std::string> lines;
  lines.reserve(mentions.size());
  for (const auto& m : mentions) {
    ojson j;
    j["mention_id"] = m.mention_id;
    j["context_left"] = m.context_left;
    j["mention"] = m.mention;
    j["context_right"] = m.context_right;
    j["label"] = m.label;
    j["group"] = m.group ? ojson(*m.group) : ojson(nullptr);
    lines.push_back(j.dump());
  }
  write_lines(path, lines);
}

std::vector<MentionRecord> read_mentions(const std::filesystem::path& path) {
  std::vector<MentionRecord> out;
  for_each_json_line(path, [&](const ojson& j, const std::string& where) {
    check_keys(j, {"mention_id", "context_left", "mention", "context_right", "label", "group"}, where);
    MentionRecord m;
    m.mention_id = string_field(j, "mention_id", where);
    m.context_left = string_field(j, "context_left", where);
    m.mention = string_field(j, "mention", where);
    m.context_right = string_field(j, "context_right", where);
    m.label = string_field(j, "label", where);
    require(!m.mention.empty(), ErrorCategory::parse, where + ": empty mention text");
    if (auto g = j.find("group"); g != j.end() && !g->is_null()) {
      require(g->is_string(), ErrorCategory::parse, where + ": field 'group' must be a string or null");
      m.group = g->get<std::string>();
    }
    out.push_back(std::move(m));
  });
  return out;
}

void write_entities(const std::filesystem::path& path, std::span<const EntityRecord> entities) {
  std::vector<std::string> lines;
  lines.reserve(entities.size());
  for (const auto& e : entities) {
    ojson j;
    j["entity_id"] = e.entity_id;
    j["title"] = e.title;
    j["types"] = e.types;
    j["description"] = e.description;
    lines.push_back(j.dump());
  }
  write_lines(path, lines);
}

std::vector<EntityRecord> read_entities(const std::filesystem::path& path) {
  std::vector<EntityRecord> out;
  for_each_json_line(path, [&](const ojson& j, const std::string& where) {
    check_keys(j, {"entity_id", "title", "types", "description"}, where);
    EntityRecord e;
    e.entity_id = string_field(j, "entity_id", where);
    e.title = string_field(j, "title", where);
    e.description = string_field(j, "description", where);
    auto t = j.find("types");
    require(t != j.end() && t->is_array(), ErrorCategory::parse, where + ": field 'types' missing or not a list");
    for (const auto& x : *t) {
      require(x.is_string(), ErrorCategory::parse, where + ": 'types' entries must be strings");
      e.types.push_back(x.get<std::string>());
    }
    out.push_back(std::move(e));
  });
  return out;
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "entities.jsonl", dir / "train.jsonl", dir / "val.jsonl", dir / "test.jsonl"};
}

DatasetSplit load_dataset(const DatasetPaths& paths) {
  DatasetSplit d;
  d.entities = read_entities(paths.entities);
  if (paths.train) d.train = read_mentions(*paths.train);
  if (paths.validation) d.validation = read_mentions(*paths.validation);
  if (paths.test) d.test = read_mentions(*paths.test);
  d.validate();
  return d;
}

void save_dataset(const std::filesystem::path& dir, const DatasetSplit& d) {
  std::filesystem::create_directories(dir);
  const auto p = DatasetPaths::in_directory(dir);
  write_entities(p.entities, d.entities);
  write_mentions(*p.train, d.train);
  write_mentions(*p.validation, d.validation);
  write_mentions(*p.test, d.test);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SyntheticConfig::validate() const {
  require(n_entities >= 2, ErrorCategory::config, "synthetic: n_entities must be >= 2");
  require(n_types >= 1 && n_types <= n_entities, ErrorCategory::config,
          "synthetic: n_types must lie in [1, n_entities]");
  require(alias_noise >= 0.0 && alias_noise <= 1.0, ErrorCategory::config, "synthetic: alias_noise must lie in [0, 1]");
  require(zero_shot_fraction >= 0.0 && zero_shot_fraction <= 1.0, ErrorCategory::config,
          "synthetic: zero_shot_fraction must lie in [0, 1]");
  require(context_shared_rate >= 0.0 && context_shared_rate <= 1.0, ErrorCategory::config,
          "synthetic: context_shared_rate must lie in [0, 1]");
  require(title_min_tokens >= 1 && title_min_tokens <= title_max_tokens, ErrorCategory::config,
          "synthetic: title token range is empty");
  require(title_max_tokens <= name_tokens_per_type, ErrorCategory::config,
          "synthetic: titles longer than the per-type name pool");
  require(context_tokens_per_type >= 1 && shared_tokens >= 1, ErrorCategory::config,
          "synthetic: token pools must be nonempty");
  require(n_train_mentions == 0 || n_entities - n_entities / 2 >= 1, ErrorCategory::config,
          "synthetic: infeasible split sizes");
}

namespace {

class WordFactory {
public:
  explicit WordFactory(std::mt19937_64& rng) : rng_(rng) {}

  std::string fresh() {
    static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
    static constexpr std::string_view kVowels = "aeiou";
    std::uniform_int_distribution<std::size_t> onset(0, kOnsets.size() - 1);
    std::uniform_int_distribution<std::size_t> vowel(0, kVowels.size() - 1);
    std::uniform_int_distribution<int> syllables(2, 4);
    for (;;) {
      std::string w;
      const int n = syllables(rng_);
      for (int i = 0; i < n; ++i) {
        w.push_back(kOnsets[onset(rng_)]);
        w.push_back(kVowels[vowel(rng_)]);
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::vector<std::string> pool(std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(fresh());
    return out;
  }

private:
  std::mt19937_64& rng_;
  std::unordered_set<std::string> used_;
};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

struct TypePools {
  std::string name;
  std::vector<std::string> names;
  std::vector<std::string> context;
};

}  // namespace

DatasetSplit generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  WordFactory words(rng);

  std::vector<TypePools> types(cfg.n_types);
  for (auto& t : types) {
    t.name = words.fresh();
    t.name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t.name[0])));
    t.names = words.pool(cfg.name_tokens_per_type);
    t.context = words.pool(cfg.context_tokens_per_type);
  }
  const auto shared = words.pool(cfg.shared_tokens);
  std::bernoulli_distribution use_shared(cfg.context_shared_rate);

  auto flavoured = [&](const TypePools& t, std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(use_shared(rng) ? pick(shared, rng) : pick(t.context, rng));
    return join(out);
  };

  DatasetSplit d;
  std::vector<std::vector<std::string>> titles(cfg.n_entities);
  std::vector<std::size_t> entity_type(cfg.n_entities);
  std::set<std::vector<std::string>> used_titles;
  std::uniform_int_distribution<std::size_t> title_len(cfg.title_min_tokens, cfg.title_max_tokens);
  for (std::size_t i = 0; i < cfg.n_entities; ++i) {
    entity_type[i] = i % cfg.n_types;
    const auto& t = types[entity_type[i]];
    std::vector<std::string> title;
    for (int attempt = 0;; ++attempt) {
      require(attempt < 1000, ErrorCategory::config,
              "synthetic: cannot form unique titles; enlarge name_tokens_per_type");
      std::vector<std::string> pool = t.names;
      std::shuffle(pool.begin(), pool.end(), rng);
      title.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(title_len(rng)));
      if (used_titles.insert(title).second) break;
    }
    titles[i] = title;
    char id[16];
    std::snprintf(id, sizeof id, "E%05zu", i);
    d.entities.push_back({id, join(title), {t.name}, flavoured(t, cfg.description_tokens)});
  }

  // Entities split into a pool seen in training and a held-back pool.
  std::vector<std::size_t> order(cfg.n_entities);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> seen = order;
  std::vector<std::size_t> unseen;
  if (cfg.zero_shot_fraction > 0.0) {
    const std::size_t n_seen = cfg.n_entities - cfg.n_entities / 2;
    unseen.assign(order.begin() + static_cast<std::ptrdiff_t>(n_seen), order.end());
    seen.resize(n_seen);
    std::sort(seen.begin(), seen.end());
    std::sort(unseen.begin(), unseen.end());
  }

  std::bernoulli_distribution noisy(cfg.alias_noise);
  auto make_mention = [&](std::size_t entity, const std::string& mention_id) {
    const auto& t = types[entity_type[entity]];
    std::vector<std::string> alias = titles[entity];
    for (auto& w : alias) {
      if (noisy(rng)) w = pick(t.names, rng);
    }
    if (alias.size() > 1 && noisy(rng)) {
      std::uniform_int_distribution<std::size_t> at(0, alias.size() - 1);
      alias.erase(alias.begin() + static_cast<std::ptrdiff_t>(at(rng)));
    }
    MentionRecord m;
    m.mention_id = mention_id;
    m.context_left = flavoured(t, cfg.context_tokens);
    m.mention = join(alias);
    m.context_right = flavoured(t, cfg.context_tokens);
    m.label = d.entities[entity].entity_id;
    m.group = t.name;
    return m;
  };

  std::bernoulli_distribution zero_shot(cfg.zero_shot_fraction);
  auto fill = [&](std::vector<MentionRecord>& out, std::size_t n, const char* prefix, bool eval_split) {
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool from_unseen = eval_split && !unseen.empty() && zero_shot(rng);
      const std::size_t entity = pick(from_unseen ? unseen : seen, rng);
      char id[32];
      std::snprintf(id, sizeof id, "%s-%06zu", prefix, i);
      out.push_back(make_mention(entity, id));
    }
  };
  fill(d.train, cfg.n_train_mentions, "train", false);
  fill(d.validation, cfg.n_validation_mentions, "val", true);
  fill(d.test, cfg.n_test_mentions, "test", true);
  d.validate();
  return d;
}

std::vector<std::string> kb_types(const DatasetSplit& d) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& e : d.entities) {
    for (const auto& t : e.types) {
      if (seen.insert(t).second) out.push_back(t);
    }
  }
  return out;
}

DatasetSplit make_nil_split(const DatasetSplit& d, std::span<const std::string> holdout_types) {
  if (holdout_types.empty()) return d;
  const auto present = kb_types(d);
  for (const auto& t : holdout_types) {
    require(std::find(present.begin(), present.end(), t) != present.end(), ErrorCategory::invalid_argument,
            "nil split: holdout type '" + t + "' does not occur in the knowledge base");
  }
  const std::unordered_set<std::string> holdout(holdout_types.begin(), holdout_types.end());
  DatasetSplit out;
  std::unordered_set<std::string> removed;
  for (const auto& e : d.entities) {
    const bool drop = std::any_of(e.types.begin(), e.types.end(), [&](const auto& t) { return holdout.contains(t); });
    if (drop) {
      removed.insert(e.entity_id);
    } else {
      out.entities.push_back(e);
    }
  }
  require(!out.entities.empty(), ErrorCategory::invalid_argument, "nil split: holdout removes the entire knowledge base");
  auto relabel = [&](const std::vector<MentionRecord>& in) {
    std::vector<MentionRecord> res = in;
    for (auto& m : res) {
      if (removed.contains(m.label)) m.label = std::string(kNilLabel);
    }
    return res;
  };
  out.train = relabel(d.train);
  out.validation = relabel(d.validation);
  out.test = relabel(d.test);
  out.validate();
  return out;
}

}  // namespace proxyel
