#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "proxyel/datakit.hpp"
#include "proxyel/errors.hpp"
#include "support/errors.hpp"
#include "support/golden.hpp"

using namespace proxyel;
using proxyel::testing::detokenize;
using proxyel::testing::thrown_category;
using proxyel::testing::thrown_message;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("proxyel_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Vocabulary words_vocab() {
  const std::vector<std::string> texts{"alpha beta gamma delta kinase protein receptor the binds to cell"};
  return Vocabulary::build(texts);
}

SyntheticConfig small_synthetic() {
  SyntheticConfig c;
  c.n_entities = 40;
  c.n_train_mentions = 100;
  c.n_validation_mentions = 50;
  c.n_test_mentions = 50;
  c.n_types = 4;
  c.name_tokens_per_type = 12;
  c.context_tokens_per_type = 8;
  c.shared_tokens = 8;
  return c;
}

}  // namespace

TEST_CASE("input templates match the golden file") {
  const auto cases = testing::render_golden(std::string(PROXYEL_TEST_DATA_DIR) + "/templates_golden.json");
  CHECK(cases.size() >= 10);
  for (const auto& c : cases) {
    INFO(c.name);
    CHECK(c.actual == c.expected);
  }
}

TEST_CASE("split_words") {
  CHECK(split_words("The  Kinase(s), ok.") ==
        std::vector<std::string>{"the", "kinase", "(", "s", ")", ",", "ok", "."});
  CHECK(split_words("  \t\n ").empty());
  CHECK(split_words("a-b") == std::vector<std::string>{"a", "-", "b"});
  CHECK(split_words("caf\xc3\xa9 X") == std::vector<std::string>{"caf\xc3\xa9", "x"});
}

TEST_CASE("vocabulary: reserved ids, lookup, file round trip") {
  const auto v = words_vocab();
  CHECK(v.token(kPad) == "[PAD]");
  CHECK(v.token(kUnk) == "[UNK]");
  CHECK(v.token(kCls) == "[CLS]");
  CHECK(v.token(kSep) == "[SEP]");
  CHECK(v.token(kMentionStart) == "[M_s]");
  CHECK(v.token(kMentionEnd) == "[M_e]");
  CHECK(v.token(kEnt) == "[ENT]");
  CHECK(v.size() == Vocabulary::kReservedCount + 11);
  CHECK(v.token(static_cast<std::int32_t>(Vocabulary::kReservedCount)) == "alpha");
  CHECK(v.id("zzz") == kUnk);
  CHECK(tokenize("Alpha unknownword", v) == std::vector<std::int32_t>{v.id("alpha"), kUnk});
  CHECK(thrown_category([&] { v.token(1000); }) == ErrorCategory::out_of_range);

  const auto dir = scratch_dir("vocab");
  v.save(dir / "vocab.txt");
  CHECK(Vocabulary::load(dir / "vocab.txt") == v);
  {
    std::ofstream out(dir / "bad.txt");
    out << "alpha\nbeta\n";
  }
  CHECK(thrown_category([&] { Vocabulary::load(dir / "bad.txt"); }) == ErrorCategory::parse);
  CHECK(thrown_category([&] { Vocabulary::load(dir / "absent.txt"); }) == ErrorCategory::io);
  fs::remove_all(dir);
}

TEST_CASE("render_mention: layout and truncation invariants") {
  const auto v = words_vocab();
  std::mt19937_64 rng(1);
  const std::vector<std::string> pool{"alpha", "beta", "gamma", "delta", "cell", "the"};
  auto phrase = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + pool[rng() % pool.size()];
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    MentionRecord m{"m", phrase(rng() % 10), phrase(1 + rng() % 3), phrase(rng() % 10), "E", std::nullopt};
    const std::size_t mention_len = split_words(m.mention).size();
    const std::size_t max_len = mention_len + 4 + rng() % 12;
    const auto seq = render_mention(m, v, max_len);
    CHECK(seq.size() <= max_len);
    CHECK(seq.token_ids.front() == kCls);
    CHECK(seq.token_ids.back() == kSep);
    const auto left = tokenize(m.context_left, v);
    const auto right = tokenize(m.context_right, v);
    CHECK(seq.size() == std::min(max_len, 4 + mention_len + left.size() + right.size()));
    // The mention span is always kept whole between its markers.
    std::size_t start = 0;
    while (seq.token_ids[start] != kMentionStart) ++start;
    CHECK(seq.token_ids[start + mention_len + 1] == kMentionEnd);
    const std::vector<std::int32_t> span(seq.token_ids.begin() + start + 1,
                                         seq.token_ids.begin() + start + 1 + mention_len);
    CHECK(span == tokenize(m.mention, v));
    // Left context keeps its tail, right context its head.
    const std::size_t kept_left = start - 1;
    CHECK(std::equal(seq.token_ids.begin() + 1, seq.token_ids.begin() + start, left.end() - kept_left));
    const std::size_t kept_right = seq.size() - 1 - (start + mention_len + 2);
    CHECK(std::equal(right.begin(), right.begin() + kept_right, seq.token_ids.begin() + start + mention_len + 2));
    const std::size_t budget = max_len - 4 - mention_len;
    if (left.size() >= budget / 2 + 1 && right.size() >= budget / 2 + 1) {
      CHECK(kept_left + kept_right == budget);
      CHECK((kept_left == kept_right || kept_left + 1 == kept_right || kept_right + 1 == kept_left));
    }
  }
  MentionRecord wide{"w", "", "alpha beta gamma", "", "E", std::nullopt};
  CHECK(thrown_category([&] { render_mention(wide, v, 6); }) == ErrorCategory::out_of_range);
  MentionRecord empty{"e", "alpha", "", "beta", "E", std::nullopt};
  CHECK(thrown_category([&] { render_mention(empty, v, 16); }) == ErrorCategory::data);
}

TEST_CASE("render_entity: both styles") {
  const auto v = words_vocab();
  const EntityRecord e{"E1", "alpha kinase", {"cell"}, "the protein binds to receptor"};
  CHECK(detokenize(render_entity(e, v, 32, EntityStyle::zeshel), v) ==
        "[CLS] alpha kinase [ENT] the protein binds to receptor [SEP]");
  CHECK(detokenize(render_entity(e, v, 32, EntityStyle::medmentions), v) ==
        "[CLS] alpha kinase [SEP] cell [SEP] the protein binds to receptor [SEP]");
  CHECK(detokenize(render_entity(e, v, 7, EntityStyle::zeshel), v) == "[CLS] alpha kinase [ENT] the protein [SEP]");
  CHECK(detokenize(render_entity(e, v, 5, EntityStyle::zeshel), v) == "[CLS] alpha kinase [ENT] [SEP]");
  CHECK(thrown_category([&] { render_entity(e, v, 4, EntityStyle::zeshel); }) == ErrorCategory::out_of_range);
  CHECK(parse_entity_style("medmentions") == EntityStyle::medmentions);
  CHECK(thrown_category([] { parse_entity_style("wiki"); }) == ErrorCategory::parse);
}

TEST_CASE("dataset files: round trip and validation") {
  DatasetSplit d;
  d.entities = {{"E1", "alpha kinase", {"T1", "T2"}, "desc \"quoted\" \xc3\xa9"}, {"E2", "beta", {}, ""}};
  d.train = {{"t1", "left", "alpha", "right", "E1", std::string("g")}, {"t2", "", "beta", "", "NIL", std::nullopt}};
  d.validation = {{"v1", "", "beta", "", "E2", std::nullopt}};
  d.test = {{"s1", "x", "alpha", "y", "E1", std::nullopt}};
  const auto dir = scratch_dir("dataset");
  save_dataset(dir, d);
  CHECK(load_dataset(DatasetPaths::in_directory(dir)) == d);

  d.test.push_back({"s2", "", "gamma", "", "E404", std::nullopt});
  write_mentions(dir / "test.jsonl", d.test);
  const auto msg = thrown_message([&] { load_dataset(DatasetPaths::in_directory(dir)); });
  CHECK(msg.find("E404") != std::string::npos);
  CHECK(thrown_category([&] { load_dataset(DatasetPaths::in_directory(dir)); }) == ErrorCategory::data);

  { std::ofstream out(dir / "empty.jsonl"); }
  CHECK(read_mentions(dir / "empty.jsonl").empty());
  {
    std::ofstream out(dir / "broken.jsonl");
    out << "{\"mention_id\": \"m\"\n";
  }
  CHECK(thrown_category([&] { read_mentions(dir / "broken.jsonl"); }) == ErrorCategory::parse);
  {
    std::ofstream out(dir / "extra.jsonl");
    out << R"({"entity_id":"E","title":"t","types":[],"description":"","color":"red"})" << "\n";
  }
  CHECK(thrown_category([&] { read_entities(dir / "extra.jsonl"); }) == ErrorCategory::parse);

  DatasetSplit dup;
  dup.entities = {{"E1", "a", {}, ""}, {"E1", "b", {}, ""}};
  CHECK(thrown_category([&] { dup.validate(); }) == ErrorCategory::data);
  fs::remove_all(dir);
}

TEST_CASE("dataset_stats") {
  DatasetSplit d;
  d.entities = {{"A", "a", {}, ""}, {"B", "b", {}, ""}, {"C", "c", {}, ""}};
  d.train = {{"1", "", "a", "", "A", {}}, {"2", "", "a", "", "A", {}}};
  d.test = {{"3", "", "a", "", "A", {}}, {"4", "", "b", "", "B", {}}, {"5", "", "x", "", "NIL", {}}};
  const auto s = dataset_stats(d);
  CHECK(s.entities == 3);
  CHECK(s.train.distinct_gold == 1);
  CHECK(s.test.mentions == 3);
  CHECK(s.test.nil_mentions == 1);
  CHECK(s.test.distinct_gold == 2);
  CHECK(s.test.percent_entities_seen == 50.0);
}

TEST_CASE("generate_synthetic: determinism and shape") {
  const auto c = small_synthetic();
  const auto a = generate_synthetic(c);
  CHECK(a == generate_synthetic(c));
  CHECK(a.entities.size() == 40);
  CHECK(a.train.size() == 100);
  CHECK(a.validation.size() == 50);
  CHECK(a.test.size() == 50);
  CHECK(kb_types(a).size() == 4);
  auto other = c;
  other.seed = c.seed + 1;
  CHECK_FALSE(generate_synthetic(other) == a);

  auto bad = c;
  bad.alias_noise = 1.5;
  CHECK(thrown_category([&] { generate_synthetic(bad); }) == ErrorCategory::config);
}

TEST_CASE("generate_synthetic: zero-shot fraction") {
  auto c = small_synthetic();
  c.zero_shot_fraction = 1.0;
  const auto d = generate_synthetic(c);
  std::set<std::string> train_gold;
  for (const auto& m : d.train) train_gold.insert(m.label);
  for (const auto& m : d.test) CHECK_FALSE(train_gold.contains(m.label));
  CHECK(dataset_stats(d).test.percent_entities_seen == 0.0);

  c.zero_shot_fraction = 0.0;
  const auto seen = generate_synthetic(c);
  std::set<std::string> seen_train;
  for (const auto& m : seen.train) seen_train.insert(m.label);
  // Every eval mention draws from the training pool, which is the whole KB here.
  CHECK(seen_train.size() <= seen.entities.size());
}

TEST_CASE("generate_synthetic: without alias noise a mention is its title") {
  auto c = small_synthetic();
  c.alias_noise = 0.0;
  const auto d = generate_synthetic(c);
  const auto pos = d.entity_positions();
  for (const auto* split : {&d.train, &d.validation, &d.test}) {
    for (const auto& m : *split) CHECK(m.mention == d.entities[pos.at(m.label)].title);
  }
}

TEST_CASE("make_nil_split") {
  const auto d = generate_synthetic(small_synthetic());
  const auto types = kb_types(d);
  const std::vector<std::string> hold{types[0]};
  const auto n = make_nil_split(d, hold);
  for (const auto& e : n.entities) CHECK(e.types[0] != types[0]);
  CHECK(n.entities.size() == 30);
  const auto pos = d.entity_positions();
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const bool held = d.entities[pos.at(d.test[i].label)].types[0] == types[0];
    CHECK(n.test[i].is_nil() == held);
    if (!held) CHECK(n.test[i].label == d.test[i].label);
  }
  CHECK(make_nil_split(d, {}) == d);
  const std::vector<std::string> unknown{"Nope"};
  CHECK(thrown_category([&] { make_nil_split(d, unknown); }) == ErrorCategory::invalid_argument);
  CHECK(thrown_category([&] { make_nil_split(d, types); }) == ErrorCategory::invalid_argument);
}
