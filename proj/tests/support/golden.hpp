#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxyel/datakit.hpp"
#include "proxyel/errors.hpp"

namespace proxyel::testing {

struct GoldenCase {
  std::string name;
  std::string expected;
  std::string actual;
};

inline std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!seq.pad_mask[i]) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(seq.token_ids[i]);
  }
  return out;
}

/// Renders every case of the golden template file with the library and
/// returns expected/actual pairs.
inline std::vector<GoldenCase> render_golden(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open golden fixture " + path);
  const auto doc = nlohmann::json::parse(in);
  const auto vocab = Vocabulary::from_tokens(doc.at("vocabulary").get<std::vector<std::string>>());
  std::vector<GoldenCase> out;
  for (const auto& c : doc.at("mentions")) {
    const auto& r = c.at("record");
    MentionRecord m{r.at("mention_id"), r.at("context_left"), r.at("mention"), r.at("context_right"),
                    r.at("label"), std::nullopt};
    const auto seq = render_mention(m, vocab, c.at("max_len").get<std::size_t>());
    out.push_back({"mention: " + c.at("name").get<std::string>(), c.at("expected"), detokenize(seq, vocab)});
  }
  for (const auto& c : doc.at("entities")) {
    const auto& r = c.at("record");
    EntityRecord e{r.at("entity_id"), r.at("title"), r.at("types").get<std::vector<std::string>>(),
                   r.at("description")};
    const auto style = parse_entity_style(c.at("style"));
    const auto seq = render_entity(e, vocab, c.at("max_len").get<std::size_t>(), style);
    out.push_back({"entity: " + c.at("name").get<std::string>(), c.at("expected"), detokenize(seq, vocab)});
  }
  return out;
}

}  // namespace proxyel::testing
