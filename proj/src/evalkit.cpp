#include "proxyel/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "proxyel/errors.hpp"

namespace proxyel {

namespace {

std::string format_real(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

double parse_real(std::string_view s, const std::string& where) {
  double x = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  require(ec == std::errc() && end == s.data() + s.size(), ErrorCategory::parse,
          where + ": cannot parse number '" + std::string(s) + "'");
  return x;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

void check_scores(std::span<const double> scores, const std::vector<bool>& is_nil, const char* op) {
  require(scores.size() == is_nil.size(), ErrorCategory::dimension_mismatch,
          std::string(op) + ": score and label counts differ");
  require(all_finite(scores), ErrorCategory::non_finite, std::string(op) + ": non-finite score");
}

/// Candidate thresholds in ascending order with cumulative counts of
/// predictions (score < threshold) and NIL hits among them.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> hits;
  std::size_t positives = 0;
};

Sweep sweep(std::span<const double> scores, const std::vector<bool>& is_nil) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  Sweep s;
  s.positives = static_cast<std::size_t>(std::count(is_nil.begin(), is_nil.end(), true));
  std::size_t predicted = 0;
  std::size_t hits = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double value = scores[order[i]];
    // Everything strictly below `value` is predicted NIL at threshold `value`.
    s.thresholds.push_back(value);
    s.predicted.push_back(predicted);
    s.hits.push_back(hits);
    while (i < order.size() && scores[order[i]] == value) {
      ++predicted;
      if (is_nil[order[i]]) ++hits;
      ++i;
    }
  }
  s.thresholds.push_back(std::numeric_limits<double>::infinity());
  s.predicted.push_back(predicted);
  s.hits.push_back(hits);
  return s;
}

double f1_from_counts(std::size_t hits, std::size_t predicted, std::size_t positives) {
  if (hits == 0) return 0.0;
  return 2.0 * static_cast<double>(hits) / static_cast<double>(predicted + positives);
}

bool in_top_k(const RankedPrediction& p, const std::string& gold, std::size_t k) {
  const std::size_t n = std::min(k, p.ranked_ids.size());
  return std::find(p.ranked_ids.begin(), p.ranked_ids.begin() + static_cast<std::ptrdiff_t>(n), gold) !=
         p.ranked_ids.begin() + static_cast<std::ptrdiff_t>(n);
}

}  // namespace

std::vector<RankedPrediction> rank_with_index(const EntityIndex& index, std::span<const std::string> mention_ids,
                                              std::span<const Vector> mention_reprs, std::size_t keep) {
  require(mention_ids.size() == mention_reprs.size(), ErrorCategory::dimension_mismatch,
          "rank: id count differs from representation count");
  require(index.size() > 0, ErrorCategory::invalid_argument, "rank: empty knowledge base");
  const std::size_t n_keep = keep == 0 ? index.size() : std::min(keep, index.size());
  std::vector<RankedPrediction> out;
  out.reserve(mention_ids.size());
  std::vector<std::size_t> rows(index.size());
  for (std::size_t q = 0; q < mention_ids.size(); ++q) {
    const Vector s = index_scores(index, mention_reprs[q]);
    std::iota(rows.begin(), rows.end(), 0);
    std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_keep), rows.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (s[a] != s[b]) return s[a] > s[b];
                        return index.entity_ids[a] < index.entity_ids[b];
                      });
    RankedPrediction p;
    p.mention_id = mention_ids[q];
    p.top1_score = s[rows[0]];
    p.ranked_ids.reserve(n_keep);
    for (std::size_t r = 0; r < n_keep; ++r) p.ranked_ids.push_back(index.entity_ids[rows[r]]);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<RankedPrediction> rank_all(const BiEncoder& model, std::span<const MentionRecord> mentions,
                                       std::span<const EntityRecord> entities, const Vocabulary& vocab,
                                       std::size_t max_seq_len, EntityStyle style, std::size_t keep) {
  std::vector<std::string> ids;
  ids.reserve(entities.size());
  for (const auto& e : entities) ids.push_back(e.entity_id);
  const EntityIndex index = build_index(ids, render_entities(entities, vocab, max_seq_len, style), model);
  std::vector<std::string> mention_ids;
  std::vector<Vector> reprs;
  mention_ids.reserve(mentions.size());
  reprs.reserve(mentions.size());
  for (const auto& m : mentions) {
    mention_ids.push_back(m.mention_id);
    reprs.push_back(forward_tower(render_mention(m, vocab, max_seq_len), model.mention_tower).output);
  }
  return rank_with_index(index, mention_ids, reprs, keep);
}

std::vector<const RankedPrediction*> align_predictions(std::span<const RankedPrediction> preds,
                                                       std::span<const MentionRecord> gold) {
  std::unordered_map<std::string, const RankedPrediction*> by_id;
  by_id.reserve(preds.size());
  for (const auto& p : preds) by_id.emplace(p.mention_id, &p);
  std::vector<const RankedPrediction*> out;
  out.reserve(gold.size());
  for (const auto& m : gold) {
    auto it = by_id.find(m.mention_id);
    require(it != by_id.end(), ErrorCategory::data, "no prediction for mention '" + m.mention_id + "'");
    out.push_back(it->second);
  }
  return out;
}

double recall_at_k(std::span<const RankedPrediction> preds, std::span<const MentionRecord> gold, std::size_t k,
                   Averaging averaging) {
  require(k >= 1, ErrorCategory::invalid_argument, "recall_at_k: k must be >= 1");
  const auto aligned = align_predictions(preds, gold);
  std::map<std::string, std::pair<std::size_t, std::size_t>> groups;  // hits, total
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].is_nil()) continue;
    const bool hit = in_top_k(*aligned[i], gold[i].label, k);
    auto& g = groups[gold[i].group.value_or("")];
    g.first += hit ? 1 : 0;
    ++g.second;
    hits += hit ? 1 : 0;
    ++total;
  }
  require(total > 0, ErrorCategory::invalid_argument, "recall_at_k: no in-KB mentions");
  if (averaging == Averaging::micro) return static_cast<double>(hits) / static_cast<double>(total);
  double acc = 0.0;
  for (const auto& [_, g] : groups) acc += static_cast<double>(g.first) / static_cast<double>(g.second);
  return acc / static_cast<double>(groups.size());
}

PrCurve pr_curve_nil(std::span<const double> top1_scores, const std::vector<bool>& is_nil) {
  check_scores(top1_scores, is_nil, "pr_curve_nil");
  const Sweep s = sweep(top1_scores, is_nil);
  require(s.positives > 0 && s.positives < top1_scores.size(), ErrorCategory::invalid_argument,
          "pr_curve_nil: need at least one NIL and one in-KB example");
  PrCurve curve;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    if (s.predicted[i] == 0) continue;
    curve.points.push_back({s.thresholds[i], static_cast<double>(s.hits[i]) / static_cast<double>(s.predicted[i]),
                            static_cast<double>(s.hits[i]) / static_cast<double>(s.positives)});
  }
  double prev_recall = 0.0;
  double prev_precision = curve.points.front().precision;
  for (const auto& p : curve.points) {
    curve.au_pr += (p.recall - prev_recall) * (p.precision + prev_precision) / 2.0;
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  return curve;
}

NilThreshold tune_nil_threshold(std::span<const double> top1_scores, const std::vector<bool>& is_nil,
                                std::string selected_on) {
  check_scores(top1_scores, is_nil, "tune_nil_threshold");
  const Sweep s = sweep(top1_scores, is_nil);
  require(s.positives > 0, ErrorCategory::invalid_argument, "tune_nil_threshold: no NIL examples");
  NilThreshold best;
  best.selected_on = std::move(selected_on);
  best.f1_at_tau = -1.0;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    const double f1 = f1_from_counts(s.hits[i], s.predicted[i], s.positives);
    if (f1 > best.f1_at_tau) {
      best.f1_at_tau = f1;
      best.tau = s.thresholds[i];
    }
  }
  return best;
}

EvalReport evaluate_with_nil(std::span<const RankedPrediction> preds, std::span<const MentionRecord> gold,
                             double tau, std::span<const std::size_t> ks) {
  require(!std::isnan(tau), ErrorCategory::invalid_argument, "evaluate_with_nil: tau is NaN");
  const auto aligned = align_predictions(preds, gold);
  EvalReport r;
  r.tau = tau;
  r.mentions = gold.size();
  std::size_t predicted_nil = 0;
  std::vector<double> scores;
  std::vector<bool> labels;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool says_nil = aligned[i]->top1_score < tau;
    predicted_nil += says_nil ? 1 : 0;
    scores.push_back(aligned[i]->top1_score);
    labels.push_back(gold[i].is_nil());
    if (gold[i].is_nil()) {
      ++r.nil_mentions;
      (says_nil ? r.nil_correct : r.nil_wrong) += 1;
    } else if (says_nil) {
      ++r.in_kb_rejected;
    }
  }
  const std::size_t in_kb = r.mentions - r.nil_mentions;
  for (std::size_t k : ks) {
    require(k >= 1, ErrorCategory::invalid_argument, "evaluate_with_nil: k must be >= 1");
    std::size_t all_hits = r.nil_correct;
    std::size_t plain_hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i].is_nil()) continue;
      const bool hit = in_top_k(*aligned[i], gold[i].label, k);
      plain_hits += hit ? 1 : 0;
      all_hits += (hit && aligned[i]->top1_score >= tau) ? 1 : 0;
    }
    RecallRow row;
    row.k = k;
    row.all_classes = r.mentions == 0 ? 0.0 : static_cast<double>(all_hits) / static_cast<double>(r.mentions);
    row.in_kb = in_kb == 0 ? 0.0 : static_cast<double>(plain_hits) / static_cast<double>(in_kb);
    r.recall.push_back(row);
  }
  r.nil_precision = predicted_nil == 0 ? 0.0 : static_cast<double>(r.nil_correct) / static_cast<double>(predicted_nil);
  r.nil_recall = r.nil_mentions == 0 ? 0.0 : static_cast<double>(r.nil_correct) / static_cast<double>(r.nil_mentions);
  r.nil_f1 = f1_from_counts(r.nil_correct, predicted_nil, r.nil_mentions);
  if (r.nil_mentions > 0 && in_kb > 0) {
    r.au_pr = pr_curve_nil(scores, labels).au_pr;
  }
  return r;
}

// ---------------------------------------------------------------------------

void write_predictions(const std::filesystem::path& path, std::span<const RankedPrediction> preds) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCategory::io, "cannot write predictions '" + path.string() + "'");
  out << "mention_id\ttop1_score\tranked_ids\n";
  for (const auto& p : preds) {
    out << p.mention_id << '\t' << format_real(p.top1_score) << '\t';
    for (std::size_t i = 0; i < p.ranked_ids.size(); ++i) {
      const auto& id = p.ranked_ids[i];
      require(id.find_first_of(",\t\n") == std::string::npos, ErrorCategory::data,
              "entity id '" + id + "' contains a delimiter");
      out << (i ? "," : "") << id;
    }
    out << '\n';
  }
  require(out.good(), ErrorCategory::io, "write to '" + path.string() + "' failed");
}

std::vector<RankedPrediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open predictions '" + path.string() + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "mention_id\ttop1_score\tranked_ids",
          ErrorCategory::parse, "predictions '" + path.string() + "': unexpected header");
  std::vector<RankedPrediction> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto cols = split(line, '\t');
    require(cols.size() == 3, ErrorCategory::parse, where + ": expected 3 columns");
    RankedPrediction p;
    p.mention_id = cols[0];
    p.top1_score = parse_real(cols[1], where);
    if (!cols[2].empty()) p.ranked_ids = split(cols[2], ',');
    out.push_back(std::move(p));
  }
  return out;
}

void write_report(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCategory::io, "cannot write report '" + path.string() + "'");
  out << "metric\tvalue\n";
  out << "mentions\t" << r.mentions << '\n';
  out << "nil_mentions\t" << r.nil_mentions << '\n';
  out << "tau\t" << format_real(r.tau) << '\n';
  out << "nil_precision\t" << format_real(r.nil_precision) << '\n';
  out << "nil_recall\t" << format_real(r.nil_recall) << '\n';
  out << "nil_f1\t" << format_real(r.nil_f1) << '\n';
  out << "nil_aupr\t" << format_real(r.au_pr) << '\n';
  out << "nil_correct\t" << r.nil_correct << '\n';
  out << "nil_wrong\t" << r.nil_wrong << '\n';
  out << "in_kb_rejected\t" << r.in_kb_rejected << '\n';
  for (const auto& row : r.recall) {
    out << "recall@" << row.k << "_all_classes\t" << format_real(row.all_classes) << '\n';
    out << "recall@" << row.k << "_in_kb\t" << format_real(row.in_kb) << '\n';
  }
  require(out.good(), ErrorCategory::io, "write to '" + path.string() + "' failed");
}

void write_pr_curve(const std::filesystem::path& path, const PrCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCategory::io, "cannot write curve '" + path.string() + "'");
  out << "threshold\tprecision\trecall\n";
  for (const auto& p : curve.points) {
    out << format_real(p.threshold) << '\t' << format_real(p.precision) << '\t' << format_real(p.recall) << '\n';
  }
  require(out.good(), ErrorCategory::io, "write to '" + path.string() + "' failed");
}

void write_threshold(const std::filesystem::path& path, const NilThreshold& t) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCategory::io, "cannot write threshold '" + path.string() + "'");
  out << "tau\t" << format_real(t.tau) << "\nselected_on\t" << t.selected_on << "\nf1_at_tau\t"
      << format_real(t.f1_at_tau) << '\n';
  require(out.good(), ErrorCategory::io, "write to '" + path.string() + "' failed");
}

NilThreshold read_threshold(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open threshold '" + path.string() + "'");
  NilThreshold t;
  std::string line;
  bool have_tau = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    require(cols.size() == 2, ErrorCategory::parse, path.string() + ": malformed line '" + line + "'");
    if (cols[0] == "tau") {
      t.tau = parse_real(cols[1], path.string());
      have_tau = true;
    } else if (cols[0] == "selected_on") {
      t.selected_on = cols[1];
    } else if (cols[0] == "f1_at_tau") {
      t.f1_at_tau = parse_real(cols[1], path.string());
    } else {
      fail(ErrorCategory::parse, path.string() + ": unknown key '" + cols[0] + "'");
    }
  }
  require(have_tau, ErrorCategory::parse, path.string() + ": missing tau");
  return t;
}

}  // namespace proxyel
