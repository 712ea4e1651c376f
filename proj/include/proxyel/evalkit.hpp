#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "proxyel/datakit.hpp"
#include "proxyel/encoder.hpp"
#include "proxyel/sampling.hpp"

namespace proxyel {

struct RankedPrediction {
  std::string mention_id;
  std::vector<std::string> ranked_ids;  // descending score, ties by id
  double top1_score = 0.0;

  bool operator==(const RankedPrediction&) const = default;
};

/// Ranks every index entry for each query; keeps the first `keep` ids
/// (0 keeps all).
std::vector<RankedPrediction> rank_with_index(const EntityIndex& index, std::span<const std::string> mention_ids,
                                              std::span<const Vector> mention_reprs, std::size_t keep = 0);

/// Encodes every entity and mention, then ranks the full knowledge base for
/// each mention (exact search).
std::vector<RankedPrediction> rank_all(const BiEncoder& model, std::span<const MentionRecord> mentions,
                                       std::span<const EntityRecord> entities, const Vocabulary& vocab,
                                       std::size_t max_seq_len, EntityStyle style, std::size_t keep = 0);

enum class Averaging { micro, macro };

/// Fraction of in-KB mentions whose gold entity is in the top k. NIL
/// mentions are skipped. Macro mode averages per group first (mentions
/// without a group form one group).
double recall_at_k(std::span<const RankedPrediction> preds, std::span<const MentionRecord> gold, std::size_t k,
                   Averaging averaging = Averaging::micro);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;

  bool operator==(const PrPoint&) const = default;
};

struct PrCurve {
  std::vector<PrPoint> points;  // ascending threshold
  double au_pr = 0.0;
};

/// NIL is the positive class, predicted when top1_score < threshold.
/// Thresholds are the distinct observed scores plus +inf; thresholds that
/// predict nothing are omitted. auPR is the trapezoidal area over recall,
/// anchored at recall 0 with the precision of the lowest-recall point.
PrCurve pr_curve_nil(std::span<const double> top1_scores, const std::vector<bool>& is_nil);

struct NilThreshold {
  double tau = std::numeric_limits<double>::infinity();
  std::string selected_on;
  double f1_at_tau = 0.0;
};

/// tau maximising NIL F1 over the distinct observed scores plus +inf; ties
/// go to the smallest tau.
NilThreshold tune_nil_threshold(std::span<const double> top1_scores, const std::vector<bool>& is_nil,
                                std::string selected_on = "validation");

struct RecallRow {
  std::size_t k = 0;
  double all_classes = 0.0;  // NIL-gated, over every mention
  double in_kb = 0.0;        // plain recall@k over in-KB mentions
  bool operator==(const RecallRow&) const = default;
};

struct EvalReport {
  std::vector<RecallRow> recall;
  double nil_precision = 0.0;
  double nil_recall = 0.0;
  double nil_f1 = 0.0;
  double au_pr = 0.0;
  double tau = 0.0;
  std::size_t mentions = 0;
  std::size_t nil_mentions = 0;
  std::size_t nil_correct = 0;  // NIL mention predicted NIL
  std::size_t nil_wrong = 0;    // NIL mention predicted in-KB
  std::size_t in_kb_rejected = 0;  // in-KB mention predicted NIL

  bool operator==(const EvalReport&) const = default;
};

/// A NIL mention is correct iff top1_score < tau; an in-KB mention is
/// correct at k iff top1_score >= tau and its gold id is in the top k.
/// auPR is filled when both classes are present.
EvalReport evaluate_with_nil(std::span<const RankedPrediction> preds, std::span<const MentionRecord> gold,
                             double tau, std::span<const std::size_t> ks);

/// Aligns predictions to `gold` by mention id; throws if one is missing.
std::vector<const RankedPrediction*> align_predictions(std::span<const RankedPrediction> preds,
                                                       std::span<const MentionRecord> gold);

// Files. All are tab-separated with a header row; reals use 17 significant digits.
void write_predictions(const std::filesystem::path& path, std::span<const RankedPrediction> preds);
std::vector<RankedPrediction> read_predictions(const std::filesystem::path& path);
void write_report(const std::filesystem::path& path, const EvalReport& report);
void write_pr_curve(const std::filesystem::path& path, const PrCurve& curve);
void write_threshold(const std::filesystem::path& path, const NilThreshold& t);
NilThreshold read_threshold(const std::filesystem::path& path);

}  // namespace proxyel
