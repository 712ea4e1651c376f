#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "proxyel/checkpoint.hpp"
#include "proxyel/config.hpp"
#include "proxyel/datakit.hpp"
#include "proxyel/errors.hpp"
#include "proxyel/evalkit.hpp"
#include "proxyel/trainer.hpp"

namespace fs = std::filesystem;
using namespace proxyel;

namespace {

struct Common {
  std::string config;
};

const std::vector<MentionRecord>& pick_split(const DatasetSplit& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "validation" || name == "val") return d.validation;
  if (name == "test") return d.test;
  fail(ErrorCategory::invalid_argument, "unknown split '" + name + "' (expected train, validation or test)");
}

std::vector<double> top1_scores(const std::vector<const RankedPrediction*>& aligned) {
  std::vector<double> out;
  out.reserve(aligned.size());
  for (const auto* p : aligned) out.push_back(p->top1_score);
  return out;
}

std::vector<bool> nil_flags(const std::vector<MentionRecord>& gold) {
  std::vector<bool> out;
  out.reserve(gold.size());
  for (const auto& m : gold) out.push_back(m.is_nil());
  return out;
}

std::vector<RankedPrediction> aligned_copy(const std::vector<RankedPrediction>& preds,
                                           const std::vector<MentionRecord>& gold) {
  std::vector<RankedPrediction> out;
  for (const auto* p : align_predictions(preds, gold)) out.push_back(*p);
  return out;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_epoch_metrics(const fs::path& path, const std::vector<EpochMetrics>& epochs) {
  ensure_parent(path);
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCategory::io, "cannot open " + path.string() + " for writing");
  out << "epoch\tsteps\tmean_loss\n";
  char buf[64];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%.17g", e.mean_loss);
    out << e.epoch << '\t' << e.steps << '\t' << buf << '\n';
  }
  require(static_cast<bool>(out), ErrorCategory::io, "write failed: " + path.string());
}

void cmd_gen_synth(const Common& c, const std::string& out_dir, const std::string& vocab_out) {
  const auto cfg = load_config(c.config);
  auto d = generate_synthetic(cfg.synthetic);
  const auto holdout = resolve_holdout_types(cfg.nil, d);
  if (!holdout.empty()) d = make_nil_split(d, holdout);
  save_dataset(out_dir, d);
  const auto vocab = Vocabulary::build(d.all_texts());
  ensure_parent(vocab_out);
  vocab.save(vocab_out);
  const auto stats = dataset_stats(d);
  std::cout << "entities=" << stats.entities << " train=" << stats.train.mentions
            << " validation=" << stats.validation.mentions << " test=" << stats.test.mentions
            << " test_seen_pct=" << stats.test.percent_entities_seen << " vocab=" << vocab.size() << '\n';
}

void cmd_train(const Common& c, const std::string& data_dir, const std::string& vocab_path,
               const std::string& checkpoint_out, const std::string& trace_out, const std::string& epoch_dir,
               const std::string& metrics_out) {
  const auto cfg = load_config(c.config);
  const auto d = load_dataset(DatasetPaths::in_directory(data_dir));
  const auto vocab = Vocabulary::load(vocab_path);
  EpochCallback on_epoch;
  if (!epoch_dir.empty()) {
    fs::create_directories(epoch_dir);
    on_epoch = [&](std::size_t epoch, const BiEncoder& model) {
      save_checkpoint(fs::path(epoch_dir) / ("epoch-" + std::to_string(epoch) + ".ckpt"), model);
    };
  }
  const auto result = train(d, vocab, cfg.train, on_epoch);
  ensure_parent(checkpoint_out);
  save_checkpoint(checkpoint_out, result.model);
  ensure_parent(trace_out);
  write_trace(trace_out, result.trace);
  if (!metrics_out.empty()) write_epoch_metrics(metrics_out, result.epochs);
  for (const auto& e : result.epochs) {
    std::cout << "epoch=" << e.epoch << " steps=" << e.steps << " mean_loss=" << e.mean_loss << '\n';
  }
}

void cmd_rank(const Common& c, const std::string& data_dir, const std::string& vocab_path,
              const std::string& checkpoint, const std::string& split, const std::string& out) {
  const auto cfg = load_config(c.config);
  const auto d = load_dataset(DatasetPaths::in_directory(data_dir));
  const auto vocab = Vocabulary::load(vocab_path);
  const auto model = load_checkpoint(checkpoint);
  require(model.mention_tower.dims().vocab_size == vocab.size(), ErrorCategory::dimension_mismatch,
          "checkpoint vocabulary size " + std::to_string(model.mention_tower.dims().vocab_size) +
              " differs from vocabulary file size " + std::to_string(vocab.size()));
  const auto& mentions = pick_split(d, split);
  const auto preds = rank_all(model, mentions, d.entities, vocab, model.mention_tower.dims().max_seq_len,
                              cfg.train.model.entity_style, cfg.eval.keep_top);
  ensure_parent(out);
  write_predictions(out, preds);
  std::cout << "ranked=" << preds.size() << " kb=" << d.entities.size() << '\n';
}

void cmd_eval(const Common& c, const std::string& data_dir, const std::string& predictions, const std::string& split,
              const std::string& report_out) {
  const auto cfg = load_config(c.config);
  const auto d = load_dataset(DatasetPaths::in_directory(data_dir));
  const auto& gold = pick_split(d, split);
  const auto preds = aligned_copy(read_predictions(predictions), gold);
  // Without a threshold nothing is predicted NIL.
  const auto report =
      evaluate_with_nil(preds, gold, -std::numeric_limits<double>::infinity(), cfg.eval.ks);
  ensure_parent(report_out);
  write_report(report_out, report);
  for (const auto& row : report.recall) {
    std::cout << "recall@" << row.k << "=" << recall_at_k(preds, gold, row.k, cfg.eval.averaging) << '\n';
  }
}

void cmd_nil_tune(const Common& c, const std::string& data_dir, const std::string& predictions,
                  const std::string& split, const std::string& threshold_out) {
  (void)load_config(c.config);
  const auto d = load_dataset(DatasetPaths::in_directory(data_dir));
  const auto& gold = pick_split(d, split);
  const auto preds = read_predictions(predictions);
  const auto aligned = align_predictions(preds, gold);
  const auto t = tune_nil_threshold(top1_scores(aligned), nil_flags(gold), split);
  ensure_parent(threshold_out);
  write_threshold(threshold_out, t);
  std::cout << "tau=" << t.tau << " f1=" << t.f1_at_tau << '\n';
}

void cmd_nil_eval(const Common& c, const std::string& data_dir, const std::string& predictions,
                  const std::string& split, const std::string& threshold, const std::string& report_out,
                  const std::string& pr_out) {
  const auto cfg = load_config(c.config);
  const auto d = load_dataset(DatasetPaths::in_directory(data_dir));
  const auto& gold = pick_split(d, split);
  const auto preds = aligned_copy(read_predictions(predictions), gold);
  const auto t = read_threshold(threshold);
  const auto report = evaluate_with_nil(preds, gold, t.tau, cfg.eval.ks);
  ensure_parent(report_out);
  write_report(report_out, report);
  std::vector<double> scores;
  for (const auto& p : preds) scores.push_back(p.top1_score);
  const auto flags = nil_flags(gold);
  bool has_nil = false, has_kb = false;
  for (bool f : flags) (f ? has_nil : has_kb) = true;
  require(has_nil && has_kb, ErrorCategory::data,
          "nil-eval: split '" + split + "' needs both NIL and in-KB mentions for a PR curve");
  const auto curve = pr_curve_nil(scores, flags);
  ensure_parent(pr_out);
  write_pr_curve(pr_out, curve);
  std::cout << "au_pr=" << report.au_pr << " nil_f1=" << report.nil_f1 << " tau=" << report.tau << '\n';
}

void cmd_trace_export(const Common& c, const std::string& trace_in, const std::string& out) {
  const auto cfg = load_config(c.config);
  auto trace = read_trace(trace_in);
  trace.smoothing = cfg.train.trace_smoothing;
  trace.smoothed_norms = ema_smooth(trace.raw_norms, trace.smoothing);
  ensure_parent(out);
  write_trace(out, trace);
  double mean = 0.0;
  for (double x : trace.raw_norms) mean += x;
  if (!trace.raw_norms.empty()) mean /= static_cast<double>(trace.raw_norms.size());
  std::cout << "steps=" << trace.size() << " mean_raw_grad_norm=" << mean
            << " smoothed_variance=" << sample_variance(trace.smoothed_norms) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proxyel: bi-encoder entity linking harness"};
  app.require_subcommand(1);
  Common common;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "JSON config file")->required()->check(CLI::ExistingFile);
  };

  std::string out_dir, vocab, data_dir, checkpoint, trace, epoch_dir, metrics, split = "test", predictions, out,
      threshold, report, pr_curve;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset and its vocabulary");
  add_config(gen);
  gen->add_option("--out-dir", out_dir, "Dataset directory to write")->required();
  gen->add_option("--vocab-out", vocab, "Vocabulary file to write")->required();

  auto* tr = app.add_subcommand("train", "Train a bi-encoder");
  add_config(tr);
  tr->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--vocab", vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  tr->add_option("--checkpoint-out", checkpoint, "Final checkpoint")->required();
  tr->add_option("--trace-out", trace, "Gradient-norm trace (TSV)")->required();
  tr->add_option("--epoch-dir", epoch_dir, "Directory for per-epoch checkpoints");
  tr->add_option("--metrics-out", metrics, "Per-epoch metrics (TSV)");

  auto* rk = app.add_subcommand("rank", "Rank the knowledge base for every mention of a split");
  add_config(rk);
  rk->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  rk->add_option("--vocab", vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  rk->add_option("--checkpoint", checkpoint, "Checkpoint to load")->required()->check(CLI::ExistingFile);
  rk->add_option("--split", split, "train, validation or test");
  rk->add_option("--out", out, "Predictions file (TSV)")->required();

  auto* ev = app.add_subcommand("eval", "Recall@k of a predictions file");
  add_config(ev);
  ev->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--predictions", predictions, "Predictions file")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", split, "train, validation or test");
  ev->add_option("--report-out", report, "Metrics file (TSV)")->required();

  auto* nt = app.add_subcommand("nil-tune", "Pick the NIL threshold maximising F1");
  add_config(nt);
  nt->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  nt->add_option("--predictions", predictions, "Predictions file")->required()->check(CLI::ExistingFile);
  nt->add_option("--split", split, "split the predictions belong to")->default_val("validation");
  nt->add_option("--threshold-out", threshold, "Threshold file")->required();

  auto* ne = app.add_subcommand("nil-eval", "Evaluate with a NIL threshold");
  add_config(ne);
  ne->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ne->add_option("--predictions", predictions, "Predictions file")->required()->check(CLI::ExistingFile);
  ne->add_option("--split", split, "train, validation or test");
  ne->add_option("--threshold", threshold, "Threshold file")->required()->check(CLI::ExistingFile);
  ne->add_option("--report-out", report, "Metrics file (TSV)")->required();
  ne->add_option("--pr-curve-out", pr_curve, "PR-curve points (TSV)")->required();

  auto* te = app.add_subcommand("trace-export", "Re-smooth a trace with the configured factor");
  add_config(te);
  te->add_option("--trace", trace, "Trace file")->required()->check(CLI::ExistingFile);
  te->add_option("--out", out, "Exported trace (TSV)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& ch : msg) if (ch == '\n') ch = ' ';
    std::cerr << "error: category=usage message=" << msg << '\n';
    return 2;
  }

  try {
    if (*gen) cmd_gen_synth(common, out_dir, vocab);
    else if (*tr) cmd_train(common, data_dir, vocab, checkpoint, trace, epoch_dir, metrics);
    else if (*rk) cmd_rank(common, data_dir, vocab, checkpoint, split, out);
    else if (*ev) cmd_eval(common, data_dir, predictions, split, report);
    else if (*nt) cmd_nil_tune(common, data_dir, predictions, split, threshold);
    else if (*ne) cmd_nil_eval(common, data_dir, predictions, split, threshold, report, pr_curve);
    else if (*te) cmd_trace_export(common, trace, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    for (auto& ch : msg) if (ch == '\n') ch = ' ';
    std::cerr << "error: category=" << category_name(e.category()) << " message=" << msg << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: category=io message=" << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: category=internal message=" << e.what() << '\n';
    return 1;
  }
  return 0;
}
