#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "proxyel/checkpoint.hpp"
#include "proxyel/config.hpp"
#include "proxyel/datakit.hpp"
#include "proxyel/encoder.hpp"
#include "proxyel/errors.hpp"
#include "proxyel/evalkit.hpp"
#include "proxyel/numerics.hpp"
#include "proxyel/objectives.hpp"
#include "proxyel/sampling.hpp"
#include "proxyel/trainer.hpp"

namespace py = pybind11;
using namespace proxyel;

namespace {

using Rows = std::vector<std::vector<double>>;

Matrix to_matrix(const Rows& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == cols, ErrorCategory::dimension_mismatch, "ragged matrix rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Rows from_matrix(const Matrix& m) {
  Rows out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

py::tuple grads_tuple(const ScoreGrads& g) { return py::make_tuple(g.positive, g.negatives); }

std::vector<double> top1_scores(const std::vector<RankedPrediction>& preds) {
  std::vector<double> s;
  s.reserve(preds.size());
  for (const auto& p : preds) s.push_back(p.top1_score);
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bi-encoder entity linking with proxy-based losses";

  // Kept alive for the interpreter's lifetime.
  static const py::handle error_type = py::exception<Error>(m, "ProxyelError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("category") = std::string(category_name(e.category()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  // Numerics and objectives --------------------------------------------------
  m.def("similarity", [](const Vector& u, const Vector& v, const std::string& kind) {
    return similarity(u, v, parse_similarity(kind));
  }, py::arg("u"), py::arg("v"), py::arg("kind") = "dot");
  m.def("log_sum_exp", [](const Vector& v) { return log_sum_exp(v); });
  m.def("stable_softmax", [](const Vector& v) { return stable_softmax(v); });

  m.def("ce_loss", [](double pos, const Vector& neg) { return ce_loss({pos, neg}); },
        py::arg("positive"), py::arg("negatives"));
  m.def("ce_grad", [](double pos, const Vector& neg) { return grads_tuple(ce_grad({pos, neg})); },
        py::arg("positive"), py::arg("negatives"));
  m.def("pb_loss", [](double pos, const Vector& neg, double alpha, double delta) {
    return pb_loss({pos, neg}, {alpha, delta});
  }, py::arg("positive"), py::arg("negatives"), py::arg("alpha") = 32.0, py::arg("delta") = 0.0);
  m.def("pb_grad", [](double pos, const Vector& neg, double alpha, double delta) {
    return grads_tuple(pb_grad({pos, neg}, {alpha, delta}));
  }, py::arg("positive"), py::arg("negatives"), py::arg("alpha") = 32.0, py::arg("delta") = 0.0);
  m.def("perturb_negative", [](const Rows& z, const Rows& g, double eps) {
    return from_matrix(perturb_negative(to_matrix(z), to_matrix(g), eps));
  }, py::arg("z"), py::arg("grad"), py::arg("eps"));
  m.def("perturb_positive", [](const Rows& z, const Rows& g, double eps) {
    return from_matrix(perturb_positive(to_matrix(z), to_matrix(g), eps));
  }, py::arg("z"), py::arg("grad"), py::arg("eps"));

  // Data ----------------------------------------------------------------------
  py::class_<MentionRecord>(m, "MentionRecord")
      .def(py::init<>())
      .def_readwrite("mention_id", &MentionRecord::mention_id)
      .def_readwrite("context_left", &MentionRecord::context_left)
      .def_readwrite("mention", &MentionRecord::mention)
      .def_readwrite("context_right", &MentionRecord::context_right)
      .def_readwrite("label", &MentionRecord::label)
      .def_readwrite("group", &MentionRecord::group)
      .def("is_nil", &MentionRecord::is_nil);

  py::class_<EntityRecord>(m, "EntityRecord")
      .def(py::init<>())
      .def_readwrite("entity_id", &EntityRecord::entity_id)
      .def_readwrite("title", &EntityRecord::title)
      .def_readwrite("types", &EntityRecord::types)
      .def_readwrite("description", &EntityRecord::description);

  py::class_<DatasetSplit>(m, "DatasetSplit")
      .def(py::init<>())
      .def_readwrite("train", &DatasetSplit::train)
      .def_readwrite("validation", &DatasetSplit::validation)
      .def_readwrite("test", &DatasetSplit::test)
      .def_readwrite("entities", &DatasetSplit::entities)
      .def("validate", &DatasetSplit::validate)
      .def("all_texts", &DatasetSplit::all_texts);

  py::class_<SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init<>())
      .def_readwrite("n_entities", &SyntheticConfig::n_entities)
      .def_readwrite("n_train_mentions", &SyntheticConfig::n_train_mentions)
      .def_readwrite("n_validation_mentions", &SyntheticConfig::n_validation_mentions)
      .def_readwrite("n_test_mentions", &SyntheticConfig::n_test_mentions)
      .def_readwrite("n_types", &SyntheticConfig::n_types)
      .def_readwrite("alias_noise", &SyntheticConfig::alias_noise)
      .def_readwrite("zero_shot_fraction", &SyntheticConfig::zero_shot_fraction)
      .def_readwrite("seed", &SyntheticConfig::seed)
      .def_readwrite("name_tokens_per_type", &SyntheticConfig::name_tokens_per_type)
      .def_readwrite("context_tokens_per_type", &SyntheticConfig::context_tokens_per_type)
      .def_readwrite("shared_tokens", &SyntheticConfig::shared_tokens)
      .def_readwrite("description_tokens", &SyntheticConfig::description_tokens)
      .def_readwrite("context_tokens", &SyntheticConfig::context_tokens);

  m.def("generate_synthetic", &generate_synthetic, py::arg("config"));
  m.def("make_nil_split", [](const DatasetSplit& d, const std::vector<std::string>& types) {
    return make_nil_split(d, types);
  }, py::arg("data"), py::arg("holdout_types"));
  m.def("kb_types", &kb_types);
  m.def("load_dataset", [](const std::filesystem::path& dir) {
    return load_dataset(DatasetPaths::in_directory(dir));
  }, py::arg("directory"));
  m.def("save_dataset", &save_dataset, py::arg("directory"), py::arg("data"));

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("build", [](const std::vector<std::string>& texts) { return Vocabulary::build(texts); })
      .def_static("load", &Vocabulary::load)
      .def("save", &Vocabulary::save)
      .def("id", [](const Vocabulary& v, const std::string& t) { return v.id(t); })
      .def("token", &Vocabulary::token)
      .def("__len__", &Vocabulary::size);

  m.def("tokenize", [](const std::string& text, const Vocabulary& v) { return tokenize(text, v); });

  // Model and training --------------------------------------------------------
  py::class_<BiEncoder>(m, "BiEncoder")
      .def_property_readonly("similarity", [](const BiEncoder& b) { return std::string(similarity_name(b.similarity)); })
      .def("__eq__", [](const BiEncoder& a, const BiEncoder& b) { return a == b; });
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("model"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("synthetic", &ExperimentConfig::synthetic)
      .def_readwrite("train", &ExperimentConfig::train);
  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("json_text"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("warmup_proportion", &TrainConfig::warmup_proportion)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("fgsm_enabled", &TrainConfig::fgsm_enabled)
      .def_property("loss", [](const TrainConfig& c) { return std::string(loss_name(c.loss)); },
                    [](TrainConfig& c, const std::string& s) { c.loss = parse_loss(s); })
      .def_property("sampling", [](const TrainConfig& c) { return std::string(sampling_name(c.sampling.kind)); },
                    [](TrainConfig& c, const std::string& s) { c.sampling.kind = parse_sampling(s); })
      .def_property("n_negatives", [](const TrainConfig& c) { return c.sampling.n_negatives; },
                    [](TrainConfig& c, std::size_t n) { c.sampling.n_negatives = n; })
      .def_property("dim", [](const TrainConfig& c) { return c.model.dim; },
                    [](TrainConfig& c, std::size_t d) { c.model.dim = d; })
      .def_property("out_dim", [](const TrainConfig& c) { return c.model.out_dim; },
                    [](TrainConfig& c, std::size_t d) { c.model.out_dim = d; })
      .def_property("max_seq_len", [](const TrainConfig& c) { return c.model.max_seq_len; },
                    [](TrainConfig& c, std::size_t d) { c.model.max_seq_len = d; })
      .def_property("alpha", [](const TrainConfig& c) { return c.pb.alpha; },
                    [](TrainConfig& c, double a) { c.pb.alpha = a; })
      .def_property("delta", [](const TrainConfig& c) { return c.pb.delta; },
                    [](TrainConfig& c, double d) { c.pb.delta = d; })
      .def_property("epsilon", [](const TrainConfig& c) { return c.fgsm.epsilon; },
                    [](TrainConfig& c, double e) { c.fgsm.epsilon = e; })
      .def_property("lam", [](const TrainConfig& c) { return c.fgsm.lambda; },
                    [](TrainConfig& c, double l) { c.fgsm.lambda = l; });

  py::class_<GradNormTrace>(m, "GradNormTrace")
      .def_readonly("steps", &GradNormTrace::steps)
      .def_readonly("learning_rates", &GradNormTrace::learning_rates)
      .def_readonly("raw_norms", &GradNormTrace::raw_norms)
      .def_readonly("smoothed_norms", &GradNormTrace::smoothed_norms)
      .def_readonly("losses", &GradNormTrace::losses);

  py::class_<EpochMetrics>(m, "EpochMetrics")
      .def_readonly("epoch", &EpochMetrics::epoch)
      .def_readonly("steps", &EpochMetrics::steps)
      .def_readonly("mean_loss", &EpochMetrics::mean_loss);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("trace", &TrainResult::trace)
      .def_readonly("epochs", &TrainResult::epochs);

  m.def("train", [](const DatasetSplit& d, const Vocabulary& v, const TrainConfig& c) {
    py::gil_scoped_release release;
    return train(d, v, c);
  }, py::arg("data"), py::arg("vocab"), py::arg("config"));
  m.def("sample_variance", [](const std::vector<double>& s) { return sample_variance(s); });

  // Evaluation ----------------------------------------------------------------
  py::class_<RankedPrediction>(m, "RankedPrediction")
      .def_readonly("mention_id", &RankedPrediction::mention_id)
      .def_readonly("ranked_ids", &RankedPrediction::ranked_ids)
      .def_readonly("top1_score", &RankedPrediction::top1_score);

  m.def("rank_all", [](const BiEncoder& model, const std::vector<MentionRecord>& mentions,
                       const std::vector<EntityRecord>& entities, const Vocabulary& vocab, std::size_t max_len,
                       const std::string& style, std::size_t keep) {
    return rank_all(model, mentions, entities, vocab, max_len, parse_entity_style(style), keep);
  }, py::arg("model"), py::arg("mentions"), py::arg("entities"), py::arg("vocab"),
     py::arg("max_seq_len") = kDefaultMaxSeqLen, py::arg("style") = "zeshel", py::arg("keep") = 64);

  m.def("recall_at_k", [](const std::vector<RankedPrediction>& p, const std::vector<MentionRecord>& g,
                          std::size_t k) { return recall_at_k(p, g, k); },
        py::arg("predictions"), py::arg("gold"), py::arg("k"));

  m.def("tune_nil_threshold", [](const std::vector<double>& scores, const std::vector<bool>& is_nil) {
    const auto t = tune_nil_threshold(scores, is_nil);
    return py::make_tuple(t.tau, t.f1_at_tau);
  }, py::arg("scores"), py::arg("is_nil"));

  m.def("pr_curve_nil", [](const std::vector<double>& scores, const std::vector<bool>& is_nil) {
    const auto c = pr_curve_nil(scores, is_nil);
    py::list points;
    for (const auto& p : c.points) points.append(py::make_tuple(p.threshold, p.precision, p.recall));
    return py::make_tuple(points, c.au_pr);
  }, py::arg("scores"), py::arg("is_nil"));

  m.def("top1_scores", &top1_scores);
}
