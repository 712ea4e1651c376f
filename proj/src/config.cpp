#include "proxyel/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "proxyel/errors.hpp"

namespace proxyel {

namespace {

using json = nlohmann::json;

/// Typed access to one JSON object; every key must be read by the time
/// finish() runs.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorCategory::config, path_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    auto it = j_.find(key);
    seen_.insert(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      fail(ErrorCategory::config, path_ + "." + key + ": wrong value type");
    }
  }

  void read_size(const char* key, std::size_t& out) {
    auto it = j_.find(key);
    seen_.insert(key);
    if (it == j_.end()) return;
    require(it->is_number_unsigned(), ErrorCategory::config, path_ + "." + key + ": expected a non-negative integer");
    out = it->get<std::size_t>();
  }

  template <typename Fn>
  void section(const char* key, Fn&& fn) {
    auto it = j_.find(key);
    seen_.insert(key);
    if (it == j_.end()) return;
    Section sub(*it, path_ + "." + key);
    fn(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      require(seen_.contains(key), ErrorCategory::config, path_ + ": unknown key '" + key + "'");
    }
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& source) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCategory::config, source + ": " + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, source);

  top.section("synthetic", [&](Section& s) {
    auto& c = cfg.synthetic;
    s.read_size("n_entities", c.n_entities);
    s.read_size("n_train_mentions", c.n_train_mentions);
    s.read_size("n_validation_mentions", c.n_validation_mentions);
    s.read_size("n_test_mentions", c.n_test_mentions);
    s.read_size("n_types", c.n_types);
    s.read("alias_noise", c.alias_noise);
    s.read("zero_shot_fraction", c.zero_shot_fraction);
    s.read("seed", c.seed);
    s.read_size("name_tokens_per_type", c.name_tokens_per_type);
    s.read_size("context_tokens_per_type", c.context_tokens_per_type);
    s.read_size("shared_tokens", c.shared_tokens);
    s.read_size("title_min_tokens", c.title_min_tokens);
    s.read_size("title_max_tokens", c.title_max_tokens);
    s.read_size("description_tokens", c.description_tokens);
    s.read_size("context_tokens", c.context_tokens);
    s.read("context_shared_rate", c.context_shared_rate);
  });

  top.section("nil", [&](Section& s) {
    s.read("holdout_types", cfg.nil.holdout_types);
    s.read("holdout_fraction", cfg.nil.holdout_fraction);
  });

  top.section("model", [&](Section& s) {
    auto& m = cfg.train.model;
    s.read_size("dim", m.dim);
    s.read_size("out_dim", m.out_dim);
    s.read_size("max_seq_len", m.max_seq_len);
    std::string style = entity_style_name(m.entity_style);
    s.read("entity_style", style);
    m.entity_style = parse_entity_style(style);
    std::string sim = "auto";
    s.read("similarity", sim);
    if (sim != "auto") m.similarity = parse_similarity(sim);
  });

  top.section("train", [&](Section& s) {
    auto& t = cfg.train;
    s.read("learning_rate", t.learning_rate);
    s.read("warmup_proportion", t.warmup_proportion);
    s.read("adam_eps", t.adam_eps);
    s.read("adam_beta1", t.adam_beta1);
    s.read("adam_beta2", t.adam_beta2);
    s.read("weight_decay", t.weight_decay);
    s.read("clip_max_norm", t.clip_max_norm);
    s.read_size("batch_size", t.batch_size);
    s.read_size("epochs", t.epochs);
    std::string loss = loss_name(t.loss);
    s.read("loss", loss);
    t.loss = parse_loss(loss);
    s.read("seed", t.seed);
    s.read("trace_smoothing", t.trace_smoothing);
    s.read("fgsm_enabled", t.fgsm_enabled);
    s.section("pb", [&](Section& p) {
      p.read("alpha", t.pb.alpha);
      p.read("delta", t.pb.delta);
    });
    s.section("fgsm", [&](Section& f) {
      f.read("epsilon", t.fgsm.epsilon);
      f.read("lambda", t.fgsm.lambda);
    });
    s.section("sampling", [&](Section& p) {
      std::string kind = sampling_name(t.sampling.kind);
      p.read("kind", kind);
      t.sampling.kind = parse_sampling(kind);
      p.read_size("n_negatives", t.sampling.n_negatives);
      p.read("hard_fraction", t.sampling.hard_fraction);
      p.read_size("refresh_every_epochs", t.sampling.refresh_every_epochs);
      p.read("rng_seed", t.sampling.rng_seed);
    });
  });

  top.section("eval", [&](Section& s) {
    s.read("ks", cfg.eval.ks);
    s.read_size("keep_top", cfg.eval.keep_top);
    std::string avg = cfg.eval.averaging == Averaging::micro ? "micro" : "macro";
    s.read("averaging", avg);
    require(avg == "micro" || avg == "macro", ErrorCategory::config, source + ".eval.averaging: micro or macro");
    cfg.eval.averaging = avg == "micro" ? Averaging::micro : Averaging::macro;
  });
  top.finish();

  try {
    cfg.synthetic.validate();
    cfg.train.validate();
  } catch (const Error& e) {
    fail(ErrorCategory::config, source + ": " + e.what());
  }
  require(cfg.nil.holdout_fraction >= 0.0 && cfg.nil.holdout_fraction < 1.0, ErrorCategory::config,
          source + ".nil.holdout_fraction must lie in [0, 1)");
  for (auto k : cfg.eval.ks) require(k >= 1, ErrorCategory::config, source + ".eval.ks entries must be >= 1");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::vector<std::string> resolve_holdout_types(const NilConfig& nil, const DatasetSplit& d) {
  if (!nil.holdout_types.empty() || nil.holdout_fraction == 0.0) return nil.holdout_types;
  const auto types = kb_types(d);
  const auto n = static_cast<std::size_t>(std::ceil(nil.holdout_fraction * static_cast<double>(types.size()) - 1e-9));
  return {types.begin(), types.begin() + static_cast<std::ptrdiff_t>(std::min(n, types.size()))};
}

}  // namespace proxyel
