#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "proxyel/datakit.hpp"
#include "proxyel/evalkit.hpp"
#include "proxyel/trainer.hpp"

namespace proxyel {

struct NilConfig {
  std::vector<std::string> holdout_types;
  /// When > 0 and holdout_types is empty, the first ceil(f * n_types) types
  /// of the knowledge base are held out.
  double holdout_fraction = 0.0;
};

struct EvalConfig {
  std::vector<std::size_t> ks = {1, 64};
  std::size_t keep_top = 64;
  Averaging averaging = Averaging::micro;
};

/// Everything the harness reads from one config file. Sections: synthetic,
/// nil, model, train (with nested pb, fgsm, sampling), eval. Every section
/// and key is optional; unknown keys are errors.
struct ExperimentConfig {
  SyntheticConfig synthetic;
  NilConfig nil;
  TrainConfig train;
  EvalConfig eval;
};

ExperimentConfig parse_config(const std::string& json_text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolves holdout types for `d` from the nil section.
std::vector<std::string> resolve_holdout_types(const NilConfig& nil, const DatasetSplit& d);

}  // namespace proxyel
