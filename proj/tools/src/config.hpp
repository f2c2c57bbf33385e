#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "groundal/classifiers.hpp"
#include "groundal/gmm.hpp"
#include "groundal/samplers.hpp"
#include "groundal/synth.hpp"

namespace groundal::cli {

using ConfigValues = std::map<std::string, std::map<std::string, std::string>>;

// INI-style: [section] headers, `key = value` lines, `;` or `#` comments.
// Sections: data, synth, experiment, gmm, dpp, output.
struct ExperimentConfig {
  std::string source_text;
  ConfigValues values;

  std::optional<std::string> dataset_path;
  std::optional<std::string> lexicon_path;
  SynthConfig synth;

  std::vector<SamplerKind> strategies{SamplerKind::Random, SamplerKind::GmmPoolMaxDensity};
  ClassifierKind classifier = ClassifierKind::Logistic;
  ClassifierParams classifier_params;
  std::vector<TraitKind> traits{TraitKind::Color};
  std::size_t batch_size = 5;
  std::size_t budget = 0;  // 0 = whole pool
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  double test_fraction = 0.3;
  double f1_threshold = 0.5;
  double language_weight = 1.0;
  std::size_t embedding_dim = kDefaultEmbeddingDim;

  std::size_t components = kDefaultComponents;
  bool components_cv = false;
  std::vector<std::size_t> component_grid{kDefaultComponentGrid.begin(), kDefaultComponentGrid.end()};
  std::size_t cv_folds = 4;
  CovarianceType covariance = CovarianceType::Diagonal;

  double bandwidth = 4.0;
  bool bandwidth_cv = false;
  std::vector<double> bandwidth_grid{100.0, 25.0, 4.0};

  std::string output_dir = "results";
};

// Relative paths in [data] resolve against `base_dir`. Throws
// ValidationError naming the section and key at fault.
ExperimentConfig parse_config(std::string_view text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

}  // namespace groundal::cli
