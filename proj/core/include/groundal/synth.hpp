#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "groundal/data.hpp"
#include "groundal/text.hpp"

namespace groundal {

struct SynthTrait {
  std::size_t classes = 2;  // K
  std::size_t dim = 1;      // d
  double mention_rate = 0.5;
};

struct SynthConfig {
  std::size_t n_objects = 120;
  std::map<TraitKind, SynthTrait> traits{
      {TraitKind::Color, {6, 3, 0.53}},
      {TraitKind::Shape, {5, 16, 0.14}},
      {TraitKind::ObjectType, {12, 19, 0.73}},
  };
  double sigma = 0.4;       // within-class spread
  double separation = 1.5;  // tau: nearest class means sit 2 * tau apart
  double label_noise = 0.05;
  double distractor_rate = 0.3;
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  // Throws ValidationError naming the offending config key.
  void validate() const;
};

struct TruthRecord {
  std::string id;
  std::map<TraitKind, std::size_t> classes;
  std::map<TraitKind, std::string> words;                       // true class word
  std::map<TraitKind, std::optional<std::string>> mentioned;    // word in the description, if any
};

struct GroundTruth {
  std::vector<TruthRecord> records;  // aligned with Dataset::instances
};

struct SynthOutput {
  Dataset dataset;
  Lexicons lexicons;
  GroundTruth truth;
};

// Surface words used for each class, in class order.
std::vector<std::string> synth_vocabulary(TraitKind trait, std::size_t classes);

// Class means: axis directions (+e_i, then -e_i) scaled to sqrt(2) * tau when
// K <= 2d, otherwise repelled unit directions rescaled to a minimum pairwise
// distance of 2 * tau. Rows are classes.
Eigen::MatrixXd class_means(std::size_t classes, std::size_t dim, double separation, std::uint64_t seed);

SynthOutput generate(const SynthConfig& config);

// One JSON object per line, keyed by instance id.
void write_truth_jsonl(const GroundTruth& truth, std::ostream& out);

// Greedy ordering: each step takes the item adding the most unseen concepts,
// ties by lower position. Returns positions into `concepts`.
std::vector<std::size_t> oracle_order(std::span<const std::set<std::string>> concepts);

enum class CoverageObjective { Mentioned, TrueClass };

// Greedy coverage of `trait` concepts (stemmed) over `candidates`.
std::vector<InstanceIndex> oracle_order(const GroundTruth& truth, TraitKind trait,
                                        std::span<const InstanceIndex> candidates,
                                        CoverageObjective objective = CoverageObjective::Mentioned);

}  // namespace groundal
