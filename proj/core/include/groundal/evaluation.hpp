#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "groundal/classifiers.hpp"
#include "groundal/data.hpp"
#include "groundal/samplers.hpp"
#include "groundal/text.hpp"

namespace groundal {

// Test rows of one trait with per-concept labels (1, 0, or -1 when the
// assignment left the instance out). Every access to the features is
// counted so tests can check when the held-out data was first touched.
class HeldOutSet {
 public:
  HeldOutSet() = default;
  HeldOutSet(std::vector<InstanceIndex> ids, Eigen::MatrixXd features,
             std::vector<std::vector<int>> labels);
  HeldOutSet(const HeldOutSet& other);
  HeldOutSet& operator=(const HeldOutSet& other);

  const std::vector<InstanceIndex>& ids() const { return ids_; }
  const Eigen::MatrixXd& features() const;
  const std::vector<int>& labels(std::size_t index) const { return labels_.at(index); }
  std::size_t concepts() const { return labels_.size(); }
  std::size_t reads() const { return reads_.load(std::memory_order_relaxed); }

 private:
  std::vector<InstanceIndex> ids_;
  Eigen::MatrixXd features_;
  std::vector<std::vector<int>> labels_;
  mutable std::atomic<std::size_t> reads_{0};
};

// Everything a run needs for one trait, built once from the train pool:
// vocabulary, train assignment, test labels and (optionally) description
// embeddings for the pool members.
struct TraitTask {
  TraitKind trait = TraitKind::Color;
  std::vector<InstanceIndex> pool;    // train indices carrying the trait, ascending
  std::vector<std::string> concepts;  // the trait's vocabulary
  ConceptAssignment train_labels;
  HeldOutSet test;
  std::optional<Eigen::MatrixXd> embeddings;  // one row per dataset instance; zero off the pool
  std::vector<std::string> warnings;
};

struct TaskOptions {
  std::optional<double> concept_threshold;
  AssignmentOptions assignment;
  bool embeddings = false;
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  std::uint64_t embedding_seed = 0;
};

// The dataset must carry a split. Concepts and embeddings are derived from
// the train descriptions only.
TraitTask prepare_task(const Dataset& dataset, const Lexicons& lexicons, TraitKind trait,
                       const TaskOptions& options = {});

struct CurvePoint {
  std::size_t n_labeled = 0;
  double macro_f1 = 0.0;
};

struct LearningCurve {
  std::string strategy;
  TraitKind trait = TraitKind::Color;
  std::uint64_t seed = 0;
  std::string config_tag;
  std::vector<CurvePoint> points;
};

struct ExperimentOptions {
  ClassifierKind classifier = ClassifierKind::Logistic;
  ClassifierParams classifier_params;
  std::size_t budget = 0;  // 0 = whole pool
  std::size_t batch_size = 5;
  double f1_threshold = 0.5;
  std::string config_tag;
};

using BatchSelector = std::function<std::vector<InstanceIndex>(const QueryContext&)>;

// Rounds of select, label, retrain, evaluate until the budget is spent.
// Round t uses the seed derive_seed(seed, t) and ends at
// n_labeled = min(t * b, budget).
LearningCurve run_experiment(const Dataset& dataset, const TraitTask& task,
                             const SamplerStrategy& strategy, const ExperimentOptions& options,
                             std::uint64_t seed);
LearningCurve run_experiment(const Dataset& dataset, const TraitTask& task,
                             const BatchSelector& selector, std::string strategy_name,
                             const ExperimentOptions& options, std::uint64_t seed);

// Picks the DPP bandwidth with the best F1-AUC on a validation fold carved
// from the train pool (`validation_fraction` of it). Ties keep the earlier
// grid entry. The test split is never used.
double select_bandwidth_cv(const Dataset& dataset, const Lexicons& lexicons, TraitKind trait,
                           const SamplerStrategy& strategy, std::span<const double> grid,
                           const ExperimentOptions& options, const TaskOptions& task_options,
                           std::uint64_t seed, double validation_fraction = 0.25);

// Mean of per-concept F1 on the held-out set; concepts without a model
// count as 0.
double macro_f1(std::span<const std::optional<ConceptClassifier>> models, const HeldOutSet& test,
                double threshold = 0.5);
double macro_f1(std::span<const double> per_concept_f1);

// Trapezoidal area over n_labeled divided by the n_labeled range.
double f1_auc(const LearningCurve& curve);

struct AucSummary {
  std::string strategy;
  TraitKind trait = TraitKind::Color;
  std::string config_tag;
  double mean = 0.0;
  double stddev = 0.0;  // population convention
  std::vector<double> aucs;
  std::vector<std::uint64_t> seeds;
  std::vector<CurvePoint> mean_curve;  // piecewise-linear mean on the union grid

  std::size_t runs() const { return aucs.size(); }
};

AucSummary aggregate_runs(std::span<const LearningCurve> curves);

void write_curve_csv(const LearningCurve& curve, std::ostream& out);
void write_curve_csv(std::span<const CurvePoint> points, std::ostream& out);

// Rows = strategies, columns = traits; empty cell when a pair is missing.
void write_auc_table(std::span<const AucSummary> summaries, std::span<const std::string> strategies,
                     std::span<const TraitKind> traits, std::ostream& out);

}  // namespace groundal
