#include "groundal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "groundal/error.hpp"
#include "groundal/log.hpp"
#include "groundal/random.hpp"

namespace groundal {
namespace {

constexpr std::uint64_t kClassifierStream = 0xC1A55;

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double interpolate(const std::vector<CurvePoint>& points, double x) {
  if (x <= static_cast<double>(points.front().n_labeled)) return points.front().macro_f1;
  if (x >= static_cast<double>(points.back().n_labeled)) return points.back().macro_f1;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto x1 = static_cast<double>(points[i].n_labeled);
    if (x <= x1) {
      const auto x0 = static_cast<double>(points[i - 1].n_labeled);
      const double t = (x - x0) / (x1 - x0);
      return points[i - 1].macro_f1 + t * (points[i].macro_f1 - points[i - 1].macro_f1);
    }
  }
  return points.back().macro_f1;
}

std::vector<std::optional<ConceptClassifier>> train_models(const Dataset& dataset, const TraitTask& task,
                                                           const LabeledPool& pool,
                                                           const ExperimentOptions& options,
                                                           std::uint64_t seed) {
  const std::set<InstanceIndex> labeled(pool.labeled().begin(), pool.labeled().end());
  auto pick = [&](const std::vector<InstanceIndex>& ids) {
    std::vector<InstanceIndex> out;
    for (InstanceIndex id : ids) {
      if (labeled.count(id)) out.push_back(id);
    }
    return out;
  };
  std::vector<std::optional<ConceptClassifier>> models(task.concepts.size());
  for (std::size_t c = 0; c < task.concepts.size(); ++c) {
    const ConceptLabels* labels = task.train_labels.find(task.trait, task.concepts[c]);
    if (!labels) continue;
    const std::vector<InstanceIndex> pos = pick(labels->positives);
    const std::vector<InstanceIndex> neg = pick(labels->negatives);
    if (pos.empty() || neg.empty()) continue;
    TrainSet train{dataset.feature_matrix(pos, task.trait), dataset.feature_matrix(neg, task.trait)};
    models[c] = train_classifier(options.classifier, train, options.classifier_params,
                                 derive_seed(derive_seed(seed, kClassifierStream), c));
  }
  return models;
}

}  // namespace

HeldOutSet::HeldOutSet(std::vector<InstanceIndex> ids, Eigen::MatrixXd features,
                       std::vector<std::vector<int>> labels)
    : ids_(std::move(ids)), features_(std::move(features)), labels_(std::move(labels)) {
  if (static_cast<std::size_t>(features_.rows()) != ids_.size()) {
    throw ValidationError("held-out features do not match the held-out ids");
  }
  for (const auto& column : labels_) {
    if (column.size() != ids_.size()) throw ValidationError("held-out labels do not match the held-out ids");
  }
}

HeldOutSet::HeldOutSet(const HeldOutSet& other)
    : ids_(other.ids_), features_(other.features_), labels_(other.labels_), reads_(other.reads()) {}

HeldOutSet& HeldOutSet::operator=(const HeldOutSet& other) {
  ids_ = other.ids_;
  features_ = other.features_;
  labels_ = other.labels_;
  reads_.store(other.reads(), std::memory_order_relaxed);
  return *this;
}

const Eigen::MatrixXd& HeldOutSet::features() const {
  reads_.fetch_add(1, std::memory_order_relaxed);
  return features_;
}

TraitTask prepare_task(const Dataset& dataset, const Lexicons& lexicons, TraitKind trait,
                       const TaskOptions& options) {
  if (!dataset.has_split()) throw ValidationError("dataset has no train/test split");
  TraitTask task;
  task.trait = trait;
  task.pool = dataset.with_trait(dataset.split.train, trait);

  const ConceptVocabulary vocab =
      extract_concepts(dataset, dataset.split.train, lexicons, options.concept_threshold);
  task.concepts = vocab.of(trait);
  task.warnings = vocab.warnings;
  task.train_labels = assign_labels(dataset, task.pool, vocab, options.assignment);
  task.warnings.insert(task.warnings.end(), task.train_labels.warnings.begin(),
                       task.train_labels.warnings.end());

  const std::vector<InstanceIndex> test_ids = dataset.with_trait(dataset.split.test, trait);
  AssignmentOptions test_options = options.assignment;
  test_options.drop_empty = false;
  const ConceptAssignment test_assignment = assign_labels(dataset, test_ids, vocab, test_options);
  std::vector<std::vector<int>> labels(task.concepts.size(), std::vector<int>(test_ids.size(), -1));
  for (std::size_t c = 0; c < task.concepts.size(); ++c) {
    const ConceptLabels* l = test_assignment.find(trait, task.concepts[c]);
    if (!l) continue;
    for (std::size_t r = 0; r < test_ids.size(); ++r) {
      if (std::binary_search(l->positives.begin(), l->positives.end(), test_ids[r])) {
        labels[c][r] = 1;
      } else if (std::binary_search(l->negatives.begin(), l->negatives.end(), test_ids[r])) {
        labels[c][r] = 0;
      }
    }
  }
  task.test = HeldOutSet(test_ids, dataset.feature_matrix(test_ids, trait), std::move(labels));

  if (options.embeddings) {
    Eigen::MatrixXd emb = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dataset.size()),
                                                static_cast<Eigen::Index>(options.embedding_dim));
    for (InstanceIndex id : task.pool) {
      emb.row(static_cast<Eigen::Index>(id)) =
          embed_description(dataset.instances[id].description, vocab, options.embedding_dim,
                            options.embedding_seed)
              .vector.transpose();
    }
    task.embeddings = std::move(emb);
  }
  return task;
}

LearningCurve run_experiment(const Dataset& dataset, const TraitTask& task,
                             const SamplerStrategy& strategy, const ExperimentOptions& options,
                             std::uint64_t seed) {
  BatchSelector selector = [&strategy](const QueryContext& ctx) { return select_batch(strategy, ctx); };
  return run_experiment(dataset, task, selector, std::string(strategy.key()), options, seed);
}

LearningCurve run_experiment(const Dataset& dataset, const TraitTask& task,
                             const BatchSelector& selector, std::string strategy_name,
                             const ExperimentOptions& options, std::uint64_t seed) {
  if (options.batch_size < 1) throw ValidationError("batch size must be at least 1");
  const std::size_t budget = options.budget == 0 ? task.pool.size() : options.budget;
  if (budget == 0) throw ValidationError("budget is 0 (empty pool)");
  if (budget > task.pool.size()) {
    throw ValidationError("budget " + std::to_string(budget) + " exceeds the pool size " +
                          std::to_string(task.pool.size()));
  }

  LearningCurve curve;
  curve.strategy = std::move(strategy_name);
  curve.trait = task.trait;
  curve.seed = seed;
  curve.config_tag = options.config_tag;

  if (task.concepts.empty()) {
    log_warning("no " + std::string(trait_name(task.trait)) + " concepts; the curve is all zeros");
    for (std::size_t n = std::min(options.batch_size, budget);; n = std::min(n + options.batch_size, budget)) {
      curve.points.push_back({n, 0.0});
      if (n == budget) break;
    }
    return curve;
  }

  const Eigen::MatrixXd* embeddings = task.embeddings ? &*task.embeddings : nullptr;
  LabeledPool pool(task.pool);
  for (std::uint64_t round = 1; pool.labeled().size() < budget; ++round) {
    const std::size_t b = std::min(options.batch_size, budget - pool.labeled().size());
    const QueryContext ctx =
        QueryContext::from_pool(dataset, pool, task.trait, b, derive_seed(seed, round), embeddings);
    const std::vector<InstanceIndex> batch = selector(ctx);
    if (batch.size() != b) {
      throw Error("selector returned " + std::to_string(batch.size()) + " items, expected " +
                  std::to_string(b));
    }
    pool = advance_pool(pool, batch);
    const auto models = train_models(dataset, task, pool, options, seed);
    curve.points.push_back({pool.labeled().size(), macro_f1(models, task.test, options.f1_threshold)});
  }
  return curve;
}

double select_bandwidth_cv(const Dataset& dataset, const Lexicons& lexicons, TraitKind trait,
                           const SamplerStrategy& strategy, std::span<const double> grid,
                           const ExperimentOptions& options, const TaskOptions& task_options,
                           std::uint64_t seed, double validation_fraction) {
  if (grid.empty()) throw ValidationError("bandwidth grid is empty");
  if (!dataset.has_split()) throw ValidationError("dataset has no train/test split");
  Dataset inner;
  inner.name = dataset.name;
  inner.dims = dataset.dims;
  for (InstanceIndex id : dataset.split.train) inner.instances.push_back(dataset.instances[id]);
  inner = split_train_test(inner, validation_fraction, derive_seed(seed, 0xCF01));
  const TraitTask task = prepare_task(inner, lexicons, trait, task_options);
  ExperimentOptions inner_options = options;
  inner_options.budget = 0;
  double best_h = grid.front();
  double best_auc = -1.0;
  for (double h : grid) {
    SamplerParams params = strategy.params();
    params.bandwidth = h;
    const SamplerStrategy candidate(strategy.kind(), params);
    const LearningCurve curve = run_experiment(inner, task, candidate, inner_options, seed);
    const double auc = curve.points.size() >= 2 ? f1_auc(curve) : curve.points.front().macro_f1;
    if (auc > best_auc) {
      best_auc = auc;
      best_h = h;
    }
  }
  return best_h;
}

double macro_f1(std::span<const double> per_concept_f1) {
  if (per_concept_f1.empty()) throw ValidationError("macro-F1 over an empty vocabulary");
  double sum = 0.0;
  for (double f : per_concept_f1) sum += f;
  return sum / static_cast<double>(per_concept_f1.size());
}

double macro_f1(std::span<const std::optional<ConceptClassifier>> models, const HeldOutSet& test,
                double threshold) {
  if (models.empty()) throw ValidationError("macro-F1 over an empty vocabulary");
  if (models.size() != test.concepts()) {
    throw ValidationError("model count does not match the held-out vocabulary");
  }
  const Eigen::MatrixXd& X = test.features();
  std::vector<double> scores(models.size(), 0.0);
  for (std::size_t c = 0; c < models.size(); ++c) {
    if (!models[c]) continue;
    std::vector<double> probs;
    std::vector<int> labels;
    const std::vector<int>& column = test.labels(c);
    for (std::size_t r = 0; r < column.size(); ++r) {
      if (column[r] < 0) continue;
      probs.push_back(predict_proba(*models[c], X.row(static_cast<Eigen::Index>(r)).transpose()));
      labels.push_back(column[r]);
    }
    if (!probs.empty()) scores[c] = f1_score(probs, labels, threshold);
  }
  return macro_f1(scores);
}

double f1_auc(const LearningCurve& curve) {
  const auto& p = curve.points;
  if (p.size() < 2) throw ValidationError("F1-AUC needs at least two curve points");
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].n_labeled <= p[i - 1].n_labeled) {
      throw ValidationError("curve n_labeled must be strictly increasing");
    }
  }
  double area = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    const auto dx = static_cast<double>(p[i].n_labeled - p[i - 1].n_labeled);
    area += 0.5 * (p[i].macro_f1 + p[i - 1].macro_f1) * dx;
  }
  return area / static_cast<double>(p.back().n_labeled - p.front().n_labeled);
}

AucSummary aggregate_runs(std::span<const LearningCurve> curves) {
  if (curves.empty()) throw ValidationError("aggregate_runs needs at least one curve");
  AucSummary s;
  s.strategy = curves.front().strategy;
  s.trait = curves.front().trait;
  s.config_tag = curves.front().config_tag;
  std::set<std::size_t> grid;
  for (const LearningCurve& c : curves) {
    if (c.strategy != s.strategy || c.trait != s.trait || c.config_tag != s.config_tag) {
      throw ValidationError("aggregate_runs: curves come from mixed configurations");
    }
    s.aucs.push_back(f1_auc(c));
    s.seeds.push_back(c.seed);
    for (const CurvePoint& p : c.points) grid.insert(p.n_labeled);
  }
  const auto n = static_cast<double>(s.aucs.size());
  for (double a : s.aucs) s.mean += a;
  s.mean /= n;
  double var = 0.0;
  for (double a : s.aucs) var += (a - s.mean) * (a - s.mean);
  s.stddev = std::sqrt(var / n);
  for (std::size_t x : grid) {
    double sum = 0.0;
    for (const LearningCurve& c : curves) sum += interpolate(c.points, static_cast<double>(x));
    s.mean_curve.push_back({x, sum / n});
  }
  return s;
}

void write_curve_csv(std::span<const CurvePoint> points, std::ostream& out) {
  out << "n_labeled,macro_f1\n";
  for (const CurvePoint& p : points) out << p.n_labeled << ',' << format_fixed(p.macro_f1, 6) << '\n';
}

void write_curve_csv(const LearningCurve& curve, std::ostream& out) {
  write_curve_csv(std::span<const CurvePoint>(curve.points), out);
}

void write_auc_table(std::span<const AucSummary> summaries, std::span<const std::string> strategies,
                     std::span<const TraitKind> traits, std::ostream& out) {
  out << "strategy";
  for (TraitKind t : traits) out << ',' << trait_name(t);
  out << '\n';
  for (const std::string& strategy : strategies) {
    out << strategy;
    for (TraitKind t : traits) {
      out << ',';
      for (const AucSummary& s : summaries) {
        if (s.strategy == strategy && s.trait == t) {
          out << format_fixed(s.mean, 6);
          break;
        }
      }
    }
    out << '\n';
  }
}

}  // namespace groundal
