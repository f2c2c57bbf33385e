#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace groundal {

enum class TraitKind { Color, Shape, ObjectType };

inline constexpr std::array<TraitKind, 3> kAllTraits{TraitKind::Color, TraitKind::Shape,
                                                     TraitKind::ObjectType};

// "color", "shape", "object": the spelling used in files and configs.
std::string_view trait_name(TraitKind trait);
std::optional<TraitKind> parse_trait(std::string_view name);

struct FeatureVector {
  TraitKind trait = TraitKind::Color;
  Eigen::VectorXd values;

  std::size_t dim() const { return static_cast<std::size_t>(values.size()); }
};

// Position of an instance inside Dataset::instances. Pools, splits and
// samplers all speak in these indices; tie-breaks are by ascending index.
using InstanceIndex = std::size_t;

struct Instance {
  std::string id;
  std::map<TraitKind, FeatureVector> features;
  std::string description;
  std::map<TraitKind, std::set<std::string>> concepts;

  bool has_trait(TraitKind trait) const { return features.count(trait) != 0; }
  const Eigen::VectorXd& feature(TraitKind trait) const;
};

struct Split {
  std::vector<InstanceIndex> train;  // ascending
  std::vector<InstanceIndex> test;   // ascending
};

struct Dataset {
  std::string name;
  std::vector<Instance> instances;
  std::map<TraitKind, std::size_t> dims;
  Split split;
  std::map<TraitKind, double> mention_rates;

  std::size_t size() const { return instances.size(); }
  bool has_split() const { return !split.train.empty() || !split.test.empty(); }

  // Instances among `ids` that carry features for `trait`, order preserved.
  std::vector<InstanceIndex> with_trait(std::span<const InstanceIndex> ids, TraitKind trait) const;

  // Rows = the given instances' `trait` features, in order.
  Eigen::MatrixXd feature_matrix(std::span<const InstanceIndex> ids, TraitKind trait) const;
};

struct DatasetSchema {
  // When set, the header must declare exactly these dimensions.
  std::optional<std::map<TraitKind, std::size_t>> expected_dims;
  // Picks one description when a record carries several.
  std::uint64_t description_seed = 0;
  std::string name;
};

Dataset load_dataset(const std::string& path, const DatasetSchema& schema = {});
Dataset parse_dataset(std::istream& in, const DatasetSchema& schema = {});

// Floats with 9 significant digits; traits absent from an instance are omitted.
void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::string& path);

Dataset split_train_test(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// Acquisition state over a fixed set of train-pool indices. Immutable:
// advance_pool returns a new value.
class LabeledPool {
 public:
  LabeledPool() = default;
  explicit LabeledPool(std::span<const InstanceIndex> pool);

  const std::vector<InstanceIndex>& labeled() const { return labeled_; }
  const std::set<InstanceIndex>& unlabeled() const { return unlabeled_; }
  std::size_t total() const { return labeled_.size() + unlabeled_.size(); }

 private:
  friend LabeledPool advance_pool(const LabeledPool& pool, std::span<const InstanceIndex> batch);

  std::vector<InstanceIndex> labeled_;
  std::set<InstanceIndex> unlabeled_;
};

LabeledPool advance_pool(const LabeledPool& pool, std::span<const InstanceIndex> batch);

}  // namespace groundal
