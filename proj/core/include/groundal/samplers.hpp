#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "groundal/data.hpp"
#include "groundal/gmm.hpp"

namespace groundal {

enum class SamplerKind { Random, Sequential, GmmPoolMaxDensity, GmmUncertainty, Dpp, GmmDpp, VlGmm };

// Config keys: random|sequential|gmm_pool|gmm_uncertainty|dpp|gmm_dpp|vl_gmm.
std::string_view sampler_key(SamplerKind kind);
std::optional<SamplerKind> parse_sampler(std::string_view key);
bool is_ranking_sampler(SamplerKind kind);

struct SamplerParams {
  std::size_t components = kDefaultComponents;  // C, clamped to the pool size per round
  double bandwidth = 4.0;                       // h
  double language_weight = 1.0;                 // alpha for vl_gmm
  GmmOptions gmm;
};

class SamplerStrategy {
 public:
  explicit SamplerStrategy(SamplerKind kind, SamplerParams params = {});

  SamplerKind kind() const { return kind_; }
  const SamplerParams& params() const { return params_; }
  std::string_view key() const { return sampler_key(kind_); }

 private:
  SamplerKind kind_;
  SamplerParams params_;
};

// What a sampler may see in one round: the unlabeled indices (ascending),
// their z-scored trait features and, optionally, z-scored description
// embeddings. Labels and test data are never part of it.
class QueryContext {
 public:
  QueryContext(std::vector<InstanceIndex> unlabeled, const Eigen::MatrixXd& raw_features,
               std::size_t batch_size, std::uint64_t seed,
               std::optional<Eigen::MatrixXd> raw_embeddings = std::nullopt);

  // Features of the pool's unlabeled members for `trait`. `embeddings`, when
  // given, holds one row per dataset instance.
  static QueryContext from_pool(const Dataset& dataset, const LabeledPool& pool, TraitKind trait,
                                std::size_t batch_size, std::uint64_t seed,
                                const Eigen::MatrixXd* embeddings = nullptr);

  const std::vector<InstanceIndex>& unlabeled() const { return unlabeled_; }
  const Eigen::MatrixXd& features() const { return features_; }
  const std::optional<Eigen::MatrixXd>& embeddings() const { return embeddings_; }
  std::size_t batch_size() const { return batch_size_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return unlabeled_.size(); }

 private:
  std::vector<InstanceIndex> unlabeled_;
  Eigen::MatrixXd features_;
  std::optional<Eigen::MatrixXd> embeddings_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

struct RankedItem {
  InstanceIndex id = 0;
  double score = 0.0;
};

struct Ranking {
  std::vector<RankedItem> items;  // full unlabeled set in selection order
  bool descending = true;         // direction of `score` along `items`
};

// Deterministic rankings: gmm_pool (max component log-density, descending),
// gmm_uncertainty (marginal log-density, ascending), vl_gmm (distance to the
// assigned component mean, ascending), sequential (index, ascending). Equal
// scores break by ascending index.
Ranking describe_ranking(const SamplerStrategy& strategy, const QueryContext& context);

// Ordered batch of min(b, |unlabeled|) distinct unlabeled indices.
std::vector<InstanceIndex> select_batch(const SamplerStrategy& strategy, const QueryContext& context);

}  // namespace groundal
