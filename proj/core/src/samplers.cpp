#include "groundal/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "groundal/dpp.hpp"
#include "groundal/error.hpp"
#include "groundal/log.hpp"
#include "groundal/random.hpp"
#include "groundal/stats.hpp"

namespace groundal {
namespace {

constexpr std::uint64_t kGmmStream = 0x91;
constexpr std::uint64_t kDrawStream = 0x92;

GmmModel fit_pool_gmm(const SamplerStrategy& s, const Eigen::MatrixXd& X, std::uint64_t seed) {
  const std::size_t c = std::min<std::size_t>(s.params().components, static_cast<std::size_t>(X.rows()));
  return fit_gmm(X, c, derive_seed(seed, kGmmStream), s.params().gmm).first;
}

Ranking rank_by(const QueryContext& ctx, const Eigen::VectorXd& scores, bool descending) {
  std::vector<std::size_t> order(ctx.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)];
    const double sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return descending ? sa > sb : sa < sb;
    return ctx.unlabeled()[a] < ctx.unlabeled()[b];
  });
  Ranking r;
  r.descending = descending;
  r.items.reserve(order.size());
  for (std::size_t pos : order) {
    r.items.push_back({ctx.unlabeled()[pos], scores[static_cast<Eigen::Index>(pos)]});
  }
  return r;
}

std::vector<InstanceIndex> draw_k_dpp(const DppKernel& kernel, const QueryContext& ctx, std::size_t k) {
  Rng rng = make_rng(derive_seed(ctx.seed(), kDrawStream));
  std::vector<std::size_t> positions;
  if (k <= kernel.rank()) {
    positions = sample_k_dpp(kernel, k, rng);
  } else {
    log_info("k-DPP rank shortfall (k=" + std::to_string(k) + ", rank=" +
                std::to_string(kernel.rank()) + "); filling the batch uniformly");
    positions = sample_k_dpp(kernel, kernel.rank(), rng);
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      if (!std::binary_search(positions.begin(), positions.end(), i)) rest.push_back(i);
    }
    shuffle_in_place(rest, rng);
    positions.insert(positions.end(), rest.begin(),
                     rest.begin() + static_cast<std::ptrdiff_t>(k - positions.size()));
  }
  std::vector<InstanceIndex> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) out.push_back(ctx.unlabeled()[p]);
  return out;
}

}  // namespace

std::string_view sampler_key(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Random: return "random";
    case SamplerKind::Sequential: return "sequential";
    case SamplerKind::GmmPoolMaxDensity: return "gmm_pool";
    case SamplerKind::GmmUncertainty: return "gmm_uncertainty";
    case SamplerKind::Dpp: return "dpp";
    case SamplerKind::GmmDpp: return "gmm_dpp";
    case SamplerKind::VlGmm: return "vl_gmm";
  }
  return "unknown";
}

std::optional<SamplerKind> parse_sampler(std::string_view key) {
  for (SamplerKind k : {SamplerKind::Random, SamplerKind::Sequential, SamplerKind::GmmPoolMaxDensity,
                        SamplerKind::GmmUncertainty, SamplerKind::Dpp, SamplerKind::GmmDpp,
                        SamplerKind::VlGmm}) {
    if (sampler_key(k) == key) return k;
  }
  return std::nullopt;
}

bool is_ranking_sampler(SamplerKind kind) {
  return kind == SamplerKind::Sequential || kind == SamplerKind::GmmPoolMaxDensity ||
         kind == SamplerKind::GmmUncertainty || kind == SamplerKind::VlGmm;
}

SamplerStrategy::SamplerStrategy(SamplerKind kind, SamplerParams params)
    : kind_(kind), params_(std::move(params)) {
  if (params_.components < 1) throw ValidationError("sampler: GMM components must be >= 1");
  if (!(params_.bandwidth > 0.0)) throw ValidationError("sampler: DPP bandwidth must be positive");
  if (!(params_.language_weight >= 0.0)) throw ValidationError("sampler: language weight must be >= 0");
  if (!(params_.gmm.reg_eps > 0.0)) throw ValidationError("sampler: reg_eps must be positive");
}

QueryContext::QueryContext(std::vector<InstanceIndex> unlabeled, const Eigen::MatrixXd& raw_features,
                           std::size_t batch_size, std::uint64_t seed,
                           std::optional<Eigen::MatrixXd> raw_embeddings)
    : unlabeled_(std::move(unlabeled)), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ < 1) throw ValidationError("batch size must be at least 1");
  if (unlabeled_.empty()) throw ValidationError("query context needs at least one unlabeled instance");
  if (static_cast<std::size_t>(raw_features.rows()) != unlabeled_.size()) {
    throw ValidationError("feature rows do not match the unlabeled indices");
  }
  if (!std::is_sorted(unlabeled_.begin(), unlabeled_.end()) ||
      std::adjacent_find(unlabeled_.begin(), unlabeled_.end()) != unlabeled_.end()) {
    throw ValidationError("unlabeled indices must be strictly ascending");
  }
  features_ = standardize(raw_features);
  if (raw_embeddings) {
    if (static_cast<std::size_t>(raw_embeddings->rows()) != unlabeled_.size()) {
      throw ValidationError("embedding rows do not match the unlabeled indices");
    }
    embeddings_ = standardize(*raw_embeddings);
  }
}

QueryContext QueryContext::from_pool(const Dataset& dataset, const LabeledPool& pool, TraitKind trait,
                                     std::size_t batch_size, std::uint64_t seed,
                                     const Eigen::MatrixXd* embeddings) {
  const std::vector<InstanceIndex> all(pool.unlabeled().begin(), pool.unlabeled().end());
  std::vector<InstanceIndex> ids = dataset.with_trait(all, trait);
  Eigen::MatrixXd X = dataset.feature_matrix(ids, trait);
  std::optional<Eigen::MatrixXd> emb;
  if (embeddings) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(ids.size()), embeddings->cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      rows.row(static_cast<Eigen::Index>(r)) = embeddings->row(static_cast<Eigen::Index>(ids[r]));
    }
    emb = std::move(rows);
  }
  return QueryContext(std::move(ids), X, batch_size, seed, std::move(emb));
}

Ranking describe_ranking(const SamplerStrategy& strategy, const QueryContext& ctx) {
  const Eigen::MatrixXd& X = ctx.features();
  switch (strategy.kind()) {
    case SamplerKind::Sequential: {
      Eigen::VectorXd scores(static_cast<Eigen::Index>(ctx.size()));
      for (std::size_t i = 0; i < ctx.size(); ++i) {
        scores[static_cast<Eigen::Index>(i)] = static_cast<double>(ctx.unlabeled()[i]);
      }
      return rank_by(ctx, scores, false);
    }
    case SamplerKind::GmmPoolMaxDensity: {
      const GmmModel model = fit_pool_gmm(strategy, X, ctx.seed());
      const Eigen::VectorXd scores = component_log_densities(model, X).rowwise().maxCoeff();
      return rank_by(ctx, scores, true);
    }
    case SamplerKind::GmmUncertainty: {
      const GmmModel model = fit_pool_gmm(strategy, X, ctx.seed());
      return rank_by(ctx, marginal_log_probabilities(model, X), false);
    }
    case SamplerKind::VlGmm: {
      if (!ctx.embeddings()) throw ValidationError("vl_gmm needs description embeddings");
      const Eigen::MatrixXd& E = *ctx.embeddings();
      Eigen::MatrixXd Z(X.rows(), X.cols() + E.cols());
      Z << X, strategy.params().language_weight * E;
      const GmmModel model = fit_pool_gmm(strategy, Z, ctx.seed());
      const Eigen::MatrixXd resp = responsibilities(model, Z);
      Eigen::VectorXd scores(Z.rows());
      for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        Eigen::Index c = 0;
        resp.row(i).maxCoeff(&c);
        scores[i] = (Z.row(i) - model.means().row(c)).norm();
      }
      return rank_by(ctx, scores, false);
    }
    case SamplerKind::Random:
    case SamplerKind::Dpp:
    case SamplerKind::GmmDpp: break;
  }
  throw ValidationError("describe_ranking: '" + std::string(strategy.key()) +
                        "' is a stochastic sampler without a ranking");
}

std::vector<InstanceIndex> select_batch(const SamplerStrategy& strategy, const QueryContext& ctx) {
  const std::size_t b = std::min(ctx.batch_size(), ctx.size());
  switch (strategy.kind()) {
    case SamplerKind::Random: {
      std::vector<InstanceIndex> ids = ctx.unlabeled();
      Rng rng = make_rng(derive_seed(ctx.seed(), kDrawStream));
      shuffle_in_place(ids, rng);
      ids.resize(b);
      return ids;
    }
    case SamplerKind::Dpp: {
      const DppKernel kernel = rbf_kernel(ctx.features(), strategy.params().bandwidth);
      return draw_k_dpp(kernel, ctx, b);
    }
    case SamplerKind::GmmDpp: {
      const GmmModel model = fit_pool_gmm(strategy, ctx.features(), ctx.seed());
      const DppKernel base = rbf_kernel(ctx.features(), strategy.params().bandwidth);
      const DppKernel kernel =
          gmm_modulated_kernel(base, marginal_log_probabilities(model, ctx.features()));
      return draw_k_dpp(kernel, ctx, b);
    }
    case SamplerKind::Sequential:
    case SamplerKind::GmmPoolMaxDensity:
    case SamplerKind::GmmUncertainty:
    case SamplerKind::VlGmm: {
      const Ranking ranking = describe_ranking(strategy, ctx);
      std::vector<InstanceIndex> out;
      out.reserve(b);
      for (std::size_t i = 0; i < b; ++i) out.push_back(ranking.items[i].id);
      return out;
    }
  }
  throw ValidationError("unknown sampler kind");
}

}  // namespace groundal
