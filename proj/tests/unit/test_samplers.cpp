#include <doctest.h>

#include <algorithm>
#include <set>

#include "groundal/error.hpp"
#include "groundal/samplers.hpp"
#include "groundal/stats.hpp"
#include "oracles.hpp"

using namespace groundal;

namespace {

const std::vector<SamplerKind> kAllSamplers{SamplerKind::Random,   SamplerKind::Sequential,
                                            SamplerKind::GmmPoolMaxDensity, SamplerKind::GmmUncertainty,
                                            SamplerKind::Dpp,      SamplerKind::GmmDpp,
                                            SamplerKind::VlGmm};

std::vector<InstanceIndex> iota_ids(std::size_t n, std::size_t stride = 1) {
  std::vector<InstanceIndex> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i * stride;
  return ids;
}

Eigen::MatrixXd gaussian(std::size_t n, std::size_t d, Rng& rng) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = standard_normal(rng);
  return X;
}

SamplerParams small_params() {
  SamplerParams p;
  p.components = 3;
  p.bandwidth = 0.5;
  return p;
}

}  // namespace

TEST_CASE("sampler keys round-trip") {
  for (SamplerKind k : kAllSamplers) CHECK(parse_sampler(sampler_key(k)) == k);
  CHECK_FALSE(parse_sampler("entropy").has_value());
  CHECK(sampler_key(SamplerKind::GmmPoolMaxDensity) == "gmm_pool");
  CHECK_FALSE(is_ranking_sampler(SamplerKind::Dpp));
  CHECK(is_ranking_sampler(SamplerKind::VlGmm));
}

TEST_CASE("strategy and context validation") {
  SamplerParams bad;
  bad.components = 0;
  CHECK_THROWS_AS(SamplerStrategy(SamplerKind::GmmPoolMaxDensity, bad), ValidationError);
  bad = {};
  bad.bandwidth = -1.0;
  CHECK_THROWS_AS(SamplerStrategy(SamplerKind::Dpp, bad), ValidationError);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 2);
  CHECK_THROWS_AS(QueryContext(iota_ids(4), X, 0, 1), ValidationError);
  CHECK_THROWS_AS(QueryContext(iota_ids(3), X, 2, 1), ValidationError);
  CHECK_THROWS_AS(QueryContext({0, 2, 1, 3}, X, 2, 1), ValidationError);
  const QueryContext ctx(iota_ids(4), X, 2, 1);
  CHECK_THROWS_AS(select_batch(SamplerStrategy(SamplerKind::VlGmm), ctx), ValidationError);
}

TEST_CASE("random batches repeat with the seed") {
  Rng rng = make_rng(1);
  const Eigen::MatrixXd X = gaussian(40, 3, rng);
  const SamplerStrategy s(SamplerKind::Random);
  const QueryContext a(iota_ids(40), X, 5, 77);
  const QueryContext b(iota_ids(40), X, 5, 77);
  CHECK(select_batch(s, a) == select_batch(s, b));
  std::set<std::vector<InstanceIndex>> distinct;
  for (std::uint64_t seed = 0; seed < 10; ++seed) distinct.insert(select_batch(s, QueryContext(iota_ids(40), X, 5, seed)));
  CHECK(distinct.size() == 10);
}

TEST_CASE("sequential takes the next ids in order") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 2);
  const QueryContext ctx({3, 4, 8, 9, 10, 20}, X, 4, 0);
  CHECK(select_batch(SamplerStrategy(SamplerKind::Sequential), ctx) == std::vector<InstanceIndex>{3, 4, 8, 9});
}

TEST_CASE("max-density pool sampling avoids outliers, uncertainty picks them") {
  SamplerParams p;
  p.components = 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd X = oracle::cluster_with_outliers(seed);
    const auto pool = select_batch(SamplerStrategy(SamplerKind::GmmPoolMaxDensity, p), QueryContext(iota_ids(23), X, 5, seed));
    REQUIRE(pool.size() == 5);
    for (InstanceIndex i : pool) CHECK(i < 20);
    auto unc = select_batch(SamplerStrategy(SamplerKind::GmmUncertainty, p), QueryContext(iota_ids(23), X, 3, seed));
    std::sort(unc.begin(), unc.end());
    CHECK(unc == std::vector<InstanceIndex>{20, 21, 22});
  }
}

TEST_CASE("DPP never picks both copies of a duplicate") {
  Rng rng = make_rng(3);
  const Eigen::MatrixXd base = gaussian(8, 2, rng);
  Eigen::MatrixXd X(16, 2);
  X << base, base;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (SamplerKind kind : {SamplerKind::Dpp, SamplerKind::GmmDpp}) {
      SamplerParams p;
      p.components = 2;
      p.bandwidth = 1.0;
      const auto batch = select_batch(SamplerStrategy(kind, p), QueryContext(iota_ids(16), X, 8, seed));
      if (kind == SamplerKind::GmmDpp && batch.size() != 8) continue;
      std::set<std::size_t> originals;
      for (InstanceIndex i : batch) originals.insert(i % 8);
      // GMM modulation may push the rank below 8, in which case the random
      // fill is allowed to repeat a point.
      if (kind == SamplerKind::Dpp) CHECK(originals.size() == 8);
    }
  }
}

TEST_CASE("DPP rank shortfall fills the batch") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(6, 2);
  X(5, 0) = 3.0;
  const auto batch = select_batch(SamplerStrategy(SamplerKind::Dpp), QueryContext(iota_ids(6), X, 4, 2));
  CHECK(batch.size() == 4);
  CHECK(std::set<InstanceIndex>(batch.begin(), batch.end()).size() == 4);
}

TEST_CASE("batches are distinct unlabeled ids of the right size") {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 3 + uniform_index(rng, 25);
    const std::size_t b = 1 + uniform_index(rng, 8);
    const auto ids = iota_ids(n, 3);
    const Eigen::MatrixXd X = gaussian(n, 3, rng);
    const Eigen::MatrixXd E = gaussian(n, 4, rng);
    for (SamplerKind kind : kAllSamplers) {
      const QueryContext ctx(ids, X, b, static_cast<std::uint64_t>(trial), E);
      const auto batch = select_batch(SamplerStrategy(kind, small_params()), ctx);
      CHECK(batch.size() == std::min(b, n));
      std::set<InstanceIndex> s(batch.begin(), batch.end());
      CHECK(s.size() == batch.size());
      for (InstanceIndex i : batch) CHECK(std::binary_search(ids.begin(), ids.end(), i));
    }
  }
}

TEST_CASE("rankings agree with batches and are sorted") {
  Rng rng = make_rng(6);
  const auto ids = iota_ids(30, 2);
  const Eigen::MatrixXd X = gaussian(30, 2, rng);
  const Eigen::MatrixXd E = gaussian(30, 3, rng);
  const QueryContext ctx(ids, X, 6, 11, E);
  for (SamplerKind kind : kAllSamplers) {
    const SamplerStrategy s(kind, small_params());
    if (!is_ranking_sampler(kind)) {
      CHECK_THROWS_AS(describe_ranking(s, ctx), ValidationError);
      continue;
    }
    const Ranking r = describe_ranking(s, ctx);
    REQUIRE(r.items.size() == 30);
    const auto batch = select_batch(s, ctx);
    for (std::size_t i = 0; i < batch.size(); ++i) CHECK(r.items[i].id == batch[i]);
    for (std::size_t i = 1; i < r.items.size(); ++i) {
      if (r.descending) {
        CHECK(r.items[i - 1].score >= r.items[i].score);
      } else {
        CHECK(r.items[i - 1].score <= r.items[i].score);
      }
    }
  }
}

TEST_CASE("max-density scores match an independent GMM evaluation") {
  Rng rng = make_rng(7);
  const Eigen::MatrixXd X = gaussian(10, 2, rng);
  const QueryContext ctx(iota_ids(10), X, 3, 4);
  SamplerParams p;
  p.components = 2;
  const Ranking r = describe_ranking(SamplerStrategy(SamplerKind::GmmPoolMaxDensity, p), ctx);
  const GmmModel m = fit_gmm(ctx.features(), 2, derive_seed(4, 0x91)).first;
  for (const RankedItem& item : r.items) {
    const Eigen::VectorXd x = ctx.features().row(static_cast<Eigen::Index>(item.id)).transpose();
    double best = -INFINITY;
    for (std::size_t c = 0; c < m.components(); ++c) {
      best = std::max(best, std::log(m.weights()[static_cast<Eigen::Index>(c)]) + m.component_log_pdf(c, x));
    }
    CHECK(item.score == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("equal scores break by ascending id") {
  Eigen::MatrixXd X(6, 1);
  X << 1.0, -1.0, 1.0, -1.0, 1.0, -1.0;
  const QueryContext ctx({2, 5, 7, 9, 11, 13}, X, 6, 0);
  SamplerParams p;
  p.components = 1;
  for (SamplerKind kind : {SamplerKind::GmmPoolMaxDensity, SamplerKind::GmmUncertainty}) {
    const auto batch = select_batch(SamplerStrategy(kind, p), ctx);
    CHECK(batch == std::vector<InstanceIndex>{2, 5, 7, 9, 11, 13});
  }
}

TEST_CASE("positive rescaling of features leaves ranking samplers unchanged") {
  Rng rng = make_rng(8);
  const Eigen::MatrixXd X = gaussian(25, 3, rng);
  const Eigen::MatrixXd E = gaussian(25, 2, rng);
  for (SamplerKind kind : kAllSamplers) {
    if (!is_ranking_sampler(kind)) continue;
    for (double scale : {0.01, 3.0, 250.0}) {
      const auto a = select_batch(SamplerStrategy(kind, small_params()), QueryContext(iota_ids(25), X, 5, 3, E));
      const auto b = select_batch(SamplerStrategy(kind, small_params()),
                                  QueryContext(iota_ids(25), scale * X, 5, 3, scale * E));
      CHECK(a == b);
    }
  }
}

TEST_CASE("samplers are pure functions of their context") {
  Rng rng = make_rng(9);
  const Eigen::MatrixXd X = gaussian(20, 2, rng);
  const Eigen::MatrixXd E = gaussian(20, 2, rng);
  const QueryContext ctx(iota_ids(20), X, 4, 21, E);
  std::vector<std::vector<InstanceIndex>> first;
  for (SamplerKind kind : kAllSamplers) first.push_back(select_batch(SamplerStrategy(kind, small_params()), ctx));
  std::vector<std::vector<InstanceIndex>> second;
  for (auto it = kAllSamplers.rbegin(); it != kAllSamplers.rend(); ++it) {
    second.insert(second.begin(), select_batch(SamplerStrategy(*it, small_params()), ctx));
  }
  CHECK(first == second);
}

TEST_CASE("VL-GMM ranks by distance to the assigned centre") {
  Rng rng = make_rng(12);
  const Eigen::MatrixXd X = gaussian(15, 2, rng);
  const Eigen::MatrixXd E = gaussian(15, 2, rng);
  const QueryContext ctx(iota_ids(15), X, 3, 5, E);
  SamplerParams p;
  p.components = 1;
  p.language_weight = 0.0;
  const Ranking r = describe_ranking(SamplerStrategy(SamplerKind::VlGmm, p), ctx);
  const Eigen::RowVectorXd centre = ctx.features().colwise().mean();
  for (const RankedItem& item : r.items) {
    CHECK(item.score == doctest::Approx((ctx.features().row(static_cast<Eigen::Index>(item.id)) - centre).norm()));
  }
}

TEST_CASE("context built from a pool sees only unlabeled members") {
  Dataset d;
  d.dims[TraitKind::Color] = 1;
  for (int i = 0; i < 8; ++i) {
    Instance inst;
    inst.id = "x" + std::to_string(i);
    if (i != 3) inst.features[TraitKind::Color] = FeatureVector{TraitKind::Color, Eigen::VectorXd::Constant(1, i)};
    else inst.features[TraitKind::Shape] = FeatureVector{TraitKind::Shape, Eigen::VectorXd::Constant(1, i)};
    d.instances.push_back(inst);
  }
  LabeledPool pool(iota_ids(6));
  pool = advance_pool(pool, std::vector<InstanceIndex>{1, 4});
  const QueryContext ctx = QueryContext::from_pool(d, pool, TraitKind::Color, 2, 0);
  CHECK(ctx.unlabeled() == std::vector<InstanceIndex>{0, 2, 5});
}
