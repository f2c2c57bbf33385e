#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "groundal/error.hpp"
#include "groundal/evaluation.hpp"
#include "groundal/gmm.hpp"
#include "groundal/random.hpp"
#include "groundal/synth.hpp"

using namespace groundal;

namespace {

SynthConfig noiseless(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_objects = n;
  for (auto& [trait, t] : cfg.traits) t.mention_rate = 1.0;
  cfg.label_noise = 0.0;
  cfg.seed = seed;
  return cfg;
}

std::vector<InstanceIndex> all_ids(const Dataset& d) {
  std::vector<InstanceIndex> ids(d.size());
  std::iota(ids.begin(), ids.end(), InstanceIndex{0});
  return ids;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

double adjusted_rand(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : joint) index += choose2(v);
  for (const auto& [k, v] : ra) sa += choose2(v);
  for (const auto& [k, v] : rb) sb += choose2(v);
  const double expected = sa * sb / choose2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::size_t covered(std::span<const std::set<std::string>> concepts, std::span<const std::size_t> order,
                    std::size_t prefix) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < prefix; ++i) seen.insert(concepts[order[i]].begin(), concepts[order[i]].end());
  return seen.size();
}

}  // namespace

TEST_CASE("config validation names the offending key") {
  SynthConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto message = [](const SynthConfig& c) {
    try {
      c.validate();
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  SynthConfig bad = cfg;
  bad.traits[TraitKind::Color].mention_rate = 1.5;
  CHECK(message(bad).find("mention_rate_color") != std::string::npos);
  bad = cfg;
  bad.traits[TraitKind::Shape].classes = 1;
  CHECK(message(bad).find("classes_shape") != std::string::npos);
  bad = cfg;
  bad.traits[TraitKind::ObjectType].dim = 0;
  CHECK(message(bad).find("dim_object") != std::string::npos);
  bad = cfg;
  bad.label_noise = -0.1;
  CHECK(message(bad).find("label_noise") != std::string::npos);
  bad = cfg;
  bad.distractor_rate = 2.0;
  CHECK(message(bad).find("distractor_rate") != std::string::npos);
  bad = cfg;
  bad.n_objects = 0;
  CHECK_THROWS_AS(generate(bad), ValidationError);
}

TEST_CASE("class means keep the requested separation") {
  for (const auto& [k, d] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 1}, {3, 2}, {6, 3}, {5, 16}, {12, 3}, {7, 2}}) {
    const Eigen::MatrixXd M = class_means(k, d, 1.5, 9);
    REQUIRE(M.rows() == static_cast<Eigen::Index>(k));
    REQUIRE(M.cols() == static_cast<Eigen::Index>(d));
    double nearest = 1e300;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < M.rows(); ++j) nearest = std::min(nearest, (M.row(i) - M.row(j)).norm());
    }
    CHECK(nearest == doctest::Approx(3.0).epsilon(1e-9));
  }
}

TEST_CASE("noiseless corpus recovers every class word") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SynthConfig cfg = noiseless(240, seed);
    const SynthOutput s = generate(cfg);
    const ConceptVocabulary vocab = extract_concepts(s.dataset, all_ids(s.dataset), s.lexicons);
    CHECK(vocab.total() == 6 + 5 + 12);
    for (const auto& [trait, t] : cfg.traits) {
      std::set<std::string> expected;
      for (const std::string& w : synth_vocabulary(trait, t.classes)) expected.insert(stem(w));
      const std::vector<std::string>& got = vocab.of(trait);
      CHECK(std::set<std::string>(got.begin(), got.end()) == expected);
    }
  }
}

TEST_CASE("a silent trait yields no concepts and a flat curve") {
  SynthConfig cfg = noiseless(120, 4);
  cfg.traits[TraitKind::Shape].mention_rate = 0.0;
  const SynthOutput s = generate(cfg);
  const ConceptVocabulary vocab = extract_concepts(s.dataset, all_ids(s.dataset), s.lexicons);
  CHECK(vocab.of(TraitKind::Shape).empty());
  CHECK_FALSE(vocab.of(TraitKind::Color).empty());

  const Dataset d = split_train_test(s.dataset, 0.3, 4);
  const TraitTask task = prepare_task(d, s.lexicons, TraitKind::Shape);
  ExperimentOptions opts;
  opts.batch_size = 10;
  const LearningCurve c = run_experiment(d, task, SamplerStrategy(SamplerKind::Random), opts, 0);
  REQUIRE_FALSE(c.points.empty());
  for (const CurvePoint& p : c.points) CHECK(p.macro_f1 == 0.0);
}

TEST_CASE("mention frequencies track the configured rates") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig cfg;
    cfg.n_objects = 300;
    cfg.seed = seed;
    const SynthOutput s = generate(cfg);
    for (const auto& [trait, t] : cfg.traits) {
      std::size_t hits = 0;
      for (const TruthRecord& r : s.truth.records) hits += r.mentioned.at(trait).has_value() ? 1 : 0;
      CHECK(std::abs(static_cast<double>(hits) / 300.0 - t.mention_rate) <= 0.06);
    }
  }
}

TEST_CASE("truth records align with the dataset") {
  SynthConfig cfg;
  cfg.n_objects = 80;
  cfg.label_noise = 0.0;
  cfg.seed = 12;
  const SynthOutput s = generate(cfg);
  REQUIRE(s.truth.records.size() == s.dataset.size());
  for (std::size_t i = 0; i < s.dataset.size(); ++i) {
    const TruthRecord& r = s.truth.records[i];
    CHECK(r.id == s.dataset.instances[i].id);
    for (const auto& [trait, t] : cfg.traits) {
      CHECK(r.classes.at(trait) < t.classes);
      CHECK(r.words.at(trait) == synth_vocabulary(trait, t.classes)[r.classes.at(trait)]);
      CHECK(s.dataset.instances[i].feature(trait).size() == static_cast<Eigen::Index>(t.dim));
      if (r.mentioned.at(trait)) CHECK(*r.mentioned.at(trait) == r.words.at(trait));
    }
  }
}

TEST_CASE("full label noise always substitutes a wrong word") {
  SynthConfig cfg = noiseless(100, 3);
  cfg.label_noise = 1.0;
  const SynthOutput s = generate(cfg);
  for (const TruthRecord& r : s.truth.records) {
    for (const auto& [trait, word] : r.mentioned) {
      REQUIRE(word.has_value());
      CHECK(*word != r.words.at(trait));
    }
  }
}

TEST_CASE("generation is byte-for-byte deterministic") {
  SynthConfig cfg;
  cfg.n_objects = 50;
  cfg.seed = 77;
  auto render = [](const SynthOutput& s) {
    std::ostringstream data, truth, lex;
    write_dataset(s.dataset, data);
    write_truth_jsonl(s.truth, truth);
    write_lexicons(s.lexicons, lex);
    return data.str() + truth.str() + lex.str();
  };
  const std::string a = render(generate(cfg));
  CHECK(a == render(generate(cfg)));
  cfg.seed = 78;
  CHECK(a != render(generate(cfg)));
}

TEST_CASE("generated datasets survive the loader") {
  SynthConfig cfg;
  cfg.n_objects = 40;
  cfg.seed = 5;
  const SynthOutput s = generate(cfg);
  std::ostringstream out;
  write_dataset(s.dataset, out);
  std::istringstream in(out.str());
  const Dataset back = parse_dataset(in);
  REQUIRE(back.size() == s.dataset.size());
  CHECK(back.dims == s.dataset.dims);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.instances[i].id == s.dataset.instances[i].id);
    CHECK(back.instances[i].description == s.dataset.instances[i].description);
    for (TraitKind t : kAllTraits) {
      const Eigen::VectorXd& a = s.dataset.instances[i].feature(t);
      const Eigen::VectorXd& b = back.instances[i].feature(t);
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    }
  }
  std::ostringstream lex;
  write_lexicons(s.lexicons, lex);
  std::istringstream lin(lex.str());
  CHECK(parse_lexicons(lin).words == s.lexicons.words);
}

TEST_CASE("tight clusters are recovered by k-means") {
  int perfect = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.n_objects = 150;
    cfg.sigma = 1e-3;
    cfg.seed = seed;
    const SynthOutput s = generate(cfg);
    const Eigen::MatrixXd X = s.dataset.feature_matrix(all_ids(s.dataset), TraitKind::Color);
    std::set<std::size_t> present;
    std::vector<std::size_t> truth;
    for (const TruthRecord& r : s.truth.records) {
      truth.push_back(r.classes.at(TraitKind::Color));
      present.insert(truth.back());
    }
    const GmmModel m = kmeans_init(X, present.size(), seed);
    std::vector<std::size_t> found;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      Eigen::Index best = 0;
      (m.means().rowwise() - X.row(i)).rowwise().squaredNorm().minCoeff(&best);
      found.push_back(static_cast<std::size_t>(best));
    }
    const double ari = adjusted_rand(truth, found);
    if (ari > 1.0 - 1e-12) ++perfect;
    INFO("seed " << seed << " ari " << ari);
  }
  CHECK(perfect >= 9);
}

TEST_CASE("adjusted rand helper") {
  CHECK(adjusted_rand({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(adjusted_rand({0, 0, 0, 1, 1, 1}, {0, 1, 2, 0, 1, 2}) < 0.0);
}

TEST_CASE("greedy order covers three concepts in three picks") {
  const std::vector<std::set<std::string>> concepts{{"red"}, {"red"}, {"blue"}, {"red"}, {"green"}};
  const std::vector<std::size_t> order = oracle_order(concepts);
  CHECK(order == std::vector<std::size_t>{0, 2, 4, 1, 3});

  const std::vector<std::set<std::string>> shared(6, std::set<std::string>{"red"});
  CHECK(oracle_order(shared) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});

  const std::vector<std::set<std::string>> mixed{{}, {"red"}, {"red", "blue"}, {"green"}};
  CHECK(oracle_order(mixed) == std::vector<std::size_t>{2, 3, 0, 1});
}

TEST_CASE("greedy prefixes dominate every ordering on small pools") {
  Rng rng = make_rng(3);
  const std::vector<std::string> names{"a", "b", "c", "d"};
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 3 + uniform_index(rng, 6);
    std::vector<std::set<std::string>> concepts(n);
    for (auto& c : concepts) {
      if (uniform01(rng) < 0.85) c.insert(names[uniform_index(rng, names.size())]);
    }
    const std::vector<std::size_t> greedy = oracle_order(concepts);
    REQUIRE(greedy.size() == n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    do {
      for (std::size_t p = 1; p <= n; ++p) {
        REQUIRE(covered(concepts, greedy, p) >= covered(concepts, perm, p));
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("oracle order over instances") {
  SynthConfig cfg = noiseless(30, 8);
  const SynthOutput s = generate(cfg);
  const std::vector<InstanceIndex> pool{29, 3, 7, 11, 15, 2, 20, 25};
  const auto order = oracle_order(s.truth, TraitKind::Color, pool);
  std::vector<InstanceIndex> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<InstanceIndex> expected = pool;
  std::sort(expected.begin(), expected.end());
  CHECK(sorted == expected);
  std::set<std::string> words;
  for (InstanceIndex i : pool) words.insert(s.truth.records[i].words.at(TraitKind::Color));
  std::set<std::string> prefix;
  for (std::size_t i = 0; i < words.size(); ++i) prefix.insert(s.truth.records[order[i]].words.at(TraitKind::Color));
  CHECK(prefix == words);
  CHECK(oracle_order(s.truth, TraitKind::Color, pool, CoverageObjective::TrueClass) == order);
  const std::vector<InstanceIndex> outside{1000};
  CHECK_THROWS_AS(oracle_order(s.truth, TraitKind::Color, outside), ValidationError);
}
