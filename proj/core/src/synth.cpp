#include "groundal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "groundal/error.hpp"
#include "groundal/random.hpp"

namespace groundal {
namespace {

constexpr std::uint64_t kClassStream = 1;
constexpr std::uint64_t kMeanStream = 2;
constexpr std::uint64_t kFeatureStream = 3;
constexpr std::uint64_t kTextStream = 4;

const std::vector<std::string> kColorWords = {"red",   "green", "blue",  "yellow", "purple", "white",
                                              "black", "brown", "pink",  "gray",   "orange", "teal"};
const std::vector<std::string> kShapeWords = {"round",     "square", "cylindrical", "triangular", "flat",
                                              "oval",      "rectangular", "spherical", "conical", "boxy"};
const std::vector<std::string> kObjectWords = {
    "apple",  "banana", "carrot",   "lemon",  "lime",   "tomato", "potato",  "onion",
    "cabbage", "eggplant", "cucumber", "pepper", "corn",   "mug",    "bowl",    "plate",
    "bottle", "spoon",  "stapler",  "marker", "sponge", "camera", "pear",    "ball"};
const std::vector<std::string> kDistractors = {"really", "quite", "very", "just"};

std::string pseudo_word(TraitKind trait, std::size_t i) {
  static const char* syllables[] = {"ba", "ko", "ri", "tu", "ne", "lo", "mi", "za"};
  std::string w = trait == TraitKind::Color ? "chro" : trait == TraitKind::Shape ? "form" : "thin";
  do {
    w += syllables[i % 8];
    i /= 8;
  } while (i > 0);
  return w;
}

const std::vector<std::string>& base_words(TraitKind trait) {
  switch (trait) {
    case TraitKind::Color: return kColorWords;
    case TraitKind::Shape: return kShapeWords;
    case TraitKind::ObjectType: return kObjectWords;
  }
  return kObjectWords;
}

std::string join_words(std::initializer_list<const std::optional<std::string>*> words) {
  std::string out;
  for (const auto* w : words) {
    if (!*w) continue;
    if (!out.empty()) out += ' ';
    out += **w;
  }
  return out;
}

std::string compose(std::size_t frame, const std::optional<std::string>& c,
                    const std::optional<std::string>& s, const std::optional<std::string>& o) {
  const std::optional<std::string> obj = o ? o : std::optional<std::string>("object");
  const std::optional<std::string> thing = o ? o : std::optional<std::string>("thing");
  switch (frame) {
    case 0: return "this is a " + join_words({&c, &s, &obj});
    case 1: return "it looks like a " + join_words({&c, &thing}) + (s ? " that is " + *s : "");
    case 2: return "a " + join_words({&s, &c, &obj});
    case 3: {
      const std::string traits = c && s ? *c + " and " + *s : c ? *c : s ? *s : "here";
      return "the " + *obj + " is " + traits;
    }
    case 4: return "i see a " + join_words({&c, &thing}) + (s ? " with a " + *s + " form" : "");
    default: return "this looks like a " + join_words({&s, &obj}) + (c ? " colored " + *c : "");
  }
}

std::string insert_distractor(const std::string& text, Rng& rng) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find(' ', start);
    words.push_back(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  const std::size_t pos = uniform_index(rng, words.size() + 1);
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos),
               kDistractors[uniform_index(rng, kDistractors.size())]);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

Eigen::MatrixXd repelled_directions(std::size_t k, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const auto K = static_cast<Eigen::Index>(k);
  const auto D = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd P(K, D);
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = 0; j < D; ++j) P(i, j) = standard_normal(rng);
    P.row(i).normalize();
  }
  for (int iter = 0; iter < 2000; ++iter) {
    const double step = 0.05 / (1.0 + iter / 200.0);
    Eigen::MatrixXd force = Eigen::MatrixXd::Zero(K, D);
    for (Eigen::Index i = 0; i < K; ++i) {
      for (Eigen::Index j = 0; j < K; ++j) {
        if (i == j) continue;
        const Eigen::RowVectorXd diff = P.row(i) - P.row(j);
        const double r2 = std::max(diff.squaredNorm(), 1e-12);
        force.row(i) += diff / (r2 * std::sqrt(r2));
      }
    }
    P += step * force;
    for (Eigen::Index i = 0; i < K; ++i) P.row(i).normalize();
  }
  return P;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_objects < 1) throw ValidationError("n_objects must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be a finite value >= 0");
  if (!(separation > 0.0) || !std::isfinite(separation)) throw ValidationError("separation must be positive");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw ValidationError("label_noise must lie in [0, 1]");
  if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) {
    throw ValidationError("distractor_rate must lie in [0, 1]");
  }
  if (traits.empty()) throw ValidationError("at least one trait is required");
  for (const auto& [trait, t] : traits) {
    const std::string key(trait_name(trait));
    if (t.classes < 2) throw ValidationError("classes_" + key + " must be >= 2");
    if (t.dim < 1) throw ValidationError("dim_" + key + " must be >= 1");
    if (!(t.mention_rate >= 0.0 && t.mention_rate <= 1.0)) {
      throw ValidationError("mention_rate_" + key + " must lie in [0, 1]");
    }
  }
}

std::vector<std::string> synth_vocabulary(TraitKind trait, std::size_t classes) {
  const std::vector<std::string>& base = base_words(trait);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < classes; ++i) {
    out.push_back(i < base.size() ? base[i] : pseudo_word(trait, i - base.size()));
  }
  return out;
}

Eigen::MatrixXd class_means(std::size_t classes, std::size_t dim, double separation, std::uint64_t seed) {
  const auto K = static_cast<Eigen::Index>(classes);
  const auto D = static_cast<Eigen::Index>(dim);
  if (classes <= 2 * dim) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(K, D);
    const double s = std::sqrt(2.0) * separation;
    for (Eigen::Index k = 0; k < K; ++k) M(k, k % D) = k < D ? s : -s;
    // A pair on one axis in d = 1 is the only case without orthogonal room.
    if (dim == 1 && classes == 2) M.col(0) *= 1.0 / std::sqrt(2.0);
    return M;
  }
  Eigen::MatrixXd P = repelled_directions(classes, dim, seed);
  double min_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = i + 1; j < K; ++j) min_dist = std::min(min_dist, (P.row(i) - P.row(j)).norm());
  }
  return P * (2.0 * separation / min_dist);
}

SynthOutput generate(const SynthConfig& config) {
  config.validate();
  SynthOutput out;
  Dataset& ds = out.dataset;
  ds.name = config.name;
  const std::size_t n = config.n_objects;

  std::map<TraitKind, std::vector<std::string>> vocab;
  std::map<TraitKind, std::vector<std::size_t>> classes;
  std::map<TraitKind, Eigen::MatrixXd> means;
  for (const auto& [trait, t] : config.traits) {
    ds.dims[trait] = t.dim;
    vocab[trait] = synth_vocabulary(trait, t.classes);
    for (const std::string& w : vocab[trait]) out.lexicons.words[trait].insert(stem(w));
    // Balanced round-robin labels, shuffled: every class is present when n >= K.
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % t.classes;
    Rng rng = make_rng(derive_seed(derive_seed(config.seed, kClassStream), static_cast<std::uint64_t>(trait)));
    shuffle_in_place(labels, rng);
    classes[trait] = std::move(labels);
    means[trait] = class_means(t.classes, t.dim, config.separation,
                               derive_seed(derive_seed(config.seed, kMeanStream), static_cast<std::uint64_t>(trait)));
  }

  Rng feature_rng = make_rng(derive_seed(config.seed, kFeatureStream));
  Rng text_rng = make_rng(derive_seed(config.seed, kTextStream));
  std::map<TraitKind, std::size_t> mention_counts;
  char id_buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    std::snprintf(id_buf, sizeof id_buf, "obj%04zu", i);
    inst.id = id_buf;
    TruthRecord rec;
    rec.id = inst.id;
    std::map<TraitKind, std::optional<std::string>> said;
    for (const auto& [trait, t] : config.traits) {
      const std::size_t k = classes[trait][i];
      FeatureVector fv;
      fv.trait = trait;
      fv.values = means[trait].row(static_cast<Eigen::Index>(k)).transpose();
      for (Eigen::Index j = 0; j < fv.values.size(); ++j) fv.values[j] += config.sigma * standard_normal(feature_rng);
      inst.features[trait] = std::move(fv);
      rec.classes[trait] = k;
      rec.words[trait] = vocab[trait][k];

      std::optional<std::string> word;
      if (bernoulli(text_rng, t.mention_rate)) {
        std::size_t w = k;
        if (bernoulli(text_rng, config.label_noise)) {
          w = uniform_index(text_rng, t.classes - 1);
          if (w >= k) ++w;
        }
        word = vocab[trait][w];
        ++mention_counts[trait];
      }
      said[trait] = word;
      rec.mentioned[trait] = word;
    }
    const std::size_t frame = uniform_index(text_rng, 6);
    std::string text = compose(frame, said[TraitKind::Color], said[TraitKind::Shape], said[TraitKind::ObjectType]);
    if (bernoulli(text_rng, config.distractor_rate)) text = insert_distractor(text, text_rng);
    inst.description = std::move(text);
    ds.instances.push_back(std::move(inst));
    out.truth.records.push_back(std::move(rec));
  }
  for (const auto& [trait, t] : config.traits) {
    ds.mention_rates[trait] = static_cast<double>(mention_counts[trait]) / static_cast<double>(n);
  }
  return out;
}

void write_truth_jsonl(const GroundTruth& truth, std::ostream& out) {
  for (const TruthRecord& rec : truth.records) {
    nlohmann::json j;
    j["id"] = rec.id;
    for (const auto& [trait, k] : rec.classes) {
      nlohmann::json t;
      t["class"] = k;
      t["word"] = rec.words.at(trait);
      const auto& m = rec.mentioned.at(trait);
      t["mentioned"] = m ? nlohmann::json(*m) : nlohmann::json(nullptr);
      j[std::string(trait_name(trait))] = std::move(t);
    }
    out << j.dump() << '\n';
  }
}

std::vector<std::size_t> oracle_order(std::span<const std::set<std::string>> concepts) {
  const std::size_t n = concepts.size();
  std::vector<bool> used(n, false);
  std::set<std::string> seen;
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = n;
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      std::size_t gain = 0;
      for (const std::string& c : concepts[i]) gain += seen.count(c) ? 0 : 1;
      if (best == n || gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    used[best] = true;
    order.push_back(best);
    seen.insert(concepts[best].begin(), concepts[best].end());
  }
  return order;
}

std::vector<InstanceIndex> oracle_order(const GroundTruth& truth, TraitKind trait,
                                        std::span<const InstanceIndex> candidates,
                                        CoverageObjective objective) {
  std::vector<InstanceIndex> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::set<std::string>> concepts(sorted.size());
  for (std::size_t p = 0; p < sorted.size(); ++p) {
    if (sorted[p] >= truth.records.size()) throw ValidationError("oracle candidate outside the ground truth");
    const TruthRecord& rec = truth.records[sorted[p]];
    if (objective == CoverageObjective::TrueClass) {
      const auto it = rec.words.find(trait);
      if (it != rec.words.end()) concepts[p].insert(stem(it->second));
    } else {
      const auto it = rec.mentioned.find(trait);
      if (it != rec.mentioned.end() && it->second) concepts[p].insert(stem(*it->second));
    }
  }
  std::vector<InstanceIndex> out;
  for (std::size_t p : oracle_order(concepts)) out.push_back(sorted[p]);
  return out;
}

}  // namespace groundal
