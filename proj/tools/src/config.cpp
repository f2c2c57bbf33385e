#include "config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "groundal/error.hpp"

namespace groundal::cli {
namespace {

namespace fs = std::filesystem;

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"data", {"path", "lexicons"}},
      {"synth",
       {"n_objects", "classes_color", "classes_shape", "classes_object", "dim_color", "dim_shape",
        "dim_object", "mention_rate_color", "mention_rate_shape", "mention_rate_object", "sigma",
        "separation", "label_noise", "distractor_rate", "seed", "name"}},
      {"experiment",
       {"strategies", "sampler", "classifier", "traits", "batch_size", "budget", "runs", "seed",
        "test_fraction", "f1_threshold", "language_weight", "embedding_dim", "l2", "svm_c", "mlp_hidden", "mlp_epochs",
        "mlp_lr"}},
      {"gmm", {"components", "cv", "grid", "folds", "covariance"}},
      {"dpp", {"h", "cv", "grid"}},
      {"output", {"dir"}},
  };
  return keys;
}

[[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) {
  throw ValidationError("config [" + section + "] " + key + ": " + what);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const ConfigValues& values) : values_(values) {}

  const std::string* get(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    if (s == values_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  void size(const std::string& section, const std::string& key, std::size_t& out) const {
    if (const std::string* v = get(section, key)) {
      unsigned long long parsed = 0;
      const auto r = std::from_chars(v->data(), v->data() + v->size(), parsed);
      if (r.ec != std::errc() || r.ptr != v->data() + v->size()) fail(section, key, "expected a non-negative integer, got '" + *v + "'");
      out = static_cast<std::size_t>(parsed);
    }
  }

  void u64(const std::string& section, const std::string& key, std::uint64_t& out) const {
    std::size_t v = static_cast<std::size_t>(out);
    size(section, key, v);
    out = v;
  }

  void real(const std::string& section, const std::string& key, double& out) const {
    if (const std::string* v = get(section, key)) out = parse_real(section, key, *v);
  }

  void flag(const std::string& section, const std::string& key, bool& out) const {
    if (const std::string* v = get(section, key)) {
      if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") {
        out = true;
      } else if (*v == "false" || *v == "0" || *v == "no" || *v == "off") {
        out = false;
      } else {
        fail(section, key, "expected a boolean, got '" + *v + "'");
      }
    }
  }

  static double parse_real(const std::string& section, const std::string& key, const std::string& v) {
    double parsed = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), parsed);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) fail(section, key, "expected a number, got '" + v + "'");
    return parsed;
  }

 private:
  const ConfigValues& values_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& base_dir) {
  ExperimentConfig cfg;
  cfg.source_text = std::string(text);

  // Boost's INI reader only knows ';' comments.
  std::stringstream cleaned;
  {
    std::stringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      cleaned << (t.rfind('#', 0) == 0 ? std::string() : line) << '\n';
    }
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(cleaned, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("config parse error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ValidationError("config key '" + section + "' must sit inside a [section]");
    }
    const auto allowed = allowed_keys().find(section);
    if (allowed == allowed_keys().end()) throw ValidationError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!allowed->second.count(key)) fail(section, key, "unknown key");
      cfg.values[section][key] = trim(value.data());
    }
  }

  const Reader r(cfg.values);
  if (const std::string* v = r.get("data", "path")) cfg.dataset_path = resolve(base_dir, *v);
  if (const std::string* v = r.get("data", "lexicons")) cfg.lexicon_path = resolve(base_dir, *v);
  if (cfg.dataset_path.has_value() != cfg.lexicon_path.has_value()) {
    fail("data", cfg.dataset_path ? "lexicons" : "path", "path and lexicons must be given together");
  }

  r.size("synth", "n_objects", cfg.synth.n_objects);
  for (TraitKind t : kAllTraits) {
    const std::string name(trait_name(t));
    SynthTrait& st = cfg.synth.traits[t];
    r.size("synth", "classes_" + name, st.classes);
    r.size("synth", "dim_" + name, st.dim);
    r.real("synth", "mention_rate_" + name, st.mention_rate);
  }
  r.real("synth", "sigma", cfg.synth.sigma);
  r.real("synth", "separation", cfg.synth.separation);
  r.real("synth", "label_noise", cfg.synth.label_noise);
  r.real("synth", "distractor_rate", cfg.synth.distractor_rate);
  r.u64("synth", "seed", cfg.synth.seed);
  if (const std::string* v = r.get("synth", "name")) cfg.synth.name = *v;
  try {
    cfg.synth.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config [synth] ") + e.what());
  }

  const std::string* strategies = r.get("experiment", "strategies");
  if (!strategies) strategies = r.get("experiment", "sampler");
  if (strategies) {
    cfg.strategies.clear();
    for (const std::string& key : split_list(*strategies)) {
      const auto kind = parse_sampler(key);
      if (!kind) fail("experiment", "strategies", "unknown sampler '" + key + "'");
      for (SamplerKind seen : cfg.strategies) {
        if (seen == *kind) fail("experiment", "strategies", "sampler '" + key + "' listed twice");
      }
      cfg.strategies.push_back(*kind);
    }
    if (cfg.strategies.empty()) fail("experiment", "strategies", "no sampler given");
  }
  if (const std::string* v = r.get("experiment", "classifier")) {
    const auto kind = parse_classifier(*v);
    if (!kind) fail("experiment", "classifier", "expected lr, svm or mlp, got '" + *v + "'");
    cfg.classifier = *kind;
  }
  if (const std::string* v = r.get("experiment", "traits")) {
    cfg.traits.clear();
    for (const std::string& key : split_list(*v)) {
      const auto trait = parse_trait(key);
      if (!trait) fail("experiment", "traits", "unknown trait '" + key + "'");
      for (TraitKind seen : cfg.traits) {
        if (seen == *trait) fail("experiment", "traits", "trait '" + key + "' listed twice");
      }
      cfg.traits.push_back(*trait);
    }
    if (cfg.traits.empty()) fail("experiment", "traits", "no trait given");
  }
  r.size("experiment", "batch_size", cfg.batch_size);
  if (cfg.batch_size < 1) fail("experiment", "batch_size", "must be >= 1");
  r.size("experiment", "budget", cfg.budget);
  r.size("experiment", "runs", cfg.runs);
  if (cfg.runs < 1) fail("experiment", "runs", "must be >= 1");
  r.u64("experiment", "seed", cfg.seed);
  r.real("experiment", "test_fraction", cfg.test_fraction);
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) fail("experiment", "test_fraction", "must lie in (0, 1)");
  r.real("experiment", "f1_threshold", cfg.f1_threshold);
  if (!(cfg.f1_threshold > 0.0 && cfg.f1_threshold < 1.0)) fail("experiment", "f1_threshold", "must lie in (0, 1)");
  r.real("experiment", "language_weight", cfg.language_weight);
  if (!(cfg.language_weight >= 0.0)) fail("experiment", "language_weight", "must be >= 0");
  r.size("experiment", "embedding_dim", cfg.embedding_dim);
  if (cfg.embedding_dim < 1) fail("experiment", "embedding_dim", "must be >= 1");
  r.real("experiment", "l2", cfg.classifier_params.l2);
  if (!(cfg.classifier_params.l2 >= 0.0)) fail("experiment", "l2", "must be >= 0");
  r.real("experiment", "svm_c", cfg.classifier_params.svm_c);
  if (!(cfg.classifier_params.svm_c >= 0.0)) fail("experiment", "svm_c", "must be >= 0");
  r.size("experiment", "mlp_hidden", cfg.classifier_params.mlp_hidden);
  if (cfg.classifier_params.mlp_hidden < 1) fail("experiment", "mlp_hidden", "must be >= 1");
  r.size("experiment", "mlp_epochs", cfg.classifier_params.mlp_epochs);
  r.real("experiment", "mlp_lr", cfg.classifier_params.mlp_lr);
  if (!(cfg.classifier_params.mlp_lr > 0.0)) fail("experiment", "mlp_lr", "must be positive");

  r.size("gmm", "components", cfg.components);
  if (cfg.components < 1) fail("gmm", "components", "must be >= 1");
  r.flag("gmm", "cv", cfg.components_cv);
  if (const std::string* v = r.get("gmm", "grid")) {
    cfg.component_grid.clear();
    for (const std::string& item : split_list(*v)) {
      const double c = Reader::parse_real("gmm", "grid", item);
      if (!(c >= 1.0) || c != static_cast<double>(static_cast<std::size_t>(c))) {
        fail("gmm", "grid", "entries must be positive integers");
      }
      cfg.component_grid.push_back(static_cast<std::size_t>(c));
    }
    if (cfg.component_grid.empty()) fail("gmm", "grid", "empty grid");
  }
  r.size("gmm", "folds", cfg.cv_folds);
  if (cfg.cv_folds < 2) fail("gmm", "folds", "must be >= 2");
  if (const std::string* v = r.get("gmm", "covariance")) {
    if (*v == "diagonal") {
      cfg.covariance = CovarianceType::Diagonal;
    } else if (*v == "full") {
      cfg.covariance = CovarianceType::Full;
    } else {
      fail("gmm", "covariance", "expected diagonal or full, got '" + *v + "'");
    }
  }

  r.real("dpp", "h", cfg.bandwidth);
  if (!(cfg.bandwidth > 0.0)) fail("dpp", "h", "must be positive");
  r.flag("dpp", "cv", cfg.bandwidth_cv);
  if (const std::string* v = r.get("dpp", "grid")) {
    cfg.bandwidth_grid.clear();
    for (const std::string& item : split_list(*v)) {
      const double h = Reader::parse_real("dpp", "grid", item);
      if (!(h > 0.0)) fail("dpp", "grid", "entries must be positive");
      cfg.bandwidth_grid.push_back(h);
    }
    if (cfg.bandwidth_grid.empty()) fail("dpp", "grid", "empty grid");
  }

  if (const std::string* v = r.get("output", "dir")) cfg.output_dir = resolve(base_dir, *v);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return parse_config(ss.str(), parent.empty() ? "." : parent.string());
}

}  // namespace groundal::cli
