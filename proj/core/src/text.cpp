#include "groundal/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "groundal/error.hpp"
#include "groundal/log.hpp"
#include "groundal/random.hpp"
#include "groundal/stats.hpp"

namespace groundal {
namespace {

constexpr const char* kStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "could", "did", "do", "does", "doing", "during", "each", "few",
    "for", "from", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most",
    "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "same", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "theirs", "them", "then", "there", "these", "they",
    "this", "those", "through", "to", "too", "under", "until", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "really", "quite",
};

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

bool has_vowel(std::string_view s) { return std::any_of(s.begin(), s.end(), is_vowel); }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string undouble(std::string s) {
  const std::size_t n = s.size();
  if (n >= 2 && s[n - 1] == s[n - 2] && !is_vowel(s[n - 1]) && s[n - 1] != 'l' &&
      s[n - 1] != 's' && s[n - 1] != 'z') {
    s.pop_back();
  }
  return s;
}

std::string stem_once(std::string_view w) {
  const std::size_t n = w.size();
  if (n <= 3) return std::string(w);
  if (ends_with(w, "ies") && n > 4) return std::string(w.substr(0, n - 3)) + "y";
  if (ends_with(w, "sses")) return std::string(w.substr(0, n - 2));
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return std::string(w);
  if (ends_with(w, "es") && n > 4) {
    const char prev = w[n - 3];
    if (prev == 's' || prev == 'x' || prev == 'z' || ends_with(w, "ches") || ends_with(w, "shes")) {
      return std::string(w.substr(0, n - 2));
    }
  }
  if (w.back() == 's') return std::string(w.substr(0, n - 1));
  if (ends_with(w, "ing") && n - 3 >= 3 && has_vowel(w.substr(0, n - 3))) {
    return undouble(std::string(w.substr(0, n - 3)));
  }
  if (ends_with(w, "ed") && n - 2 >= 3 && has_vowel(w.substr(0, n - 2))) {
    return undouble(std::string(w.substr(0, n - 2)));
  }
  return std::string(w);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string trim_copy(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

const StopwordList& default_stopwords() {
  static const StopwordList list{std::set<std::string>(std::begin(kStopwords), std::end(kStopwords))};
  return list;
}

StopwordList load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file '" + path + "'");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    line = lowercase(trim_copy(line));
    if (line.empty() || line.front() == '#') continue;
    words.insert(line);
  }
  return StopwordList(std::move(words));
}

std::string stem(std::string_view word) {
  std::string current(word);
  while (true) {
    std::string next = stem_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

TokenList normalize(std::string_view text, const StopwordList& stopwords) {
  TokenList tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (!stopwords.contains(current)) {
      std::string stemmed = stem(current);
      if (!stemmed.empty() && !stopwords.contains(stemmed)) tokens.push_back(std::move(stemmed));
    }
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (c == '\'') continue;
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

const TermStats* TfidfTable::find(std::string_view token) const {
  const auto it = terms.find(std::string(token));
  return it == terms.end() ? nullptr : &it->second;
}

double TfidfTable::idf(std::string_view token) const {
  const TermStats* t = find(token);
  return t ? t->idf : 0.0;
}

double TfidfTable::score(std::string_view token) const {
  const TermStats* t = find(token);
  return t ? t->score : 0.0;
}

TfidfTable fit_tfidf(std::span<const TokenList> corpus) {
  if (corpus.empty()) throw ValidationError("fit_tfidf: corpus is empty");
  TfidfTable table;
  table.documents = corpus.size();
  std::map<std::string, std::size_t> total_count;
  for (const TokenList& doc : corpus) {
    std::map<std::string, std::size_t> counts;
    for (const std::string& tok : doc) ++counts[tok];
    for (const auto& [tok, count] : counts) {
      ++table.terms[tok].document_frequency;
      total_count[tok] += count;
    }
  }
  const double n = static_cast<double>(table.documents);
  for (auto& [tok, stats] : table.terms) {
    const double df = static_cast<double>(stats.document_frequency);
    stats.term_frequency = static_cast<double>(total_count[tok]) / df;
    stats.idf = std::log((1.0 + n) / (1.0 + df)) + 1.0;
    stats.score = stats.term_frequency * stats.idf;
  }
  return table;
}

double document_fraction_threshold(std::size_t documents, double fraction) {
  const double n = static_cast<double>(documents);
  return std::log((1.0 + n) / (1.0 + fraction * n)) + 1.0;
}

bool Lexicons::contains(TraitKind trait, std::string_view token) const {
  const auto it = words.find(trait);
  return it != words.end() && it->second.count(std::string(token)) != 0;
}

Lexicons parse_lexicons(std::istream& in) {
  Lexicons lex;
  std::optional<TraitKind> section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_copy(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw DataError("lexicon line " + std::to_string(line_no) + ": unterminated section header");
      }
      section = parse_trait(lowercase(line.substr(1, line.size() - 2)));
      if (!section) {
        throw DataError("lexicon line " + std::to_string(line_no) + ": unknown section " + line);
      }
      lex.words[*section];
      continue;
    }
    if (!section) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": token before any section");
    }
    lex.words[*section].insert(stem(lowercase(line)));
  }
  return lex;
}

Lexicons load_lexicons(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file '" + path + "'");
  return parse_lexicons(in);
}

void write_lexicons(const Lexicons& lexicons, std::ostream& out) {
  for (TraitKind trait : kAllTraits) {
    const auto it = lexicons.words.find(trait);
    if (it == lexicons.words.end()) continue;
    out << '[' << trait_name(trait) << "]\n";
    for (const std::string& w : it->second) out << w << '\n';
  }
}

const std::vector<std::string>& ConceptVocabulary::of(TraitKind trait) const {
  static const std::vector<std::string> kEmpty;
  const auto it = concepts.find(trait);
  return it == concepts.end() ? kEmpty : it->second;
}

std::optional<std::size_t> ConceptVocabulary::id_of(TraitKind trait, std::string_view concept_name) const {
  const auto& list = of(trait);
  const auto it = std::lower_bound(list.begin(), list.end(), concept_name);
  if (it == list.end() || *it != concept_name) return std::nullopt;
  return static_cast<std::size_t>(it - list.begin());
}

std::size_t ConceptVocabulary::total() const {
  std::size_t n = 0;
  for (const auto& [trait, list] : concepts) n += list.size();
  return n;
}

std::vector<TokenList> tokenize_descriptions(const Dataset& dataset,
                                             std::span<const InstanceIndex> ids,
                                             const StopwordList& stopwords) {
  std::vector<TokenList> docs;
  docs.reserve(ids.size());
  for (InstanceIndex i : ids) docs.push_back(normalize(dataset.instances.at(i).description, stopwords));
  return docs;
}

ConceptVocabulary extract_concepts(const TfidfTable& tfidf, const Lexicons& lexicons,
                                   std::optional<double> threshold) {
  ConceptVocabulary vocab;
  vocab.tfidf = tfidf;
  vocab.threshold = threshold.value_or(
      document_fraction_threshold(tfidf.documents, kGenericDocumentFraction));
  for (TraitKind trait : kAllTraits) {
    auto& list = vocab.concepts[trait];
    for (const auto& [token, stats] : tfidf.terms) {
      if (stats.score >= vocab.threshold && lexicons.contains(trait, token)) list.push_back(token);
    }
    if (list.empty()) {
      const std::string msg = "no " + std::string(trait_name(trait)) + " concepts extracted";
      vocab.warnings.push_back(msg);
      log_warning(msg);
    }
  }
  return vocab;
}

ConceptVocabulary extract_concepts(const Dataset& dataset, std::span<const InstanceIndex> ids,
                                   const Lexicons& lexicons, std::optional<double> threshold) {
  const auto docs = tokenize_descriptions(dataset, ids);
  return extract_concepts(fit_tfidf(docs), lexicons, threshold);
}

const ConceptLabels* ConceptAssignment::find(TraitKind trait, std::string_view concept_name) const {
  const auto t = labels.find(trait);
  if (t == labels.end()) return nullptr;
  const auto c = t->second.find(std::string(concept_name));
  return c == t->second.end() ? nullptr : &c->second;
}

ConceptAssignment assign_labels(const Dataset& dataset, std::span<const InstanceIndex> ids,
                                const ConceptVocabulary& vocabulary,
                                const AssignmentOptions& options) {
  ConceptAssignment out;
  std::vector<std::set<std::string>> tokens;
  tokens.reserve(ids.size());
  for (InstanceIndex i : ids) {
    const TokenList toks = normalize(dataset.instances.at(i).description);
    tokens.emplace_back(toks.begin(), toks.end());
  }
  for (const auto& [trait, concepts] : vocabulary.concepts) {
    auto& per_trait = out.labels[trait];
    for (const std::string& term : concepts) {
      ConceptLabels labels;
      std::vector<std::size_t> maybe_negative;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        if (!dataset.instances.at(ids[r]).has_trait(trait)) continue;
        if (tokens[r].count(term)) {
          labels.positives.push_back(ids[r]);
        } else {
          maybe_negative.push_back(r);
        }
      }
      if (labels.positives.empty() && options.drop_empty) {
        const std::string msg = "concept '" + term + "' (" + std::string(trait_name(trait)) +
                                ") has no positives; dropped";
        out.warnings.push_back(msg);
        log_warning(msg);
        continue;
      }
      for (std::size_t r : maybe_negative) {
        const Eigen::VectorXd& x = dataset.instances.at(ids[r]).feature(trait);
        bool near_positive = false;
        for (InstanceIndex p : labels.positives) {
          if (cosine_similarity(x, dataset.instances.at(p).feature(trait)) >=
              options.negative_similarity) {
            near_positive = true;
            break;
          }
        }
        if (!near_positive) labels.negatives.push_back(ids[r]);
      }
      std::sort(labels.positives.begin(), labels.positives.end());
      std::sort(labels.negatives.begin(), labels.negatives.end());
      per_trait.emplace(term, std::move(labels));
    }
  }
  return out;
}

void annotate_concepts(Dataset& dataset, const ConceptVocabulary& vocabulary) {
  for (Instance& inst : dataset.instances) {
    inst.concepts.clear();
    const TokenList toks = normalize(inst.description);
    const std::set<std::string> present(toks.begin(), toks.end());
    for (const auto& [trait, concepts] : vocabulary.concepts) {
      auto& set = inst.concepts[trait];
      for (const std::string& c : concepts) {
        if (present.count(c)) set.insert(c);
      }
    }
  }
}

Eigen::VectorXd project_description(std::string_view text, const TfidfTable& tfidf,
                                    std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
  std::map<std::string, std::size_t> counts;
  for (const std::string& tok : normalize(text)) ++counts[tok];
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (const auto& [tok, count] : counts) {
    const TermStats* stats = tfidf.find(tok);
    if (!stats) continue;
    const double weight = static_cast<double>(count) * stats->idf;
    Rng rng = make_rng(derive_seed(seed, fnv1a(tok)));
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] += weight * scale * standard_normal(rng);
  }
  return v;
}

DescriptionEmbedding embed_description(std::string_view text, const ConceptVocabulary& vocabulary,
                                       std::size_t dim, std::uint64_t seed) {
  DescriptionEmbedding e;
  e.vector = project_description(text, vocabulary.tfidf, dim, seed);
  const double norm = e.vector.norm();
  if (norm > 0.0) e.vector /= norm;
  return e;
}

}  // namespace groundal
