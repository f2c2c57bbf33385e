#pragma once

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

#include "groundal/data.hpp"

namespace groundal {

using TokenList = std::vector<std::string>;

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::set<std::string> words) : words_(std::move(words)) {}

  bool contains(std::string_view token) const { return words_.count(std::string(token)) != 0; }
  std::size_t size() const { return words_.size(); }
  const std::set<std::string>& words() const { return words_; }

 private:
  std::set<std::string> words_;
};

// The frozen 120-word English list compiled into the library.
const StopwordList& default_stopwords();
// One token per line; blank lines and '#' comments ignored.
StopwordList load_stopwords(const std::string& path);

// Rule-based suffix stemmer: -ies, -sses, -es, -s, -ing, -ed with undoubling.
// Applied to a fixpoint, so stem(stem(w)) == stem(w).
std::string stem(std::string_view word);

// Lowercase, split on anything non-alphanumeric (apostrophes are deleted),
// drop stopwords, stem. A token is dropped if either its surface form or its
// stem is a stopword.
TokenList normalize(std::string_view text, const StopwordList& stopwords = default_stopwords());

struct TermStats {
  std::size_t document_frequency = 0;
  double term_frequency = 0.0;  // mean count over the documents containing the term
  double idf = 0.0;             // ln((1+N)/(1+df)) + 1
  double score = 0.0;           // term_frequency * idf
};

struct TfidfTable {
  std::size_t documents = 0;
  std::map<std::string, TermStats> terms;

  const TermStats* find(std::string_view token) const;
  double idf(std::string_view token) const;    // 0 for unknown tokens
  double score(std::string_view token) const;  // 0 for unknown tokens
};

TfidfTable fit_tfidf(std::span<const TokenList> corpus);

// Score of a token that occurs once in `fraction` of the N documents; the
// default concept threshold uses fraction 0.6, i.e. tokens present in more
// than 60% of descriptions are treated as generic.
double document_fraction_threshold(std::size_t documents, double fraction);
inline constexpr double kGenericDocumentFraction = 0.6;

struct Lexicons {
  std::map<TraitKind, std::set<std::string>> words;  // stemmed

  bool contains(TraitKind trait, std::string_view token) const;
};

// Sections `[color]`, `[shape]`, `[object]`, one token per line.
Lexicons parse_lexicons(std::istream& in);
Lexicons load_lexicons(const std::string& path);
void write_lexicons(const Lexicons& lexicons, std::ostream& out);

struct ConceptVocabulary {
  std::map<TraitKind, std::vector<std::string>> concepts;  // sorted; id = position
  TfidfTable tfidf;
  double threshold = 0.0;
  std::vector<std::string> warnings;

  const std::vector<std::string>& of(TraitKind trait) const;
  std::optional<std::size_t> id_of(TraitKind trait, std::string_view concept_name) const;
  std::size_t total() const;
};

// Tokens of the given instances' descriptions, in index order.
std::vector<TokenList> tokenize_descriptions(const Dataset& dataset,
                                             std::span<const InstanceIndex> ids,
                                             const StopwordList& stopwords = default_stopwords());

// Lexicon-matched tokens scoring >= threshold. With no threshold the
// generic-document-fraction rule above is used.
ConceptVocabulary extract_concepts(const TfidfTable& tfidf, const Lexicons& lexicons,
                                   std::optional<double> threshold = std::nullopt);
ConceptVocabulary extract_concepts(const Dataset& dataset, std::span<const InstanceIndex> ids,
                                   const Lexicons& lexicons,
                                   std::optional<double> threshold = std::nullopt);

struct ConceptLabels {
  std::vector<InstanceIndex> positives;  // ascending
  std::vector<InstanceIndex> negatives;  // ascending
};

struct ConceptAssignment {
  std::map<TraitKind, std::map<std::string, ConceptLabels>> labels;
  std::vector<std::string> warnings;

  const ConceptLabels* find(TraitKind trait, std::string_view concept_name) const;
};

struct AssignmentOptions {
  double negative_similarity = 0.95;  // s_neg
  bool drop_empty = true;             // drop concepts without positives
};

// Positives contain the concept token; negatives do not and have cosine
// similarity < s_neg to every positive. Instances lacking the trait's
// features are in neither set.
ConceptAssignment assign_labels(const Dataset& dataset, std::span<const InstanceIndex> ids,
                                const ConceptVocabulary& vocabulary,
                                const AssignmentOptions& options = {});

// Writes Instance::concepts from the vocabulary for every instance.
void annotate_concepts(Dataset& dataset, const ConceptVocabulary& vocabulary);

struct DescriptionEmbedding {
  Eigen::VectorXd vector;
  std::string method = "tfidf-random-projection";
};

inline constexpr std::size_t kDefaultEmbeddingDim = 64;

// Unnormalized projection: sum over tokens of count * idf * P_token, where
// P_token has N(0,1)/sqrt(E) entries seeded by (seed, token).
Eigen::VectorXd project_description(std::string_view text, const TfidfTable& tfidf,
                                    std::size_t dim, std::uint64_t seed);
DescriptionEmbedding embed_description(std::string_view text, const ConceptVocabulary& vocabulary,
                                       std::size_t dim, std::uint64_t seed);

}  // namespace groundal
