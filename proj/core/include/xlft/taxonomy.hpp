#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xlft/error.hpp"
#include "xlft/tensor.hpp"

namespace xlft {

enum class TaxonomyErrorKind {
  empty,
  duplicate_label,
  not_a_partition,
  unknown_synset,
  cycle,
  unknown_label,
};

class TaxonomyError : public Error {
 public:
  TaxonomyError(TaxonomyErrorKind kind, const std::string& what)
      : Error(ErrorCategory::taxonomy, what), kind_(kind) {}
  TaxonomyErrorKind kind() const noexcept { return kind_; }

 private:
  TaxonomyErrorKind kind_;
};

// How a candidate label stands to a reference (truth) label.
enum class Relation { synonym, hyponym, hypernym, unrelated };

std::string_view to_string(Relation r);
// Short tag used in confusion tables: "syn", "hpo", "hyp" or "unrelated".
std::string_view relation_tag(Relation r);

// Labels grouped into synsets with a hypernym DAG over the synsets.
// Relations follow the transitive closure of the edges.
class LabelTaxonomy {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;  // (child synset, parent synset)

  // Validates and builds; throws TaxonomyError.
  LabelTaxonomy(std::vector<std::string> labels, std::vector<std::vector<std::size_t>> synsets,
                std::vector<Edge> hypernym_edges);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t num_synsets() const noexcept { return synsets_.size(); }
  const std::vector<std::vector<std::size_t>>& synsets() const noexcept { return synsets_; }
  const std::vector<Edge>& hypernym_edges() const noexcept { return edges_; }

  std::size_t index_of(std::string_view label) const;
  std::size_t synset_of(std::size_t label) const { return synset_of_.at(label); }

  Relation relation(std::size_t candidate, std::size_t truth) const;
  Relation relation(std::string_view candidate, std::string_view truth) const;

  std::string to_json() const;
  static LabelTaxonomy from_json(std::string_view text);

 private:
  // True when a directed path of one or more hypernym edges leads from a to b.
  bool reaches(std::size_t a, std::size_t b) const { return reach_[a * synsets_.size() + b]; }

  std::vector<std::string> labels_;
  std::vector<std::vector<std::size_t>> synsets_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> synset_of_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<bool> reach_;
};

LabelTaxonomy load_taxonomy(const std::filesystem::path& path);
void save_taxonomy(const LabelTaxonomy& taxonomy, const std::filesystem::path& path);

enum class DistanceSource { wordnet, embedding };

std::string_view to_string(DistanceSource s);
DistanceSource distance_source_from_string(std::string_view name);

// Risk matrix over the label space: at(c, t) is the distance of candidate c
// from truth t, in [0, 1] with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix(DistanceSource source, std::size_t num_labels, std::vector<double> values);
  DistanceMatrix(DistanceSource source, const Tensor& values);

  DistanceSource source() const noexcept { return source_; }
  std::size_t size() const noexcept { return n_; }
  double at(std::size_t candidate, std::size_t truth) const { return values_[candidate * n_ + truth]; }
  const std::vector<double>& values() const noexcept { return values_; }
  Tensor to_tensor() const;
  // Entry name inside an XLFT container: "distance.<source>".
  std::string container_name() const;

 private:
  DistanceSource source_;
  std::size_t n_;
  std::vector<double> values_;
};

// 0 for synonyms, d1 when the candidate is a hyponym of the truth, d2 when it
// is a hypernym, 1 otherwise. Requires 0 < d1, d2 < 1.
DistanceMatrix wordnet_distance_matrix(const LabelTaxonomy& taxonomy, double d1, double d2);

// Word vectors of a fixed dimension (GloVe text layout on disk).
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 300) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return order_.size(); }
  void add(std::string word, std::vector<double> vector);
  const std::vector<double>* find(std::string_view word) const;
  const std::vector<std::string>& words() const noexcept { return order_; }

 private:
  std::size_t dim_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

// Vector of a label; multi-word labels average their in-vocabulary words.
// Empty when no word of the label is known.
std::optional<std::vector<double>> label_vector(const EmbeddingTable& table, std::string_view label);

// 1 - cosine similarity clamped to [0, 1]; pairs involving an unknown or
// zero-norm vector get 1; the diagonal is 0.
DistanceMatrix embedding_distance_matrix(const EmbeddingTable& table,
                                         const std::vector<std::string>& labels);

}  // namespace xlft
