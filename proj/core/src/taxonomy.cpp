#include "xlft/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace xlft {

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::synonym: return "synonym";
    case Relation::hyponym: return "hyponym";
    case Relation::hypernym: return "hypernym";
    case Relation::unrelated: return "unrelated";
  }
  return "unrelated";
}

std::string_view relation_tag(Relation r) {
  switch (r) {
    case Relation::synonym: return "syn";
    case Relation::hyponym: return "hpo";
    case Relation::hypernym: return "hyp";
    case Relation::unrelated: return "unrelated";
  }
  return "unrelated";
}

LabelTaxonomy::LabelTaxonomy(std::vector<std::string> labels,
                             std::vector<std::vector<std::size_t>> synsets,
                             std::vector<Edge> hypernym_edges)
    : labels_(std::move(labels)), synsets_(std::move(synsets)), edges_(std::move(hypernym_edges)) {
  if (labels_.empty()) throw TaxonomyError(TaxonomyErrorKind::empty, "taxonomy has no labels");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], i).second) {
      throw TaxonomyError(TaxonomyErrorKind::duplicate_label, "duplicate label '" + labels_[i] + "'");
    }
  }

  constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  synset_of_.assign(labels_.size(), kUnassigned);
  for (std::size_t s = 0; s < synsets_.size(); ++s) {
    if (synsets_[s].empty()) {
      throw TaxonomyError(TaxonomyErrorKind::not_a_partition, "synset " + std::to_string(s) + " is empty");
    }
    for (std::size_t label : synsets_[s]) {
      if (label >= labels_.size()) {
        throw TaxonomyError(TaxonomyErrorKind::not_a_partition,
                            "synset " + std::to_string(s) + " references label index " +
                                std::to_string(label));
      }
      if (synset_of_[label] != kUnassigned) {
        throw TaxonomyError(TaxonomyErrorKind::not_a_partition,
                            "label '" + labels_[label] + "' belongs to more than one synset");
      }
      synset_of_[label] = s;
    }
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (synset_of_[i] == kUnassigned) {
      throw TaxonomyError(TaxonomyErrorKind::not_a_partition,
                          "label '" + labels_[i] + "' belongs to no synset");
    }
  }

  const std::size_t S = synsets_.size();
  std::vector<std::vector<std::size_t>> parents(S);
  for (const auto& [child, parent] : edges_) {
    if (child >= S || parent >= S) {
      throw TaxonomyError(TaxonomyErrorKind::unknown_synset,
                          "hypernym edge [" + std::to_string(child) + ", " +
                              std::to_string(parent) + "] references an unknown synset");
    }
    parents[child].push_back(parent);
  }

  // Cycle check by iterative DFS colouring.
  std::vector<int> colour(S, 0);
  for (std::size_t root = 0; root < S; ++root) {
    if (colour[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < parents[node].size()) {
        const std::size_t p = parents[node][next++];
        if (colour[p] == 1) {
          throw TaxonomyError(TaxonomyErrorKind::cycle,
                              "hypernym graph has a cycle through synset " + std::to_string(p));
        }
        if (colour[p] == 0) {
          colour[p] = 1;
          stack.emplace_back(p, 0);
        }
      } else {
        colour[node] = 2;
        stack.pop_back();
      }
    }
  }

  reach_.assign(S * S, false);
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<std::size_t> frontier = parents[s];
    while (!frontier.empty()) {
      const std::size_t p = frontier.back();
      frontier.pop_back();
      if (reach_[s * S + p]) continue;
      reach_[s * S + p] = true;
      frontier.insert(frontier.end(), parents[p].begin(), parents[p].end());
    }
  }
}

std::size_t LabelTaxonomy::index_of(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) {
    throw TaxonomyError(TaxonomyErrorKind::unknown_label, "unknown label '" + std::string(label) + "'");
  }
  return it->second;
}

Relation LabelTaxonomy::relation(std::size_t candidate, std::size_t truth) const {
  if (candidate >= labels_.size() || truth >= labels_.size()) {
    throw TaxonomyError(TaxonomyErrorKind::unknown_label, "label index out of range");
  }
  const std::size_t a = synset_of_[candidate], b = synset_of_[truth];
  if (a == b) return Relation::synonym;
  if (reaches(a, b)) return Relation::hyponym;
  if (reaches(b, a)) return Relation::hypernym;
  return Relation::unrelated;
}

Relation LabelTaxonomy::relation(std::string_view candidate, std::string_view truth) const {
  return relation(index_of(candidate), index_of(truth));
}

std::string LabelTaxonomy::to_json() const {
  nlohmann::ordered_json j;
  j["labels"] = labels_;
  j["synsets"] = synsets_;
  auto edges = nlohmann::json::array();
  for (const auto& [c, p] : edges_) edges.push_back({c, p});
  j["hypernyms"] = edges;
  return j.dump(1);
}

LabelTaxonomy LabelTaxonomy::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::parse, std::string("taxonomy: ") + e.what());
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "labels" && key != "synsets" && key != "hypernyms") {
        throw Error(ErrorCategory::parse, "taxonomy: unknown field '" + key + "'");
      }
    }
    auto labels = j.at("labels").get<std::vector<std::string>>();
    auto synsets = j.at("synsets").get<std::vector<std::vector<std::size_t>>>();
    std::vector<Edge> edges;
    if (j.contains("hypernyms")) {
      for (const auto& e : j.at("hypernyms")) {
        if (!e.is_array() || e.size() != 2) {
          throw Error(ErrorCategory::parse, "taxonomy: hypernym edges must be [child, parent] pairs");
        }
        edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
      }
    }
    return LabelTaxonomy(std::move(labels), std::move(synsets), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::parse, std::string("taxonomy: ") + e.what());
  }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

}  // namespace

LabelTaxonomy load_taxonomy(const std::filesystem::path& path) {
  return LabelTaxonomy::from_json(read_file(path));
}

void save_taxonomy(const LabelTaxonomy& taxonomy, const std::filesystem::path& path) {
  write_file(path, taxonomy.to_json() + "\n");
}

std::string_view to_string(DistanceSource s) {
  return s == DistanceSource::wordnet ? "wordnet" : "embedding";
}

DistanceSource distance_source_from_string(std::string_view name) {
  if (name == "wordnet") return DistanceSource::wordnet;
  if (name == "embedding") return DistanceSource::embedding;
  throw Error(ErrorCategory::config, "unknown distance source '" + std::string(name) + "'");
}

DistanceMatrix::DistanceMatrix(DistanceSource source, std::size_t num_labels,
                               std::vector<double> values)
    : source_(source), n_(num_labels), values_(std::move(values)) {
  if (n_ == 0 || values_.size() != n_ * n_) {
    throw Error(ErrorCategory::shape, "distance matrix must be square and non-empty");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCategory::precondition, "distance matrix entry outside [0, 1]");
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (values_[i * n_ + i] != 0.0) {
      throw Error(ErrorCategory::precondition, "distance matrix diagonal must be zero");
    }
  }
}

DistanceMatrix::DistanceMatrix(DistanceSource source, const Tensor& values)
    : DistanceMatrix(source, values.rank() == 2 && values.dim(0) == values.dim(1) ? values.dim(0) : 0,
                     values.values()) {}

Tensor DistanceMatrix::to_tensor() const { return Tensor({n_, n_}, values_); }

std::string DistanceMatrix::container_name() const {
  return "distance." + std::string(to_string(source_));
}

DistanceMatrix wordnet_distance_matrix(const LabelTaxonomy& taxonomy, double d1, double d2) {
  if (!(d1 > 0.0 && d1 < 1.0) || !(d2 > 0.0 && d2 < 1.0)) {
    throw Error(ErrorCategory::config, "wordnet distance requires 0 < d1, d2 < 1");
  }
  const std::size_t C = taxonomy.size();
  std::vector<double> values(C * C);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < C; ++t) {
      double d = 1.0;
      switch (taxonomy.relation(c, t)) {
        case Relation::synonym: d = 0.0; break;
        case Relation::hyponym: d = d1; break;
        case Relation::hypernym: d = d2; break;
        case Relation::unrelated: d = 1.0; break;
      }
      values[c * C + t] = d;
    }
  }
  return DistanceMatrix(DistanceSource::wordnet, C, std::move(values));
}

void EmbeddingTable::add(std::string word, std::vector<double> vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCategory::shape, "embedding for '" + word + "' has dimension " +
                                          std::to_string(vector.size()) + ", table expects " +
                                          std::to_string(dim_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCategory::precondition, "embedding for '" + word + "' is not finite");
    }
  }
  auto [it, inserted] = vectors_.insert_or_assign(word, std::move(vector));
  if (inserted) order_.push_back(std::move(word));
}

const std::vector<double>* EmbeddingTable::find(std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size() || !std::isfinite(v.back())) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(path.string(), lineno, "not a number: '" + tok + "'");
      }
    }
    if (v.empty()) throw ParseError(path.string(), lineno, "word without a vector");
    if (dim == 0) dim = v.size();
    if (v.size() != dim) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(dim) + " values, got " + std::to_string(v.size()));
    }
    rows.emplace_back(std::move(word), std::move(v));
  }
  EmbeddingTable table(dim == 0 ? 300 : dim);
  for (auto& [w, v] : rows) table.add(std::move(w), std::move(v));
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& w : table.words()) {
    out << w;
    for (double v : *table.find(w)) out << ' ' << v;
    out << '\n';
  }
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

std::optional<std::vector<double>> label_vector(const EmbeddingTable& table, std::string_view label) {
  std::istringstream ss{std::string(label)};
  std::string word;
  std::vector<double> total(table.dim(), 0.0);
  std::size_t found = 0;
  while (ss >> word) {
    if (const auto* v = table.find(word)) {
      for (std::size_t i = 0; i < v->size(); ++i) total[i] += (*v)[i];
      ++found;
    }
  }
  if (found == 0) return std::nullopt;
  if (found > 1) {
    for (auto& x : total) x /= static_cast<double>(found);
  }
  return total;
}

DistanceMatrix embedding_distance_matrix(const EmbeddingTable& table,
                                         const std::vector<std::string>& labels) {
  if (labels.empty()) throw Error(ErrorCategory::precondition, "no labels for embedding distances");
  const std::size_t C = labels.size();
  std::vector<std::optional<std::vector<double>>> vecs(C);
  std::vector<double> norms(C, 0.0);
  for (std::size_t i = 0; i < C; ++i) {
    vecs[i] = label_vector(table, labels[i]);
    if (!vecs[i]) continue;
    double n2 = 0.0;
    for (double x : *vecs[i]) n2 += x * x;
    norms[i] = std::sqrt(n2);
    if (norms[i] == 0.0) vecs[i].reset();
  }
  std::vector<double> values(C * C, 1.0);
  for (std::size_t c = 0; c < C; ++c) {
    values[c * C + c] = 0.0;
    for (std::size_t t = c + 1; t < C; ++t) {
      double d = 1.0;
      if (vecs[c] && vecs[t]) {
        double dot = 0.0;
        for (std::size_t i = 0; i < vecs[c]->size(); ++i) dot += (*vecs[c])[i] * (*vecs[t])[i];
        d = std::clamp(1.0 - dot / (norms[c] * norms[t]), 0.0, 1.0);
      }
      values[c * C + t] = d;
      values[t * C + c] = d;
    }
  }
  return DistanceMatrix(DistanceSource::embedding, C, std::move(values));
}

}  // namespace xlft
