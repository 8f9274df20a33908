#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xlft/codemix.hpp"
#include "xlft/model.hpp"
#include "xlft/taxonomy.hpp"
#include "xlft/tensor.hpp"

namespace xlft {

struct VqaExample {
  std::string qid;
  std::vector<std::string> question;
  std::string image_id;
  std::size_t label = 0;
  std::string lang;

  friend bool operator==(const VqaExample&, const VqaExample&) = default;
};

using Split = std::vector<VqaExample>;

// JSONL, one {"qid","question","image_id","label","lang"} object per line.
// Unknown or missing fields are errors reported with their line number.
Split load_split(const std::filesystem::path& path);
void save_split(const Split& split, const std::filesystem::path& path);

// Token strings to ids. Id 0 is padding and id 1 stands for unknown tokens.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  std::size_t add(const std::string& token);
  std::size_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }

  // One token per line; the line number is the id.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// image_id -> region features [num_regions, feat_dim].
class FeatureStore {
 public:
  void add(std::string image_id, Tensor features);
  const Tensor& at(std::string_view image_id) const;
  bool contains(std::string_view image_id) const;
  std::size_t size() const noexcept { return features_.size(); }

  // Features of the images referenced by `split`, one XLFT container.
  void save(const std::filesystem::path& path, const Split& split) const;
  void save(const std::filesystem::path& path) const;
  // Merges a container into the store.
  void load(const std::filesystem::path& path);

 private:
  std::map<std::string, Tensor, std::less<>> features_;
};

// Model inputs of one example.
struct EncodedExample {
  std::vector<std::size_t> token_ids;
  const Tensor* image_feats = nullptr;
  std::size_t label = 0;
};

EncodedExample encode_example(const std::vector<std::string>& question, const VqaExample& example,
                              const Vocabulary& vocab, const FeatureStore& features);
// Pads questions to the longest one in the batch.
MultimodalBatch make_batch(std::span<const EncodedExample> examples, const ModelConfig& config);

struct SyntheticSpec {
  std::size_t num_labels = 64;
  std::size_t num_synsets = 24;
  // Probability that a synset gets a hypernym among the earlier synsets.
  double hypernym_density = 0.35;
  std::size_t num_train = 5000;
  std::size_t num_dev = 500;
  std::size_t num_test = 1000;
  std::size_t vocab_size = 512;
  std::size_t num_regions = 8;
  std::size_t feat_dim = 16;
  std::size_t max_question_len = 16;
  std::size_t embedding_dim = 300;
  std::vector<std::string> languages = {"xa", "xb", "xc"};
  std::size_t translations_per_word = 2;
  // Regions carrying the answer's concept; the rest are distractor objects.
  std::size_t informative_regions = 3;
  double feature_noise = 0.5;
  // Probability that a question's cue word names a wrong synset.
  double cue_noise = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static SyntheticSpec from_json(std::string_view text);
};

struct SyntheticCorpus {
  Split train, dev, test;
  FeatureStore features;
  LabelTaxonomy taxonomy;
  EmbeddingTable embeddings;
  BilingualLexicon lexicon;
  Vocabulary vocab;
};

// GQA-like corpus whose label space has synsets and a hypernym forest.
// Questions name the answer's synset through cue words; image regions carry
// a noisy view of the answer's latent concept; label embeddings follow the
// same latent structure. Deterministic in spec.seed.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Fully translated copies of `test` per language (labels and images kept).
std::map<std::string, Split> build_target_test_sets(const Split& test,
                                                    const BilingualLexicon& lexicon,
                                                    const std::vector<std::string>& languages);

}  // namespace xlft
