#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "xlft/data.hpp"
#include "xlft/model.hpp"
#include "xlft/rng.hpp"
#include "xlft/taxonomy.hpp"

namespace xlft::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    RngStream rng(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)), "tempdir");
    path_ = std::filesystem::temp_directory_path() /
            ("xlft-" + tag + "-" + std::to_string(rng.next_u64() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// sofa/couch share a synset; skateboarder -> skater and girl(s) -> woman are
// hypernym edges; car and zebra are unrelated to everything.
inline LabelTaxonomy toy_taxonomy() {
  return LabelTaxonomy({"sofa", "couch", "skater", "skateboarder", "girl", "girls", "woman", "car", "zebra"},
                       {{0, 1}, {2}, {3}, {4, 5}, {6}, {7}, {8}},
                       {{2, 1}, {3, 4}});
}

inline ModelConfig tiny_model(std::uint64_t seed = 0) {
  ModelConfig c;
  c.vocab_size = 20;
  c.num_labels = 6;
  c.feat_dim = 3;
  c.num_regions = 2;
  c.hidden_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ffn_dim = 8;
  c.max_question_len = 5;
  c.seed = seed;
  return c;
}

inline MultimodalBatch random_batch(const ModelConfig& c, std::size_t batch, std::size_t len,
                                    std::uint64_t seed) {
  RngStream rng(seed, "test-batch");
  MultimodalBatch b;
  b.batch_size = batch;
  b.question_len = len;
  for (std::size_t i = 0; i < batch * len; ++i) b.token_ids.push_back(1 + rng.index(c.vocab_size - 1));
  b.image_feats = Tensor({batch * c.num_regions, c.feat_dim});
  for (auto& v : b.image_feats.data()) v = rng.normal();
  for (std::size_t i = 0; i < batch; ++i) b.labels.push_back(rng.index(c.num_labels));
  return b;
}

// Small corpus for training-loop tests.
inline SyntheticSpec tiny_spec(std::uint64_t seed = 0) {
  SyntheticSpec s;
  s.num_labels = 12;
  s.num_synsets = 5;
  s.num_train = 120;
  s.num_dev = 20;
  s.num_test = 40;
  s.vocab_size = 200;
  s.num_regions = 3;
  s.feat_dim = 4;
  s.max_question_len = 10;
  s.embedding_dim = 16;
  s.languages = {"xa", "xb"};
  s.informative_regions = 2;
  s.seed = seed;
  return s;
}

inline ModelConfig model_for_spec(const SyntheticSpec& s, std::uint64_t seed = 0) {
  ModelConfig c;
  c.vocab_size = s.vocab_size;
  c.num_labels = s.num_labels;
  c.feat_dim = s.feat_dim;
  c.num_regions = s.num_regions;
  c.hidden_dim = 16;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.max_question_len = s.max_question_len;
  c.seed = seed;
  return c;
}

}  // namespace xlft::testing
