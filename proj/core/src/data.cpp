#include "xlft/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "xlft/container.hpp"
#include "xlft/error.hpp"
#include "xlft/rng.hpp"

namespace xlft {

// ---------------------------------------------------------------- splits ---

Split load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  Split split;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    if (!j.is_object()) throw ParseError(path.string(), lineno, "record is not an object");
    for (const auto& [key, _] : j.items()) {
      if (key != "qid" && key != "question" && key != "image_id" && key != "label" && key != "lang") {
        throw ParseError(path.string(), lineno, "unknown field '" + key + "'");
      }
    }
    VqaExample ex;
    try {
      ex.qid = j.at("qid").get<std::string>();
      ex.question = j.at("question").get<std::vector<std::string>>();
      ex.image_id = j.at("image_id").get<std::string>();
      ex.label = j.at("label").get<std::size_t>();
      ex.lang = j.at("lang").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    split.push_back(std::move(ex));
  }
  return split;
}

void save_split(const Split& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  for (const auto& ex : split) {
    nlohmann::ordered_json j;
    j["qid"] = ex.qid;
    j["question"] = ex.question;
    j["image_id"] = ex.image_id;
    j["label"] = ex.label;
    j["lang"] = ex.lang;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

// ------------------------------------------------------------ vocabulary ---

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw Error(ErrorCategory::parse, path.string() + ": vocabulary must start with <pad>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != i) {
      throw ParseError(path.string(), i + 1, "duplicate token '" + tokens[i] + "'");
    }
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

// -------------------------------------------------------------- features ---

void FeatureStore::add(std::string image_id, Tensor features) {
  features_.insert_or_assign(std::move(image_id), std::move(features));
}

const Tensor& FeatureStore::at(std::string_view image_id) const {
  auto it = features_.find(image_id);
  if (it == features_.end()) {
    throw Error(ErrorCategory::precondition, "no features for image '" + std::string(image_id) + "'");
  }
  return it->second;
}

bool FeatureStore::contains(std::string_view image_id) const {
  return features_.find(image_id) != features_.end();
}

void FeatureStore::save(const std::filesystem::path& path, const Split& split) const {
  Container c;
  std::set<std::string> seen;
  for (const auto& ex : split) {
    if (seen.insert(ex.image_id).second) c.add_tensor(ex.image_id, at(ex.image_id));
  }
  c.save(path);
}

void FeatureStore::save(const std::filesystem::path& path) const {
  Container c;
  for (const auto& [id, t] : features_) c.add_tensor(id, t);
  c.save(path);
}

void FeatureStore::load(const std::filesystem::path& path) {
  const Container c = Container::load(path);
  for (const auto& e : c.entries()) add(e.name, c.tensor(e.name));
}

// -------------------------------------------------------------- batching ---

EncodedExample encode_example(const std::vector<std::string>& question, const VqaExample& example,
                              const Vocabulary& vocab, const FeatureStore& features) {
  EncodedExample out;
  out.token_ids.reserve(question.size());
  for (const auto& tok : question) out.token_ids.push_back(vocab.id(tok));
  out.image_feats = &features.at(example.image_id);
  out.label = example.label;
  return out;
}

MultimodalBatch make_batch(std::span<const EncodedExample> examples, const ModelConfig& config) {
  if (examples.empty()) throw Error(ErrorCategory::precondition, "make_batch: no examples");
  MultimodalBatch b;
  b.batch_size = examples.size();
  std::size_t len = 1;
  for (const auto& e : examples) len = std::max(len, e.token_ids.size());
  if (len > config.max_question_len) {
    throw Error(ErrorCategory::shape, "question of " + std::to_string(len) +
                                          " tokens exceeds max_question_len " +
                                          std::to_string(config.max_question_len));
  }
  b.question_len = len;
  b.token_ids.assign(b.batch_size * len, kPadToken);
  b.image_feats = Tensor({b.batch_size * config.num_regions, config.feat_dim});
  b.labels.reserve(b.batch_size);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    std::copy(e.token_ids.begin(), e.token_ids.end(), b.token_ids.begin() + i * len);
    const Tensor& f = *e.image_feats;
    if (f.shape() != Shape{config.num_regions, config.feat_dim}) {
      throw Error(ErrorCategory::shape, "image features " + shape_to_string(f.shape()) +
                                            " do not match the model config");
    }
    std::copy(f.data().begin(), f.data().end(),
              b.image_feats.data().begin() + i * config.num_regions * config.feat_dim);
    b.labels.push_back(e.label);
  }
  return b;
}

// ------------------------------------------------------------- synthetic ---

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCategory::config, "synthetic spec: " + m); };
  if (num_labels < 2) fail("num_labels must be at least 2");
  if (num_synsets == 0 || num_synsets > num_labels) fail("need 1 <= num_synsets <= num_labels");
  if (num_train == 0 || num_dev == 0 || num_test == 0) fail("split sizes must be positive");
  if (num_regions == 0 || feat_dim == 0 || embedding_dim == 0) fail("dimensions must be positive");
  if (informative_regions == 0 || informative_regions > num_regions) {
    fail("informative_regions must lie in [1, num_regions]");
  }
  if (translations_per_word == 0) fail("translations_per_word must be positive");
  if (max_question_len < 4) fail("max_question_len must be at least 4");
  if (!(hypernym_density >= 0.0 && hypernym_density <= 1.0)) fail("hypernym_density outside [0, 1]");
  if (!(cue_noise >= 0.0 && cue_noise <= 1.0)) fail("cue_noise outside [0, 1]");
  if (!(feature_noise >= 0.0)) fail("feature_noise must be non-negative");
  std::set<std::string> langs(languages.begin(), languages.end());
  if (langs.size() != languages.size()) fail("duplicate language codes");
  if (langs.contains("en")) fail("'en' is the source language");
  const std::size_t per_word = 1 + languages.size() * translations_per_word;
  if (vocab_size < 2 + per_word * (num_synsets + 4)) {
    fail("vocab_size " + std::to_string(vocab_size) +
         " too small for one cue word per synset plus four function words in every language");
  }
}

std::string SyntheticSpec::to_json() const {
  nlohmann::ordered_json j;
  j["num_labels"] = num_labels;
  j["num_synsets"] = num_synsets;
  j["hypernym_density"] = hypernym_density;
  j["num_train"] = num_train;
  j["num_dev"] = num_dev;
  j["num_test"] = num_test;
  j["vocab_size"] = vocab_size;
  j["num_regions"] = num_regions;
  j["feat_dim"] = feat_dim;
  j["max_question_len"] = max_question_len;
  j["embedding_dim"] = embedding_dim;
  j["languages"] = languages;
  j["translations_per_word"] = translations_per_word;
  j["informative_regions"] = informative_regions;
  j["feature_noise"] = feature_noise;
  j["cue_noise"] = cue_noise;
  j["seed"] = seed;
  return j.dump(2);
}

SyntheticSpec SyntheticSpec::from_json(std::string_view text) {
  SyntheticSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [key, v] : j.items()) {
      if (key == "num_labels") s.num_labels = v.get<std::size_t>();
      else if (key == "num_synsets") s.num_synsets = v.get<std::size_t>();
      else if (key == "hypernym_density") s.hypernym_density = v.get<double>();
      else if (key == "num_train") s.num_train = v.get<std::size_t>();
      else if (key == "num_dev") s.num_dev = v.get<std::size_t>();
      else if (key == "num_test") s.num_test = v.get<std::size_t>();
      else if (key == "vocab_size") s.vocab_size = v.get<std::size_t>();
      else if (key == "num_regions") s.num_regions = v.get<std::size_t>();
      else if (key == "feat_dim") s.feat_dim = v.get<std::size_t>();
      else if (key == "max_question_len") s.max_question_len = v.get<std::size_t>();
      else if (key == "embedding_dim") s.embedding_dim = v.get<std::size_t>();
      else if (key == "languages") s.languages = v.get<std::vector<std::string>>();
      else if (key == "translations_per_word") s.translations_per_word = v.get<std::size_t>();
      else if (key == "informative_regions") s.informative_regions = v.get<std::size_t>();
      else if (key == "feature_noise") s.feature_noise = v.get<double>();
      else if (key == "cue_noise") s.cue_noise = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else throw Error(ErrorCategory::config, "synthetic spec: unknown field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::config, std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

constexpr std::size_t kLatentDim = 12;

using Vec = std::vector<double>;

Vec random_unit(RngStream& rng, std::size_t dim) {
  Vec v(dim);
  double n2 = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

Vec normalized(Vec v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

// Pronounceable pseudo-words, unique across the whole corpus.
class WordMaker {
 public:
  explicit WordMaker(std::uint64_t seed) : rng_(seed, "words") {}

  std::string make(std::size_t syllables) {
    static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                                   "p", "r", "s", "t", "v", "z", "ch", "sh"};
    static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    for (;;) {
      std::string w;
      for (std::size_t i = 0; i < syllables; ++i) {
        w += kOnsets[rng_.index(std::size(kOnsets))];
        w += kVowels[rng_.index(std::size(kVowels))];
      }
      if (used_.insert(w).second) return w;
    }
  }

  bool reserve(const std::string& w) { return used_.insert(w).second; }

 private:
  RngStream rng_;
  std::set<std::string> used_;
};

struct Generator {
  const SyntheticSpec& spec;
  std::vector<std::string> function_words;
  std::vector<std::vector<std::string>> cue_words;  // per synset
  std::vector<Vec> label_concepts;                  // per label, latent space
  std::vector<std::vector<Vec>> region_maps;        // per region slot, feat_dim x latent

  Vec project(std::size_t slot, const Vec& z) const {
    Vec out(spec.feat_dim, 0.0);
    for (std::size_t f = 0; f < spec.feat_dim; ++f) {
      for (std::size_t d = 0; d < kLatentDim; ++d) out[f] += region_maps[slot][f][d] * z[d];
    }
    return out;
  }

  VqaExample make_example(const std::string& split, std::size_t index, const LabelTaxonomy& tax,
                          FeatureStore& features) const {
    RngStream rng(spec.seed, "example:" + split, 0, index);
    const std::size_t C = spec.num_labels;
    VqaExample ex;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    ex.qid = split + "-" + buf;
    ex.image_id = "img-" + split + "-" + buf;
    ex.label = rng.index(C);
    ex.lang = "en";

    // Question: function words around one cue word naming the answer's synset.
    const std::size_t synset = tax.synset_of(ex.label);
    const std::size_t cue_synset = rng.bernoulli(spec.cue_noise) ? rng.index(tax.num_synsets()) : synset;
    const auto& cues = cue_words[cue_synset];
    const std::size_t max_fw = std::min<std::size_t>(7, spec.max_question_len - 1);
    const std::size_t n_fw = 3 + rng.index(max_fw - 2);
    for (std::size_t i = 0; i < n_fw; ++i) {
      ex.question.push_back(function_words[rng.index(function_words.size())]);
    }
    const std::size_t at = 1 + rng.index(ex.question.size());
    ex.question.insert(ex.question.begin() + static_cast<std::ptrdiff_t>(at),
                       cues[rng.index(cues.size())]);

    // Image: informative regions show the answer, the rest show distractors.
    std::vector<std::size_t> slots(spec.num_regions);
    for (std::size_t r = 0; r < slots.size(); ++r) slots[r] = r;
    for (std::size_t r = 0; r + 1 < slots.size(); ++r) {
      std::swap(slots[r], slots[r + rng.index(slots.size() - r)]);
    }
    Tensor feats({spec.num_regions, spec.feat_dim});
    for (std::size_t r = 0; r < spec.num_regions; ++r) {
      const std::size_t object = r < spec.informative_regions ? ex.label : rng.index(C);
      const Vec base = project(slots[r], label_concepts[object]);
      for (std::size_t f = 0; f < spec.feat_dim; ++f) {
        feats.at(slots[r], f) = base[f] + spec.feature_noise * rng.normal();
      }
    }
    features.add(ex.image_id, std::move(feats));
    return ex;
  }
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t C = spec.num_labels, S = spec.num_synsets;
  RngStream rng(spec.seed, "synthetic");
  WordMaker words(spec.seed);

  // Label space: every synset gets one label, the rest are spread at random.
  std::vector<std::vector<std::size_t>> synsets(S);
  std::vector<std::size_t> owner(C);
  for (std::size_t l = 0; l < C; ++l) {
    owner[l] = l < S ? l : rng.index(S);
    synsets[owner[l]].push_back(l);
  }
  std::vector<std::string> labels(C);
  for (std::size_t s = 0; s < S; ++s) {
    const std::string base = words.make(2);
    for (std::size_t j = 0; j < synsets[s].size(); ++j) {
      std::string name;
      if (j == 0) {
        name = base;
      } else if (j == 1 && words.reserve(base + "s")) {
        name = base + "s";  // inflectional variant, like zebra / zebras
      } else {
        name = words.make(3);
      }
      labels[synsets[s][j]] = name;
    }
  }
  std::vector<LabelTaxonomy::Edge> edges;
  std::vector<std::ptrdiff_t> parent(S, -1);
  for (std::size_t s = 1; s < S; ++s) {
    if (rng.bernoulli(spec.hypernym_density)) {
      parent[s] = static_cast<std::ptrdiff_t>(rng.index(s));
      edges.emplace_back(s, static_cast<std::size_t>(parent[s]));
    }
  }
  LabelTaxonomy taxonomy(labels, synsets, edges);

  // Latent concepts: children lean towards their hypernym, synonyms nearly coincide.
  std::vector<Vec> synset_z(S);
  for (std::size_t s = 0; s < S; ++s) {
    Vec u = random_unit(rng, kLatentDim);
    if (parent[s] >= 0) {
      const Vec& p = synset_z[static_cast<std::size_t>(parent[s])];
      for (std::size_t d = 0; d < kLatentDim; ++d) u[d] = 0.7 * p[d] + 0.7 * u[d];
      u = normalized(std::move(u));
    }
    synset_z[s] = std::move(u);
  }
  Generator gen{spec, {}, {}, std::vector<Vec>(C), {}};
  for (std::size_t l = 0; l < C; ++l) {
    Vec z = synset_z[owner[l]];
    for (auto& x : z) x += 0.6 * rng.normal() / std::sqrt(static_cast<double>(kLatentDim));
    gen.label_concepts[l] = normalized(std::move(z));
  }
  gen.region_maps.assign(spec.num_regions, std::vector<Vec>(spec.feat_dim, Vec(kLatentDim)));
  const double map_scale = 2.0 * std::sqrt(static_cast<double>(kLatentDim)) /
                           std::sqrt(static_cast<double>(spec.feat_dim));
  for (auto& m : gen.region_maps) {
    for (auto& row : m) {
      for (auto& x : row) x = map_scale * rng.normal() / std::sqrt(static_cast<double>(kLatentDim));
    }
  }

  // Label word vectors: a random linear image of the latent concept plus noise.
  EmbeddingTable embeddings(spec.embedding_dim);
  {
    std::vector<Vec> proj(spec.embedding_dim, Vec(kLatentDim));
    for (auto& row : proj) {
      for (auto& x : row) x = rng.normal();
    }
    for (std::size_t l = 0; l < C; ++l) {
      Vec e(spec.embedding_dim);
      for (std::size_t i = 0; i < spec.embedding_dim; ++i) {
        double v = 0.0;
        for (std::size_t d = 0; d < kLatentDim; ++d) v += proj[i][d] * gen.label_concepts[l][d];
        e[i] = v + 0.2 * rng.normal();
      }
      embeddings.add(labels[l], std::move(e));
    }
  }

  // English vocabulary: cue words per synset plus function words.
  const std::size_t per_word = 1 + spec.languages.size() * spec.translations_per_word;
  const std::size_t english = (spec.vocab_size - 2) / per_word;
  const std::size_t cues_per_synset = std::clamp<std::size_t>((english - 4) / S, 1, 2);
  gen.cue_words.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t i = 0; i < cues_per_synset; ++i) gen.cue_words[s].push_back(words.make(2));
  }
  for (std::size_t i = cues_per_synset * S; i < english; ++i) gen.function_words.push_back(words.make(1 + i % 2));

  Vocabulary vocab;
  std::vector<std::string> english_words;
  for (const auto& c : gen.cue_words) english_words.insert(english_words.end(), c.begin(), c.end());
  english_words.insert(english_words.end(), gen.function_words.begin(), gen.function_words.end());
  for (const auto& w : english_words) vocab.add(w);

  BilingualLexicon lexicon;
  for (const auto& lang : spec.languages) {
    lexicon.add_language(lang);
    for (const auto& w : english_words) {
      for (std::size_t t = 0; t < spec.translations_per_word; ++t) {
        const std::string foreign = words.make(2 + (t % 2));
        lexicon.add(lang, w, foreign);
        vocab.add(foreign);
      }
    }
  }

  FeatureStore features;
  auto make_split = [&](const std::string& name, std::size_t n) {
    Split out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(gen.make_example(name, i, taxonomy, features));
    return out;
  };
  Split train = make_split("train", spec.num_train);
  Split dev = make_split("dev", spec.num_dev);
  Split test = make_split("test", spec.num_test);

  return SyntheticCorpus{std::move(train),      std::move(dev),     std::move(test),
                         std::move(features),   std::move(taxonomy), std::move(embeddings),
                         std::move(lexicon),    std::move(vocab)};
}

std::map<std::string, Split> build_target_test_sets(const Split& test,
                                                    const BilingualLexicon& lexicon,
                                                    const std::vector<std::string>& languages) {
  std::map<std::string, Split> out;
  for (const auto& lang : languages) {
    if (!lexicon.has_language(lang)) {
      throw Error(ErrorCategory::precondition, "no lexicon for language '" + lang + "'");
    }
    Split s = test;
    for (auto& ex : s) {
      ex.question = translate_full(ex.question, lexicon, lang);
      ex.lang = lang;
    }
    out.emplace(lang, std::move(s));
  }
  return out;
}

}  // namespace xlft
