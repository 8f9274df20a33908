#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "xlft/data.hpp"
#include "xlft/error.hpp"
#include "xlft/eval.hpp"
#include "xlft/model.hpp"
#include "xlft/pruning.hpp"

namespace xlft {

std::string_view version();

enum class PriorSource { none, wordnet, embedding };

struct Strategy {
  std::string name;
  PriorSource prior = PriorSource::none;
  bool sft = false;
  bool cdm = false;

  // One of: ce, prior_wn, prior_em, prior_em+sft, prior_em+cdm, prior_em+sft+cdm.
  static Strategy parse(std::string_view name);
  static const std::vector<std::string>& names();
};

struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path runs_dir = "runs";
  std::string strategy = "ce";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  ModelConfig model;

  double alpha = 10.0;
  std::size_t k = 10;
  double d1 = 0.8;  // candidate is a hyponym of the truth
  double d2 = 0.8;  // candidate is a hypernym of the truth

  ImpConfig imp;

  double codemix_ratio = 0.3;
  std::vector<std::string> codemix_languages;  // empty: every lexicon language

  // Spread of foreign token embeddings around their English source in theta0,
  // relative to the token embedding scale.
  double alignment_noise = 1.0;

  std::size_t epochs = 5;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  // Seeds trained concurrently by cmd_train; each job is single-threaded.
  std::size_t jobs = 1;

  SyntheticSpec synthetic;

  void validate() const;
  // Canonical JSON; config_hash() is computed over it.
  std::string to_json() const;
  // Fields absent from `text` keep their defaults; unknown fields are errors.
  static RunConfig from_json(std::string_view text);
  std::string config_hash() const;
};

// Flag > file > default.
struct CliOverrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

enum class OutputRole { data, runs };

// `out` replaces data_dir or runs_dir depending on the subcommand's role.
RunConfig resolve_config(const CliOverrides& overrides, OutputRole role);

// Everything gen-data writes, read back.
struct DataBundle {
  Split train, dev, test;
  std::map<std::string, Split> target_tests;
  FeatureStore features;
  LabelTaxonomy taxonomy;
  EmbeddingTable embeddings;
  BilingualLexicon lexicon;
  Vocabulary vocab;
};

DataBundle load_data_dir(const std::filesystem::path& dir);

// Stands in for multilingual pretraining: each translation's token embedding
// becomes its source word's embedding plus Gaussian noise of relative size
// `noise`. Words with several sources take the first in lexicon order.
void align_token_embeddings(ParamSet& params, const Vocabulary& vocab, const BilingualLexicon& lexicon,
                            double noise, std::uint64_t seed);

// theta0 of one seed: init_model followed by align_token_embeddings.
ParamSet pretrained_init(const ModelConfig& model, const DataBundle& data, double alignment_noise);

// Per-language test results of one trained model, English first.
std::map<std::string, EvalResult> evaluate_model(const ParamSet& params, const ModelConfig& model,
                                                 const DataBundle& data,
                                                 std::map<std::string, std::vector<std::size_t>>* preds = nullptr);

std::filesystem::path seed_dir(const RunConfig& config, std::uint64_t seed);

void cmd_gen_data(const RunConfig& config, std::ostream& log);
void cmd_build_distances(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
// Writes report.json and report.txt next to the seed directories and returns
// the JSON text.
std::string cmd_evaluate(const RunConfig& config, std::ostream& log);
// Sparsity of `mask_path`, or of the first configured seed's mask.
std::string cmd_report_sparsity(const RunConfig& config,
                                const std::optional<std::filesystem::path>& mask_path);

int exit_code(ErrorCategory category);

}  // namespace xlft
