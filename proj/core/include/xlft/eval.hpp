#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xlft/data.hpp"
#include "xlft/model.hpp"
#include "xlft/params.hpp"
#include "xlft/taxonomy.hpp"

namespace xlft {

// Fraction of exact matches. Throws on empty or unequal inputs.
double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds);

// A prediction also counts when it shares the gold label's synset.
double synonym_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds,
                        const LabelTaxonomy& taxonomy);

struct ConfusionEntry {
  std::string gold;
  std::string pred;
  Relation relation = Relation::synonym;
  std::size_t count = 0;

  friend bool operator==(const ConfusionEntry&, const ConfusionEntry&) = default;
};

// Wrong predictions that are a synonym, hypernym or hyponym of the gold label,
// the top_n most frequent (gold, pred) pairs first; ties by gold, then pred name.
std::vector<ConfusionEntry> confusion_report(std::span<const std::size_t> preds,
                                             std::span<const std::size_t> golds,
                                             const LabelTaxonomy& taxonomy, std::size_t top_n);

struct EvalResult {
  double accuracy = 0.0;
  double synonym_accuracy = 0.0;
  std::size_t n_examples = 0;
};

EvalResult evaluate_predictions(std::span<const std::size_t> preds,
                                std::span<const std::size_t> golds, const LabelTaxonomy& taxonomy);

// XLFT_THREADS when set to a positive integer, else the hardware concurrency.
std::size_t eval_thread_count();

// Argmax predictions over `split` (ties to the smaller label). Chunks of
// `batch_size` examples are spread over up to `threads` workers; the result
// does not depend on the thread count.
std::vector<std::size_t> predict_split(const ParamSet& params, const ModelConfig& model,
                                       const Split& split, const Vocabulary& vocab,
                                       const FeatureStore& features, std::size_t threads,
                                       std::size_t batch_size = 64);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

struct LanguageSummary {
  MetricSummary accuracy;
  MetricSummary synonym_accuracy;
};

struct RunAggregate {
  std::size_t runs = 0;
  std::map<std::string, LanguageSummary> per_language;
  // Mean accuracy over the languages other than the source one.
  double avg_excl_source = 0.0;
};

MetricSummary summarize(std::span<const double> values);

// One map language -> result per run; every run must cover the same languages.
RunAggregate aggregate_runs(const std::vector<std::map<std::string, EvalResult>>& runs,
                            const std::string& source_language = "en");

// Per-language w/o-Syn, w-Syn and Diff columns (percentages) plus the average.
std::string format_table(const RunAggregate& aggregate, const std::string& source_language = "en");

}  // namespace xlft
