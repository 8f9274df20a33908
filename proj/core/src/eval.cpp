#include "xlft/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "xlft/error.hpp"

namespace xlft {

namespace {

void check_pair(std::span<const std::size_t> preds, std::span<const std::size_t> golds) {
  if (preds.size() != golds.size()) {
    throw Error(ErrorCategory::precondition, "got " + std::to_string(preds.size()) +
                                                 " predictions for " + std::to_string(golds.size()) +
                                                 " gold labels");
  }
  if (preds.empty()) throw Error(ErrorCategory::precondition, "no predictions to score");
}

}  // namespace

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds) {
  check_pair(preds, golds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double synonym_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds,
                        const LabelTaxonomy& taxonomy) {
  check_pair(preds, golds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    hits += taxonomy.relation(preds[i], golds[i]) == Relation::synonym;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::vector<ConfusionEntry> confusion_report(std::span<const std::size_t> preds,
                                             std::span<const std::size_t> golds,
                                             const LabelTaxonomy& taxonomy, std::size_t top_n) {
  if (top_n == 0) throw Error(ErrorCategory::precondition, "top_n must be at least 1");
  if (preds.size() != golds.size()) check_pair(preds, golds);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == golds[i]) continue;
    if (taxonomy.relation(preds[i], golds[i]) != Relation::unrelated) ++counts[{golds[i], preds[i]}];
  }
  std::vector<ConfusionEntry> out;
  for (const auto& [key, n] : counts) {
    out.push_back({taxonomy.labels()[key.first], taxonomy.labels()[key.second],
                   taxonomy.relation(key.second, key.first), n});
  }
  std::sort(out.begin(), out.end(), [](const ConfusionEntry& a, const ConfusionEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.gold != b.gold) return a.gold < b.gold;
    return a.pred < b.pred;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

EvalResult evaluate_predictions(std::span<const std::size_t> preds,
                                std::span<const std::size_t> golds, const LabelTaxonomy& taxonomy) {
  return {accuracy(preds, golds), synonym_accuracy(preds, golds, taxonomy), preds.size()};
}

std::size_t eval_thread_count() {
  if (const char* env = std::getenv("XLFT_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::size_t> predict_split(const ParamSet& params, const ModelConfig& model,
                                       const Split& split, const Vocabulary& vocab,
                                       const FeatureStore& features, std::size_t threads,
                                       std::size_t batch_size) {
  if (batch_size == 0) throw Error(ErrorCategory::precondition, "batch_size must be positive");
  std::vector<std::size_t> preds(split.size());
  const std::size_t chunks = (split.size() + batch_size - 1) / batch_size;

  auto run_chunk = [&](std::size_t c) {
    const std::size_t start = c * batch_size;
    const std::size_t end = std::min(split.size(), start + batch_size);
    std::vector<EncodedExample> examples;
    for (std::size_t i = start; i < end; ++i) {
      examples.push_back(encode_example(split[i].question, split[i], vocab, features));
    }
    const Tensor logits = predict_logits(params, model, make_batch(examples, model));
    for (std::size_t r = 0; r < examples.size(); ++r) {
      const auto row = logits.row(r);
      preds[start + r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  };

  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(chunks, 1));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return preds;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t c = t; c < chunks; c += threads) run_chunk(c);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return preds;
}

MetricSummary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCategory::precondition, "cannot summarize zero runs");
  // Shifted by the first value, so identical runs give exactly that value and 0.
  const double n = static_cast<double>(values.size());
  const double shift = values.front();
  double sum = 0.0, sum_sq = 0.0;
  for (double v : values) {
    sum += v - shift;
    sum_sq += (v - shift) * (v - shift);
  }
  MetricSummary s;
  s.mean = shift + sum / n;
  if (values.size() > 1) s.std = std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0)));
  return s;
}

RunAggregate aggregate_runs(const std::vector<std::map<std::string, EvalResult>>& runs,
                            const std::string& source_language) {
  if (runs.empty()) throw Error(ErrorCategory::precondition, "cannot aggregate zero runs");
  RunAggregate agg;
  agg.runs = runs.size();
  for (const auto& run : runs) {
    if (run.size() != runs.front().size()) {
      throw Error(ErrorCategory::precondition, "runs cover different language sets");
    }
  }
  std::size_t targets = 0;
  for (const auto& [lang, _] : runs.front()) {
    std::vector<double> acc, syn;
    for (const auto& run : runs) {
      auto it = run.find(lang);
      if (it == run.end()) {
        throw Error(ErrorCategory::precondition, "a run lacks language '" + lang + "'");
      }
      acc.push_back(it->second.accuracy);
      syn.push_back(it->second.synonym_accuracy);
    }
    LanguageSummary ls{summarize(acc), summarize(syn)};
    if (lang != source_language) {
      agg.avg_excl_source += ls.accuracy.mean;
      ++targets;
    }
    agg.per_language.emplace(lang, ls);
  }
  if (targets > 0) agg.avg_excl_source /= static_cast<double>(targets);
  return agg;
}

std::string format_table(const RunAggregate& aggregate, const std::string& source_language) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %16s %16s %8s\n", "lang", "w/o Syn", "w Syn", "Diff");
  out += line;
  auto row = [&](const std::string& lang, const LanguageSummary& s) {
    std::snprintf(line, sizeof line, "%-8s %7.2f +- %5.2f %7.2f +- %5.2f %8.2f\n", lang.c_str(),
                  100.0 * s.accuracy.mean, 100.0 * s.accuracy.std, 100.0 * s.synonym_accuracy.mean,
                  100.0 * s.synonym_accuracy.std,
                  100.0 * (s.synonym_accuracy.mean - s.accuracy.mean));
    out += line;
  };
  if (auto it = aggregate.per_language.find(source_language); it != aggregate.per_language.end()) {
    row(it->first, it->second);
  }
  for (const auto& [lang, s] : aggregate.per_language) {
    if (lang != source_language) row(lang, s);
  }
  std::snprintf(line, sizeof line, "%-8s %7.2f\n", "avg", 100.0 * aggregate.avg_excl_source);
  out += line;
  return out;
}

}  // namespace xlft
