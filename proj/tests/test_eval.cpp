#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "support.hpp"
#include "xlft/error.hpp"
#include "xlft/eval.hpp"

using namespace xlft;
using xlft::testing::toy_taxonomy;

namespace {

std::vector<std::size_t> ids(const LabelTaxonomy& t, std::initializer_list<const char*> names) {
  std::vector<std::size_t> out;
  for (const char* n : names) out.push_back(t.index_of(n));
  return out;
}

}  // namespace

TEST_CASE("accuracy") {
  CHECK(accuracy(std::vector<std::size_t>{1, 2, 3}, std::vector<std::size_t>{1, 2, 3}) == 1.0);
  CHECK(accuracy(std::vector<std::size_t>{1, 2}, std::vector<std::size_t>{1, 3}) == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}), Error);
  CHECK_THROWS_AS(accuracy(std::vector<std::size_t>{1}, std::vector<std::size_t>{1, 2}), Error);
}

TEST_CASE("synonym-adjusted accuracy") {
  const LabelTaxonomy t = toy_taxonomy();
  const auto couch = ids(t, {"couch"}), sofa = ids(t, {"sofa"});
  CHECK(accuracy(couch, sofa) == 0.0);
  CHECK(synonym_accuracy(couch, sofa, t) == 1.0);
  const auto girls = ids(t, {"girls"}), girl = ids(t, {"girl"});
  CHECK(accuracy(girls, girl) == 0.0);
  CHECK(synonym_accuracy(girls, girl, t) == 1.0);
  CHECK(synonym_accuracy(ids(t, {"woman"}), girl, t) == 0.0);
  CHECK_THROWS_AS(synonym_accuracy(std::vector<std::size_t>{99}, sofa, t), Error);
}

TEST_CASE("synonym accuracy never falls below accuracy") {
  const LabelTaxonomy t = toy_taxonomy();
  RngStream rng(3, "metric-order");
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<std::size_t> p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.index(t.size());
      g[i] = rng.index(t.size());
    }
    CHECK(synonym_accuracy(p, g, t) >= accuracy(p, g));
  }
}

TEST_CASE("confusion report") {
  const LabelTaxonomy t = toy_taxonomy();
  std::vector<std::size_t> preds, golds;
  auto add = [&](const char* gold, const char* pred, int n) {
    for (int i = 0; i < n; ++i) {
      golds.push_back(t.index_of(gold));
      preds.push_back(t.index_of(pred));
    }
  };
  add("girl", "woman", 27);
  add("skater", "skateboarder", 9);
  add("sofa", "couch", 9);
  add("girls", "girl", 4);
  add("car", "zebra", 40);
  add("zebra", "zebra", 50);
  const auto report = confusion_report(preds, golds, t, 3);
  REQUIRE(report.size() == 3);
  CHECK(report[0] == ConfusionEntry{"girl", "woman", Relation::hypernym, 27});
  CHECK(report[1] == ConfusionEntry{"skater", "skateboarder", Relation::hyponym, 9});
  CHECK(report[2] == ConfusionEntry{"sofa", "couch", Relation::synonym, 9});
  CHECK(relation_tag(report[0].relation) == "hyp");
  CHECK(relation_tag(report[1].relation) == "hpo");
  CHECK(relation_tag(report[2].relation) == "syn");

  std::size_t counted = 0, wrong = 0;
  for (const auto& e : confusion_report(preds, golds, t, 100)) counted += e.count;
  for (std::size_t i = 0; i < preds.size(); ++i) wrong += preds[i] != golds[i];
  CHECK(counted <= wrong);
  CHECK(counted == 27 + 9 + 9 + 4);

  CHECK(confusion_report(ids(t, {"car", "zebra"}), ids(t, {"car", "sofa"}), t, 5).empty());
  CHECK_THROWS_AS(confusion_report(preds, golds, t, 0), Error);
}

TEST_CASE("aggregation") {
  using Run = std::map<std::string, EvalResult>;
  const std::vector<Run> runs = {
      {{"en", {0.4, 0.5, 10}}, {"xa", {0.2, 0.3, 10}}, {"xb", {0.1, 0.1, 10}}},
      {{"en", {0.6, 0.7, 10}}, {"xa", {0.4, 0.5, 10}}, {"xb", {0.3, 0.3, 10}}},
  };
  const RunAggregate agg = aggregate_runs(runs, "en");
  CHECK(agg.runs == 2);
  CHECK(agg.per_language.at("en").accuracy.mean == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(agg.per_language.at("en").accuracy.std == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
  CHECK(agg.avg_excl_source == doctest::Approx((0.3 + 0.2) / 2).epsilon(1e-12));

  const RunAggregate flipped = aggregate_runs({runs[1], runs[0]}, "en");
  CHECK(flipped.per_language.at("xa").accuracy.mean == agg.per_language.at("xa").accuracy.mean);

  const RunAggregate same = aggregate_runs({runs[0], runs[0], runs[0]}, "en");
  CHECK(same.per_language.at("xb").synonym_accuracy.std == 0.0);
  CHECK(aggregate_runs({runs[0]}, "en").per_language.at("en").accuracy.std == 0.0);

  CHECK_THROWS_AS(aggregate_runs({}, "en"), Error);
  CHECK_THROWS_AS(aggregate_runs({runs[0], Run{{"en", {0.1, 0.1, 1}}}}, "en"), Error);

  const std::string table = format_table(agg, "en");
  CHECK(table.find("w/o Syn") != std::string::npos);
  CHECK(table.find("avg") != std::string::npos);
}

TEST_CASE("threaded prediction matches sequential") {
  const SyntheticSpec spec = xlft::testing::tiny_spec();
  const SyntheticCorpus c = generate_synthetic(spec);
  const ModelConfig m = xlft::testing::model_for_spec(spec);
  const ParamSet ps = init_model(m);
  const auto one = predict_split(ps, m, c.test, c.vocab, c.features, 1, 7);
  CHECK(predict_split(ps, m, c.test, c.vocab, c.features, 4, 7) == one);
  CHECK(predict_split(ps, m, c.test, c.vocab, c.features, 3, 64) == one);
}

TEST_CASE("thread cap from the environment") {
  setenv("XLFT_THREADS", "3", 1);
  CHECK(eval_thread_count() == 3);
  setenv("XLFT_THREADS", "zero", 1);
  CHECK(eval_thread_count() >= 1);
  unsetenv("XLFT_THREADS");
}
