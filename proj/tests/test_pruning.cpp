#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xlft/error.hpp"
#include "xlft/eval.hpp"
#include "xlft/pruning.hpp"
#include "xlft/trainer.hpp"

using namespace xlft;
using xlft::testing::model_for_spec;
using xlft::testing::tiny_model;
using xlft::testing::tiny_spec;

namespace {

// Model whose single prunable tensor is replaced by `weights`.
struct Pocket {
  ParamSet params;
  PruningMask mask;
  std::string name;
};

Pocket pocket(std::vector<double> weights) {
  Pocket p;
  p.params = init_model(tiny_model());
  p.mask = PruningMask::all_ones(p.params);
  p.name = p.mask.entries()[0].name;
  // Give every prunable value a large magnitude, then plant `weights` first.
  for (const auto& e : p.mask.entries()) {
    for (auto& v : p.params.at(e.name).value.data()) v = 100.0;
  }
  auto d = p.params.at(p.name).value.data();
  std::copy(weights.begin(), weights.end(), d.begin());
  return p;
}

struct Fixture {
  SyntheticSpec spec = tiny_spec();
  SyntheticCorpus corpus = generate_synthetic(spec);
  ModelConfig model = model_for_spec(spec);
  TrainData data{&corpus.train, &corpus.vocab, &corpus.features};
  LossConfig loss;
  TrainOptions options;

  Fixture() {
    loss.alpha = 10.0;
    loss.k = 5;
    loss.distance = std::make_shared<DistanceMatrix>(wordnet_distance_matrix(corpus.taxonomy, 0.8, 0.8));
    options.epochs = 2;
    options.batch_size = 16;
    options.adam.lr = 3e-3;
  }
};

}  // namespace

TEST_CASE("pruning removes the smallest magnitudes") {
  Pocket p = pocket({5, -0.5, 3, 0.25, -7, 2, 0.75, -4, 6, 1});
  const std::size_t total = p.mask.total_count();
  CHECK(prune_lowest_global(p.params, p.mask, 0.1) == total / 10);
  const auto& keep = p.mask.entry(p.name).keep;
  CHECK(keep[3] == 0);
  CHECK(keep[1] == 0);
  CHECK(keep[6] == 0);
}

TEST_CASE("tiny pools still prune one weight per round") {
  Pocket p = pocket({});
  // Leave ten weights unmasked.
  for (auto& e : p.mask.entries()) {
    auto& keep = p.mask.entry(e.name).keep;
    std::fill(keep.begin(), keep.end(), 0);
  }
  auto& keep = p.mask.entry(p.name).keep;
  std::fill_n(keep.begin(), 10, 1);
  auto d = p.params.at(p.name).value.data();
  for (std::size_t i = 0; i < 10; ++i) d[i] = 10.0 - static_cast<double>(i);
  CHECK(prune_lowest_global(p.params, p.mask, 0.1) == 1);
  CHECK(keep[9] == 0);
  // floor(0.1 * 9) = 0, raised to one.
  CHECK(prune_lowest_global(p.params, p.mask, 0.1) == 1);
  CHECK(keep[8] == 0);
  CHECK(p.mask.remaining_count() == 8);
}

TEST_CASE("magnitude ties go to the earlier coordinate") {
  Pocket p = pocket({});
  for (auto& e : p.mask.entries()) {
    for (auto& v : p.params.at(e.name).value.data()) v = 1.0;
  }
  const std::size_t n = prune_lowest_global(p.params, p.mask, 0.01);
  const auto& first = p.mask.entries()[0].keep;
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i] == (i < n ? 0 : 1));
}

TEST_CASE("pruned weights never outweigh survivors") {
  ParamSet ps = init_model(tiny_model(2));
  PruningMask mask = PruningMask::all_ones(ps);
  for (int round = 0; round < 4; ++round) {
    const PruningMask before = mask;
    prune_lowest_global(ps, mask, 0.2);
    double max_new = 0.0, min_kept = INFINITY;
    for (std::size_t p = 0; p < mask.entries().size(); ++p) {
      const auto v = ps.at(mask.entries()[p].name).value.data();
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (before.entries()[p].keep[i] && !mask.entries()[p].keep[i]) max_new = std::max(max_new, std::abs(v[i]));
        if (mask.entries()[p].keep[i]) min_kept = std::min(min_kept, std::abs(v[i]));
      }
    }
    CHECK(max_new <= min_kept);
    CHECK(mask.refines(before));
  }
}

TEST_CASE("pruning preconditions") {
  Pocket p = pocket({});
  CHECK_THROWS_AS(prune_lowest_global(p.params, p.mask, 0.0), Error);
  CHECK_THROWS_AS(prune_lowest_global(p.params, p.mask, 1.0), Error);
  for (auto& e : p.mask.entries()) {
    auto& keep = p.mask.entry(e.name).keep;
    std::fill(keep.begin(), keep.end(), 0);
  }
  CHECK_THROWS_AS(prune_lowest_global(p.params, p.mask, 0.1), Error);
  ParamSet other = init_model(tiny_model());
  PruningMask wrong;
  CHECK_THROWS_AS(prune_lowest_global(other, wrong, 0.1), Error);
}

TEST_CASE("remaining count follows the floor recurrence") {
  CHECK(remaining_after_rounds(10, 0.1, 1) == 9);
  CHECK(remaining_after_rounds(10, 0.1, 2) == 8);
  CHECK(remaining_after_rounds(100000, 0.1, 5) == 59049);
  const std::size_t n = 12345;
  CHECK(std::abs(static_cast<double>(remaining_after_rounds(n, 0.1, 5)) / n - std::pow(0.9, 5)) <= 1e-3);
}

TEST_CASE("rewind") {
  const ParamSet theta0 = init_model(tiny_model(1));
  ParamSet trained = theta0;
  for (auto& e : trained) {
    for (auto& v : e.value.data()) v += 0.5;
  }
  PruningMask ones = PruningMask::all_ones(theta0);
  ParamSet p = trained;
  rewind(p, theta0, ones);
  CHECK(p.same_values(theta0));

  PruningMask mask = ones;
  prune_lowest_global(trained, mask, 0.3);
  p = trained;
  rewind(p, theta0, mask);
  for (const auto& e : mask.entries()) {
    const auto v = p.at(e.name).value.data();
    const auto v0 = theta0.at(e.name).value.data();
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == (e.keep[i] ? v0[i] : 0.0));
  }
  CHECK(p.at("classifier.out.weight").value == theta0.at("classifier.out.weight").value);
  ParamSet twice = p;
  rewind(twice, theta0, mask);
  CHECK(twice.same_values(p));
  CHECK_THROWS_AS(rewind(p, init_model(tiny_model()), PruningMask{}), Error);
}

TEST_CASE("masks in containers") {
  const ParamSet ps = init_model(tiny_model());
  PruningMask mask = PruningMask::all_ones(ps);
  prune_lowest_global(ps, mask, 0.25);
  Container c;
  mask.add_to(c);
  CHECK(c.contains(mask.entries()[0].name + ".mask"));
  CHECK(c.entry(mask.entries()[0].name + ".mask").dtype == DType::u8);
  CHECK(PruningMask::from_container(Container::deserialize(c.serialize()), ps) == mask);
}

TEST_CASE("sparsity reports") {
  const SparsityReport small = sparsity_report(0.4044 * 85.52e6, 85.52e6, 281.66e6);
  CHECK(std::abs(100.0 * small.global_sparsity - 12.28) <= 0.5);
  CHECK(small.prunable_sparsity == doctest::Approx(0.4044).epsilon(1e-12));
  const SparsityReport large = sparsity_report(0.4097 * 123.67e6, 123.67e6, 376.90e6);
  CHECK(std::abs(100.0 * large.global_sparsity - 13.44) <= 0.5);
  const SparsityReport none = sparsity_report(PruningMask{}, 100);
  CHECK(none.prunable_sparsity == 0.0);
  CHECK(none.global_sparsity == 0.0);
  const ParamSet ps = init_model(tiny_model());
  const SparsityReport ones = sparsity_report(PruningMask::all_ones(ps), ps.scalar_count());
  CHECK(ones.prunable_sparsity == 0.0);
}

TEST_CASE("imp config validation") {
  CHECK_THROWS_AS((ImpConfig{0.0, 5, 1}.validate()), Error);
  CHECK_THROWS_AS((ImpConfig{0.1, 0, 1}.validate()), Error);
  CHECK_THROWS_AS((ImpConfig{0.1, 5, 0}.validate()), Error);
}

TEST_CASE("imp run") {
  Fixture f;
  const ParamSet theta0 = init_model(f.model);
  ImpConfig imp{0.1, 3, 1};
  std::vector<PruningMask> history;
  const PruningMask mask = imp_run(theta0, f.model, f.data, f.loss, imp, f.options,
                                   [&](std::size_t, const PruningMask& m) { history.push_back(m); });
  REQUIRE(history.size() == 3);
  for (std::size_t r = 1; r < history.size(); ++r) CHECK(history[r].refines(history[r - 1]));
  CHECK(mask.remaining_count() == remaining_after_rounds(mask.total_count(), 0.1, 3));
  CHECK(imp_run(theta0, f.model, f.data, f.loss, imp, f.options) == mask);

  const PruningMask one = imp_run(theta0, f.model, f.data, f.loss, {0.1, 1, 1}, f.options);
  CHECK(one.masked_count() == one.total_count() / 10);
}

TEST_CASE("sparse fine-tuning keeps masked weights at zero") {
  Fixture f;
  f.options.codemix = CodeMixConfig{0.3, {"xa", "xb"}, 1};
  f.options.lexicon = &f.corpus.lexicon;
  const ParamSet theta0 = init_model(f.model);
  PruningMask mask = PruningMask::all_ones(theta0);
  prune_lowest_global(theta0, mask, 0.4);

  std::size_t steps = 0, bad_grads = 0, bad_values = 0;
  const ParamSet out = sft_train(theta0, mask, f.model, f.data, f.loss, f.options,
                                 [&](std::size_t, const ParamSet& ps) {
                                   ++steps;
                                   for (const auto& e : mask.entries()) {
                                     const auto v = ps.at(e.name).value.data();
                                     const auto g = ps.at(e.name).grad->data();
                                     for (std::size_t i = 0; i < v.size(); ++i) {
                                       if (e.keep[i]) continue;
                                       bad_grads += g[i] != 0.0;
                                       bad_values += v[i] != 0.0;
                                     }
                                   }
                                 });
  CHECK(steps > 0);
  CHECK(bad_grads == 0);
  CHECK(bad_values == 0);
  std::size_t moved = 0;
  for (const auto& e : mask.entries()) {
    const auto v = out.at(e.name).value.data();
    const auto v0 = theta0.at(e.name).value.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!e.keep[i]) CHECK(v[i] == 0.0);
      else moved += v[i] != v0[i];
    }
  }
  CHECK(moved > 0);
  CHECK(out.at("classifier.out.weight").value != theta0.at("classifier.out.weight").value);
}

TEST_CASE("an all-ones mask does not change the trajectory") {
  Fixture f;
  const ParamSet theta0 = init_model(f.model);
  ParamSet dense = theta0;
  train_model(dense, f.model, f.data, f.loss, f.options);
  const ParamSet sparse = sft_train(theta0, PruningMask::all_ones(theta0), f.model, f.data, f.loss, f.options);
  CHECK(sparse.same_values(dense));
}

TEST_CASE("training is deterministic and learns") {
  Fixture f;
  f.loss.alpha = 0.0;
  f.options.epochs = 12;
  ParamSet a = init_model(f.model), b = init_model(f.model);
  const TrainStats sa = train_model(a, f.model, f.data, f.loss, f.options);
  train_model(b, f.model, f.data, f.loss, f.options);
  CHECK(a.same_values(b));
  CHECK(sa.epoch_loss.back() < sa.epoch_loss.front());
  const auto preds = predict_split(a, f.model, f.corpus.test, f.corpus.vocab, f.corpus.features, 1);
  std::vector<std::size_t> golds;
  for (const auto& ex : f.corpus.test) golds.push_back(ex.label);
  CHECK(accuracy(preds, golds) > 1.0 / static_cast<double>(f.spec.num_labels));
}

TEST_CASE("train options validation") {
  Fixture f;
  ParamSet ps = init_model(f.model);
  f.options.batch_size = 0;
  CHECK_THROWS_AS(train_model(ps, f.model, f.data, f.loss, f.options), Error);
  f.options.batch_size = 8;
  f.options.codemix = CodeMixConfig{0.3, {"xa"}, 0};
  CHECK_THROWS_AS(train_model(ps, f.model, f.data, f.loss, f.options), Error);
}
