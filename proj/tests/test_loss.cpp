#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>

#include "support.hpp"
#include "xlft/error.hpp"
#include "xlft/gradcheck.hpp"
#include "xlft/loss.hpp"

using namespace xlft;

namespace {

std::shared_ptr<const DistanceMatrix> matrix(std::size_t n, std::vector<double> v) {
  return std::make_shared<DistanceMatrix>(DistanceSource::wordnet, n, std::move(v));
}

double prior_of(const Tensor& probs, std::vector<std::size_t> targets, const LossConfig& cfg) {
  Graph g;
  return prior_loss(g.constant(probs), targets, cfg).value().item();
}

// Labels: 0 truth, 1 hyponym of the truth, 2 and 3 unrelated.
LossConfig four_label_config(std::size_t k) {
  const LabelTaxonomy t({"t", "h", "u", "v"}, {{0}, {1}, {2}, {3}}, {{1, 0}});
  LossConfig cfg;
  cfg.k = k;
  cfg.distance = std::make_shared<DistanceMatrix>(wordnet_distance_matrix(t, 0.8, 0.8));
  return cfg;
}

}  // namespace

TEST_CASE("cross entropy") {
  Graph g;
  CHECK(cross_entropy(g.constant(Tensor({1, 4})), std::vector<std::size_t>{2}).value().item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(cross_entropy(g.constant(Tensor({1, 3}, {800.0, 0.0, 0.0})), std::vector<std::size_t>{0}).value().item() ==
        0.0);
  double last = INFINITY;
  for (double z = -2.0; z <= 2.0; z += 0.5) {
    const double l = cross_entropy(g.constant(Tensor({1, 3}, {z, 0.3, -0.1})), std::vector<std::size_t>{0}).value().item();
    CHECK(l < last);
    last = l;
  }
  CHECK_THROWS_AS(cross_entropy(g.constant(Tensor({1, 3})), std::vector<std::size_t>{3}), Error);
}

TEST_CASE("top-k") {
  const std::vector<double> p = {0.5, 0.3, 0.1, 0.06, 0.04};
  CHECK(topk_indices(p, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK(topk_indices(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2) == std::vector<std::size_t>{0, 1});
  CHECK(topk_indices(std::vector<double>{0.1, 0.4, 0.1, 0.4}, 3) == std::vector<std::size_t>{1, 3, 0});
  auto all = topk_indices(p, 5);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(topk_indices(p, 6), Error);
}

TEST_CASE("prior loss anchors") {
  SUBCASE("half the mass on the truth, half unrelated") {
    CHECK(prior_of(Tensor({1, 4}, {0.5, 0.0, 0.5, 0.0}), {0}, four_label_config(2)) == 0.5);
  }
  SUBCASE("half on a hyponym, half unrelated") {
    CHECK(prior_of(Tensor({1, 4}, {0.0, 0.5, 0.5, 0.0}), {0}, four_label_config(2)) ==
          doctest::Approx(0.5 * 0.8 + 0.5 * 1.0).epsilon(1e-15));
  }
  SUBCASE("top-k mass on synonyms only") {
    const LabelTaxonomy t({"a", "b", "c"}, {{0, 1}, {2}}, {});
    LossConfig cfg;
    cfg.k = 2;
    cfg.distance = std::make_shared<DistanceMatrix>(wordnet_distance_matrix(t, 0.8, 0.8));
    CHECK(prior_of(Tensor({1, 3}, {0.45, 0.45, 0.1}), {0}, cfg) == 0.0);
  }
  SUBCASE("probabilities outside the top-k do not count") {
    CHECK(prior_of(Tensor({1, 4}, {0.0, 0.1, 0.6, 0.3}), {0}, four_label_config(2)) ==
          doctest::Approx(0.9).epsilon(1e-15));
  }
}

TEST_CASE("combined loss") {
  // p(truth) = 1/e gives CE = 1; the off-diagonal distance makes the prior 0.5.
  const double d = 0.5 / (1.0 - std::exp(-1.0));
  LossConfig cfg;
  cfg.alpha = 10.0;
  cfg.k = 2;
  cfg.distance = matrix(2, {0.0, d, d, 0.0});
  Graph g;
  const Var logits = g.constant(Tensor({1, 2}, {0.0, std::log(std::exp(1.0) - 1.0)}));
  const std::vector<std::size_t> y = {0};
  CHECK(cross_entropy(logits, y).value().item() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(combined_loss(logits, y, cfg).value().item() == doctest::Approx(6.0).epsilon(1e-14));

  cfg.alpha = 0.0;
  CHECK(combined_loss(logits, y, cfg).value().item() == cross_entropy(logits, y).value().item());
  cfg.distance.reset();
  CHECK(combined_loss(logits, y, cfg).value().item() == cross_entropy(logits, y).value().item());
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(combined_loss(logits, y, cfg), Error);
}

TEST_CASE("perfect prediction among synonyms costs nothing") {
  const LabelTaxonomy t({"a", "b", "c"}, {{0, 1, 2}}, {});
  LossConfig cfg;
  cfg.k = 3;
  cfg.distance = std::make_shared<DistanceMatrix>(wordnet_distance_matrix(t, 0.8, 0.8));
  Graph g;
  CHECK(combined_loss(g.constant(Tensor({1, 3}, {900.0, 0.0, 0.0})), std::vector<std::size_t>{0}, cfg)
            .value()
            .item() == 0.0);
}

TEST_CASE("prior loss bounds on random inputs") {
  RngStream rng(5, "prior-bounds");
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t c = 2 + rng.index(15), b = 1 + rng.index(4);
    std::vector<double> dist(c * c);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) dist[i * c + j] = i == j ? 0.0 : rng.uniform();
    }
    LossConfig cfg;
    cfg.k = 1 + rng.index(c);
    cfg.distance = matrix(c, dist);
    Tensor logits({b, c});
    for (auto& v : logits.data()) v = rng.normal(0.0, 4.0);
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < b; ++i) y.push_back(rng.index(c));
    Graph g;
    const double l = prior_loss(ops::softmax(g.constant(logits)), y, cfg).value().item();
    CHECK((l >= 0.0 && l <= 1.0));
  }
}

TEST_CASE("unit distances turn the prior into top-k mass") {
  RngStream rng(6, "prior-mass");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 3 + rng.index(10);
    std::vector<double> ones(c * c, 1.0);
    for (std::size_t i = 0; i < c; ++i) ones[i * c + i] = 0.0;
    LossConfig cfg;
    cfg.k = 1 + rng.index(c);
    cfg.distance = matrix(c, ones);
    Tensor logits({1, c});
    for (auto& v : logits.data()) v = rng.normal(0.0, 3.0);
    Graph g;
    const Tensor p = ops::softmax(g.constant(logits)).value();
    const auto top = topk_indices(p.data(), cfg.k);
    const std::size_t y = rng.index(c);
    double mass = 0.0;
    for (auto i : top) mass += i == y ? 0.0 : p[i];
    CHECK(prior_of(p, {y}, cfg) == doctest::Approx(mass).epsilon(1e-14));
  }
}

TEST_CASE("distance source only affects the prior term") {
  const std::size_t c = 4;
  LossConfig a, b;
  a.k = b.k = 3;
  a.distance = matrix(c, {0, .2, .4, .6, .2, 0, .1, .3, .4, .1, 0, .9, .6, .3, .9, 0});
  b.distance = std::make_shared<DistanceMatrix>(DistanceSource::embedding, c,
                                                std::vector<double>{0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0});
  Graph g;
  const Var logits = g.constant(Tensor({2, 4}, {0.1, 0.7, -0.3, 0.2, 1.0, -1.0, 0.5, 0.0}));
  const std::vector<std::size_t> y = {1, 2};
  const double ce = cross_entropy(logits, y).value().item();
  const Var p = ops::softmax(logits);
  CHECK(combined_loss(logits, y, a).value().item() ==
        doctest::Approx(ce + 10.0 * prior_loss(p, y, a).value().item()).epsilon(1e-14));
  CHECK(combined_loss(logits, y, b).value().item() ==
        doctest::Approx(ce + 10.0 * prior_loss(p, y, b).value().item()).epsilon(1e-14));
  CHECK(prior_loss(p, y, a).value().item() != prior_loss(p, y, b).value().item());
}

TEST_CASE("combined loss gradient against finite differences") {
  RngStream rng(8, "loss-grad");
  ParamSet ps;
  Tensor w({6, 12});
  for (auto& v : w.data()) v = rng.normal(0.0, 0.7);
  ps.add("w", w);
  Tensor x({5, 6});
  for (auto& v : x.data()) v = rng.normal();
  const std::vector<std::size_t> y = {0, 3, 7, 11, 3};
  std::vector<double> dist(144);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = i + 1; j < 12; ++j) dist[i * 12 + j] = dist[j * 12 + i] = rng.uniform();
  }
  LossConfig cfg;
  cfg.distance = matrix(12, dist);
  Graph g0(ps);
  const TopkSelection frozen = select_topk(ops::softmax(ops::matmul(g0.constant(x), g0.param("w"))).value(), cfg.k);
  auto loss = [&](Graph& g) { return combined_loss(ops::matmul(g.constant(x), g.param("w")), y, cfg, &frozen); };
  CHECK(finite_diff_check(loss, ps, 1e-5) <= 1e-4);
}
