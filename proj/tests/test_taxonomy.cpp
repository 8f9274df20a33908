#include <doctest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "xlft/error.hpp"
#include "xlft/taxonomy.hpp"

using namespace xlft;
using xlft::testing::TempDir;
using xlft::testing::toy_taxonomy;
using xlft::testing::write_file;

namespace {

TaxonomyErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const TaxonomyError& e) {
    return e.kind();
  }
  FAIL("expected a taxonomy error");
  return TaxonomyErrorKind::empty;
}

}  // namespace

TEST_CASE("relations") {
  const LabelTaxonomy t = toy_taxonomy();
  CHECK(t.relation("sofa", "couch") == Relation::synonym);
  CHECK(t.relation("zebra", "zebra") == Relation::synonym);
  CHECK(t.relation("skateboarder", "skater") == Relation::hyponym);
  CHECK(t.relation("skater", "skateboarder") == Relation::hypernym);
  CHECK(t.relation("woman", "girl") == Relation::hypernym);
  CHECK(t.relation("girls", "woman") == Relation::hyponym);
  CHECK(t.relation("car", "skateboarder") == Relation::unrelated);
  CHECK_THROWS_AS(t.relation("sofa", "bed"), TaxonomyError);
}

TEST_CASE("hypernymy is transitive") {
  const LabelTaxonomy t({"a", "b", "c"}, {{0}, {1}, {2}}, {{0, 1}, {1, 2}});
  CHECK(t.relation("a", "c") == Relation::hyponym);
  CHECK(t.relation("c", "a") == Relation::hypernym);
}

TEST_CASE("hyponym and hypernym are mutually inverse") {
  const LabelTaxonomy t = toy_taxonomy();
  for (std::size_t a = 0; a < t.size(); ++a) {
    for (std::size_t b = 0; b < t.size(); ++b) {
      const Relation ab = t.relation(a, b), ba = t.relation(b, a);
      CHECK((ab == Relation::hyponym) == (ba == Relation::hypernym));
      CHECK((ab == Relation::synonym) == (ba == Relation::synonym));
    }
  }
}

TEST_CASE("validation errors are distinct") {
  CHECK(kind_of([] { LabelTaxonomy({}, {}, {}); }) == TaxonomyErrorKind::empty);
  CHECK(kind_of([] { LabelTaxonomy({"a", "a"}, {{0, 1}}, {}); }) == TaxonomyErrorKind::duplicate_label);
  CHECK(kind_of([] { LabelTaxonomy({"a", "b"}, {{0}}, {}); }) == TaxonomyErrorKind::not_a_partition);
  CHECK(kind_of([] { LabelTaxonomy({"a", "b"}, {{0, 1}, {1}}, {}); }) == TaxonomyErrorKind::not_a_partition);
  CHECK(kind_of([] { LabelTaxonomy({"a", "b"}, {{0}, {1}}, {{0, 5}}); }) == TaxonomyErrorKind::unknown_synset);
  CHECK(kind_of([] { LabelTaxonomy({"a", "b"}, {{0}, {1}}, {{0, 1}, {1, 0}}); }) == TaxonomyErrorKind::cycle);
  CHECK(kind_of([] { LabelTaxonomy({"a"}, {{0}}, {{0, 0}}); }) == TaxonomyErrorKind::cycle);
}

TEST_CASE("taxonomy file round trip and cycle detection") {
  TempDir dir("taxonomy");
  const LabelTaxonomy t = toy_taxonomy();
  save_taxonomy(t, dir / "tax.json");
  const LabelTaxonomy back = load_taxonomy(dir / "tax.json");
  CHECK(back.labels() == t.labels());
  CHECK(back.synsets() == t.synsets());
  CHECK(back.hypernym_edges() == t.hypernym_edges());

  write_file(dir / "cycle.json", R"({"labels":["A","B"],"synsets":[[0],[1]],"hypernyms":[[0,1],[1,0]]})");
  CHECK(kind_of([&] { load_taxonomy(dir / "cycle.json"); }) == TaxonomyErrorKind::cycle);
  write_file(dir / "empty.json", R"({"labels":[],"synsets":[],"hypernyms":[]})");
  CHECK(kind_of([&] { load_taxonomy(dir / "empty.json"); }) == TaxonomyErrorKind::empty);
  write_file(dir / "extra.json", R"({"labels":["A"],"synsets":[[0]],"hypernyms":[],"x":1})");
  CHECK_THROWS_AS(load_taxonomy(dir / "extra.json"), Error);
  CHECK_THROWS_AS(load_taxonomy(dir / "missing.json"), Error);
}

TEST_CASE("wordnet distances") {
  const LabelTaxonomy t = toy_taxonomy();
  const DistanceMatrix d = wordnet_distance_matrix(t, 0.8, 0.8);
  auto at = [&](const char* c, const char* y) { return d.at(t.index_of(c), t.index_of(y)); };
  CHECK(at("sofa", "couch") == 0.0);
  CHECK(at("skateboarder", "skater") == 0.8);
  CHECK(at("car", "skateboarder") == 1.0);

  const DistanceMatrix asym = wordnet_distance_matrix(t, 0.3, 0.6);
  CHECK(asym.at(t.index_of("skateboarder"), t.index_of("skater")) == 0.3);
  CHECK(asym.at(t.index_of("skater"), t.index_of("skateboarder")) == 0.6);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(asym.at(i, i) == 0.0);

  CHECK_THROWS_AS(wordnet_distance_matrix(t, 0.0, 0.5), Error);
  CHECK_THROWS_AS(wordnet_distance_matrix(t, 0.5, 1.0), Error);
}

TEST_CASE("distance matrix validation") {
  CHECK_THROWS_AS(DistanceMatrix(DistanceSource::wordnet, 2, {0.0, 1.5, 0.0, 0.0}), Error);
  CHECK_THROWS_AS(DistanceMatrix(DistanceSource::wordnet, 2, {0.1, 1.0, 1.0, 0.0}), Error);
  CHECK_THROWS_AS(DistanceMatrix(DistanceSource::wordnet, 2, {0.0, 1.0, 1.0}), Error);
  const DistanceMatrix ok(DistanceSource::embedding, 2, {0.0, 0.5, 0.5, 0.0});
  CHECK(ok.container_name() == "distance.embedding");
  CHECK(DistanceMatrix(DistanceSource::embedding, ok.to_tensor()).values() == ok.values());
}

TEST_CASE("label vectors") {
  EmbeddingTable e(2);
  e.add("coffee", {1.0, 3.0});
  e.add("table", {3.0, 5.0});
  e.add("zebra", {0.5, -1.0});
  CHECK(*label_vector(e, "coffee table") == std::vector<double>{2.0, 4.0});
  CHECK(*label_vector(e, "zebra") == std::vector<double>{0.5, -1.0});
  CHECK(*label_vector(e, "zebra unicorn") == std::vector<double>{0.5, -1.0});
  CHECK_FALSE(label_vector(e, "unicorn").has_value());
  CHECK_THROWS_AS(e.add("bad", {1.0}), Error);
}

TEST_CASE("embedding distances") {
  EmbeddingTable e(2);
  e.add("a", {1.0, 0.0});
  e.add("a2", {2.0, 0.0});
  e.add("b", {0.0, 3.0});
  e.add("neg", {-1.0, 0.0});
  e.add("zero", {0.0, 0.0});
  const DistanceMatrix d = embedding_distance_matrix(e, {"a", "a2", "b", "neg", "zero", "oov"});
  CHECK(d.at(0, 1) == 0.0);
  CHECK(d.at(0, 2) == 1.0);
  CHECK(d.at(0, 3) == 1.0);  // 1 - (-1) = 2, clamped
  CHECK(d.at(0, 4) == 1.0);
  CHECK(d.at(5, 0) == 1.0);
  CHECK(d.at(5, 5) == 0.0);
  CHECK(d.at(4, 4) == 0.0);
}

TEST_CASE("random embedding matrices are symmetric and bounded") {
  RngStream rng(11, "emb");
  EmbeddingTable e(8);
  std::vector<std::string> labels;
  for (int i = 0; i < 30; ++i) {
    std::vector<double> v(8);
    for (auto& x : v) x = rng.normal();
    labels.push_back("w" + std::to_string(i));
    e.add(labels.back(), v);
  }
  labels.push_back("w3 w7");
  const DistanceMatrix d = embedding_distance_matrix(e, labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CHECK(d.at(i, i) == 0.0);
    for (std::size_t j = 0; j < labels.size(); ++j) {
      CHECK(std::abs(d.at(i, j) - d.at(j, i)) <= 1e-12);
      CHECK((d.at(i, j) >= 0.0 && d.at(i, j) <= 1.0));
    }
  }
}

TEST_CASE("glove text files") {
  TempDir dir("glove");
  write_file(dir / "ok.txt", "sky 0.5 -1\nsea 1e-3 2\n");
  const EmbeddingTable e = load_embeddings(dir / "ok.txt");
  CHECK(e.dim() == 2);
  CHECK(*e.find("sea") == std::vector<double>{1e-3, 2.0});
  save_embeddings(e, dir / "back.txt");
  const EmbeddingTable back = load_embeddings(dir / "back.txt");
  CHECK(*back.find("sky") == *e.find("sky"));

  write_file(dir / "ragged.txt", "sky 0.5 -1\nsea 1\n");
  try {
    load_embeddings(dir / "ragged.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.line() == 2);
  }
  write_file(dir / "nan.txt", "sky 0.5 nan\n");
  CHECK_THROWS_AS(load_embeddings(dir / "nan.txt"), ParseError);
}
