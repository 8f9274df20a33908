#include <doctest.h>

#include <json.hpp>
#include <set>
#include <sstream>

#include "support.hpp"
#include "xlft/container.hpp"
#include "xlft/error.hpp"
#include "xlft/pipeline.hpp"

using namespace xlft;
using xlft::testing::read_file;
using xlft::testing::TempDir;
using xlft::testing::write_file;

namespace {

RunConfig tiny_run(const TempDir& dir) {
  RunConfig c;
  c.data_dir = dir / "data";
  c.runs_dir = dir / "runs";
  c.synthetic = xlft::testing::tiny_spec();
  c.model = xlft::testing::model_for_spec(c.synthetic);
  c.seeds = {0, 1};
  c.k = 5;
  c.epochs = 2;
  c.batch_size = 16;
  c.lr = 3e-3;
  c.imp.rounds = 2;
  return c;
}

ErrorCategory category_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an error");
  return ErrorCategory::config;
}

}  // namespace

TEST_CASE("strategies") {
  CHECK(Strategy::names().size() == 6);
  const Strategy s = Strategy::parse("prior_em+sft+cdm");
  CHECK(s.prior == PriorSource::embedding);
  CHECK(s.sft);
  CHECK(s.cdm);
  CHECK(Strategy::parse("prior_wn").prior == PriorSource::wordnet);
  CHECK(Strategy::parse("ce").prior == PriorSource::none);
  CHECK_FALSE(Strategy::parse("prior_em+cdm").sft);
  CHECK(category_of([] { Strategy::parse("prior_em+sft+xyz"); }) == ErrorCategory::config);
}

TEST_CASE("run config json and precedence") {
  TempDir dir("config");
  RunConfig c = tiny_run(dir);
  CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK(category_of([] { RunConfig::from_json(R"({"loss":{"beta":1}})"); }) == ErrorCategory::config);
  CHECK(category_of([] { RunConfig::from_json(R"({"nope":1})"); }) == ErrorCategory::config);

  write_file(dir / "c.json", R"({"strategy":"prior_wn","seeds":[7,8],"runs_dir":"from_file","train":{"epochs":3}})");
  CliOverrides o;
  o.config = dir / "c.json";
  RunConfig r = resolve_config(o, OutputRole::runs);
  CHECK(r.strategy == "prior_wn");
  CHECK(r.seeds == std::vector<std::uint64_t>{7, 8});
  CHECK(r.epochs == 3);
  CHECK(r.lr == RunConfig{}.lr);
  o.strategy = "ce";
  o.seed = 4;
  o.out = dir / "flag";
  r = resolve_config(o, OutputRole::runs);
  CHECK(r.strategy == "ce");
  CHECK(r.seeds == std::vector<std::uint64_t>{4});
  CHECK(r.runs_dir == dir / "flag");
  CHECK(resolve_config(o, OutputRole::data).data_dir == dir / "flag");
  CHECK(RunConfig{}.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  o.strategy = "bogus";
  CHECK(category_of([&] { resolve_config(o, OutputRole::runs); }) == ErrorCategory::config);
  CHECK(RunConfig{}.config_hash() == RunConfig{}.config_hash());
  CHECK(RunConfig{}.config_hash() != c.config_hash());
}

TEST_CASE("gen-data writes every artifact and is idempotent") {
  TempDir dir("gen");
  RunConfig c = tiny_run(dir);
  std::ostringstream log;
  cmd_gen_data(c, log);
  const std::string first = read_file(c.data_dir / "train.jsonl");
  const std::string feats = read_file(c.data_dir / "features.train.xlft");
  cmd_gen_data(c, log);
  CHECK(read_file(c.data_dir / "train.jsonl") == first);
  CHECK(read_file(c.data_dir / "features.train.xlft") == feats);
  for (const char* f : {"dev.jsonl", "test.jsonl", "test.xa.jsonl", "test.xb.jsonl", "taxonomy.json", "embeddings.txt",
                        "lexicon.xa.tsv", "lexicon.xb.tsv", "vocab.txt", "synthetic.json"}) {
    CHECK(std::filesystem::exists(c.data_dir / f));
  }
  const DataBundle d = load_data_dir(c.data_dir);
  CHECK(d.target_tests.size() == 2);
  CHECK(d.train.size() == c.synthetic.num_train);

  cmd_build_distances(c, log);
  const Container dist = Container::load(c.data_dir / "distances.xlft");
  CHECK(dist.contains("distance.wordnet"));
  CHECK(dist.contains("distance.embedding"));

  c.synthetic.num_synsets = 0;
  CHECK(category_of([&] { cmd_gen_data(c, log); }) == ErrorCategory::config);
}

TEST_CASE("token alignment pulls translations towards their source") {
  TempDir dir("align");
  RunConfig c = tiny_run(dir);
  std::ostringstream log;
  cmd_gen_data(c, log);
  const DataBundle d = load_data_dir(c.data_dir);
  const ParamSet exact = pretrained_init(c.model, d, 0.0);
  const auto& src_word = d.train[0].question[0];
  const auto& tgt_word = d.lexicon.translations("xa", src_word)->front();
  const Tensor& table = exact.at("embeddings.token").value;
  const auto a = table.row(d.vocab.id(src_word)), b = table.row(d.vocab.id(tgt_word));
  CHECK(std::equal(a.begin(), a.end(), b.begin()));
  CHECK_FALSE(pretrained_init(c.model, d, 1.0).same_values(exact));
}

TEST_CASE("train, evaluate and report sparsity") {
  TempDir dir("train");
  RunConfig c = tiny_run(dir);
  std::ostringstream log;
  cmd_gen_data(c, log);

  c.strategy = "prior_em";
  CHECK(category_of([&] { cmd_train(c, log); }) == ErrorCategory::io);
  cmd_build_distances(c, log);

  c.strategy = "ce";
  cmd_train(c, log);
  for (auto seed : c.seeds) {
    CHECK(std::filesystem::exists(seed_dir(c, seed) / "model.xlft"));
    CHECK(std::filesystem::exists(seed_dir(c, seed) / "metrics.json"));
    const auto manifest = nlohmann::json::parse(read_file(seed_dir(c, seed) / "manifest.json"));
    CHECK(manifest["config_hash"] == c.config_hash());
    CHECK(manifest["seed"] == seed);
    CHECK(manifest["version"] == std::string(version()));
  }
  CHECK_FALSE(std::filesystem::exists(seed_dir(c, 0) / "mask.xlft"));

  const auto report = nlohmann::json::parse(cmd_evaluate(c, log));
  CHECK(report["strategy"] == "ce");
  CHECK(report["seeds"].size() == 2);
  CHECK(report["per_language"].size() == 3);
  for (const auto& [lang, row] : report["per_language"].items()) {
    CHECK(row["syn_acc_mean"].get<double>() >= row["acc_mean"].get<double>());
  }
  CHECK(report.contains("avg_excl_source"));
  CHECK(report["confusion"].contains("xa"));
  CHECK(std::filesystem::exists(c.runs_dir / "ce" / "report.txt"));

  // Evaluating the checkpoint reproduces the training-time metrics.
  const auto metrics = nlohmann::json::parse(read_file(seed_dir(c, 0) / "metrics.json"));
  const DataBundle data = load_data_dir(c.data_dir);
  ModelConfig m = c.model;
  m.seed = 0;
  ParamSet ps = init_model(m);
  load_params(Container::load(seed_dir(c, 0) / "model.xlft"), ps);
  const auto again = evaluate_model(ps, m, data);
  CHECK(again.at("xa").accuracy == metrics["per_language"]["xa"]["accuracy"].get<double>());

  c.strategy = "prior_em+sft+cdm";
  c.seeds = {3};
  cmd_train(c, log);
  CHECK(std::filesystem::exists(seed_dir(c, 3) / "mask.xlft"));
  const Container ckpt = Container::load(seed_dir(c, 3) / "model.xlft");
  CHECK(ckpt.contains("encoder.layer0.ffn.in.weight.mask"));
  const auto sp = nlohmann::json::parse(cmd_report_sparsity(c, std::nullopt));
  CHECK(sp["prunable_sparsity"].get<double>() == doctest::Approx(0.19).epsilon(0.01));
  CHECK(sp["global_sparsity"].get<double>() < sp["prunable_sparsity"].get<double>());
  CHECK(category_of([&] { cmd_report_sparsity(c, dir / "absent.xlft"); }) == ErrorCategory::io);

  c.model.hidden_dim = 8;
  CHECK(category_of([&] { cmd_evaluate(c, log); }) == ErrorCategory::config);
  c = tiny_run(dir);
  c.seeds = {9};
  CHECK(category_of([&] { cmd_evaluate(c, log); }) == ErrorCategory::io);
}

TEST_CASE("identical runs write identical metrics") {
  TempDir dir("repro");
  RunConfig c = tiny_run(dir);
  c.seeds = {2};
  c.strategy = "prior_em+cdm";
  c.jobs = 1;
  std::ostringstream log;
  cmd_gen_data(c, log);
  cmd_build_distances(c, log);
  cmd_train(c, log);
  const std::string first = read_file(seed_dir(c, 2) / "metrics.json");
  c.runs_dir = dir / "again";
  cmd_train(c, log);
  CHECK(read_file(seed_dir(c, 2) / "metrics.json") == first);
}

TEST_CASE("exit codes are distinct per category") {
  std::set<int> codes;
  for (auto cat : {ErrorCategory::config, ErrorCategory::io, ErrorCategory::parse, ErrorCategory::shape,
                   ErrorCategory::precondition, ErrorCategory::taxonomy}) {
    CHECK(exit_code(cat) != 0);
    codes.insert(exit_code(cat));
  }
  CHECK(codes.size() == 6);
}
