#include "xlft/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "xlft/container.hpp"
#include "xlft/rng.hpp"
#include "xlft/trainer.hpp"

#ifndef XLFT_VERSION
#define XLFT_VERSION "0.0.0"
#endif

namespace xlft {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view version() { return XLFT_VERSION; }

const std::vector<std::string>& Strategy::names() {
  static const std::vector<std::string> kNames = {"ce",           "prior_wn",     "prior_em",
                                                  "prior_em+sft", "prior_em+cdm", "prior_em+sft+cdm"};
  return kNames;
}

Strategy Strategy::parse(std::string_view name) {
  static const Strategy kStrategies[] = {
      {"ce", PriorSource::none, false, false},
      {"prior_wn", PriorSource::wordnet, false, false},
      {"prior_em", PriorSource::embedding, false, false},
      {"prior_em+sft", PriorSource::embedding, true, false},
      {"prior_em+cdm", PriorSource::embedding, false, true},
      {"prior_em+sft+cdm", PriorSource::embedding, true, true},
  };
  for (const auto& s : kStrategies) {
    if (s.name == name) return s;
  }
  std::string known;
  for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorCategory::config, "unknown strategy '" + std::string(name) + "' (known: " + known + ")");
}

// ------------------------------------------------------------ run config ---

void RunConfig::validate() const {
  Strategy::parse(strategy);
  if (seeds.empty()) throw Error(ErrorCategory::config, "at least one seed is required");
  model.validate();
  if (!(alpha >= 0.0)) throw Error(ErrorCategory::config, "loss: alpha must be non-negative");
  if (k < 1 || k > model.num_labels) throw Error(ErrorCategory::config, "loss: k must lie in [1, num_labels]");
  if (!(d1 > 0.0 && d1 < 1.0 && d2 > 0.0 && d2 < 1.0)) {
    throw Error(ErrorCategory::config, "loss: d1 and d2 must lie in (0, 1)");
  }
  imp.validate();
  if (!(codemix_ratio >= 0.0 && codemix_ratio <= 1.0)) {
    throw Error(ErrorCategory::config, "codemix: ratio must lie in [0, 1]");
  }
  if (epochs == 0) throw Error(ErrorCategory::config, "train: epochs must be positive");
  if (!(lr > 0.0)) throw Error(ErrorCategory::config, "train: lr must be positive");
  if (batch_size == 0) throw Error(ErrorCategory::config, "train: batch_size must be positive");
  if (jobs == 0) throw Error(ErrorCategory::config, "train: jobs must be positive");
  if (!(alignment_noise >= 0.0)) throw Error(ErrorCategory::config, "alignment_noise must be non-negative");
  synthetic.validate();
}

std::string RunConfig::to_json() const {
  ojson j;
  j["data_dir"] = data_dir.generic_string();
  j["runs_dir"] = runs_dir.generic_string();
  j["strategy"] = strategy;
  j["seeds"] = seeds;
  j["model"] = ojson::parse(model.to_json());
  j["loss"] = {{"alpha", alpha}, {"k", k}, {"d1", d1}, {"d2", d2}};
  j["imp"] = {{"p", imp.prune_rate}, {"rounds", imp.rounds}, {"epochs_per_round", imp.epochs_per_round}};
  j["codemix"] = {{"ratio", codemix_ratio}, {"languages", codemix_languages}};
  j["alignment_noise"] = alignment_noise;
  j["train"] = {{"epochs", epochs}, {"lr", lr}, {"batch_size", batch_size}, {"jobs", jobs}};
  j["synthetic"] = ojson::parse(synthetic.to_json());
  return j.dump(2);
}

namespace {

template <typename Fn>
void for_fields(const nlohmann::json& obj, std::string_view section, Fn&& fn) {
  if (!obj.is_object()) throw Error(ErrorCategory::config, std::string(section) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!fn(key, value)) {
      throw Error(ErrorCategory::config, std::string(section) + ": unknown field '" + key + "'");
    }
  }
}

}  // namespace

RunConfig RunConfig::from_json(std::string_view text) {
  RunConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    for_fields(j, "config", [&](const std::string& key, const nlohmann::json& v) {
      if (key == "data_dir") c.data_dir = v.get<std::string>();
      else if (key == "runs_dir") c.runs_dir = v.get<std::string>();
      else if (key == "strategy") c.strategy = v.get<std::string>();
      else if (key == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "model") c.model = ModelConfig::from_json(v.dump());
      else if (key == "alignment_noise") c.alignment_noise = v.get<double>();
      else if (key == "synthetic") c.synthetic = SyntheticSpec::from_json(v.dump());
      else if (key == "loss") {
        for_fields(v, "loss", [&](const std::string& k, const nlohmann::json& x) {
          if (k == "alpha") c.alpha = x.get<double>();
          else if (k == "k") c.k = x.get<std::size_t>();
          else if (k == "d1") c.d1 = x.get<double>();
          else if (k == "d2") c.d2 = x.get<double>();
          else return false;
          return true;
        });
      } else if (key == "imp") {
        for_fields(v, "imp", [&](const std::string& k, const nlohmann::json& x) {
          if (k == "p") c.imp.prune_rate = x.get<double>();
          else if (k == "rounds") c.imp.rounds = x.get<std::size_t>();
          else if (k == "epochs_per_round") c.imp.epochs_per_round = x.get<std::size_t>();
          else return false;
          return true;
        });
      } else if (key == "codemix") {
        for_fields(v, "codemix", [&](const std::string& k, const nlohmann::json& x) {
          if (k == "ratio") c.codemix_ratio = x.get<double>();
          else if (k == "languages") c.codemix_languages = x.get<std::vector<std::string>>();
          else return false;
          return true;
        });
      } else if (key == "train") {
        for_fields(v, "train", [&](const std::string& k, const nlohmann::json& x) {
          if (k == "epochs") c.epochs = x.get<std::size_t>();
          else if (k == "lr") c.lr = x.get<double>();
          else if (k == "batch_size") c.batch_size = x.get<std::size_t>();
          else if (k == "jobs") c.jobs = x.get<std::size_t>();
          else return false;
          return true;
        });
      } else {
        return false;
      }
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::config, std::string("config: ") + e.what());
  }
  return c;
}

std::string RunConfig::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json())));
  return buf;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

}  // namespace

RunConfig resolve_config(const CliOverrides& overrides, OutputRole role) {
  RunConfig c = overrides.config ? RunConfig::from_json(read_text(*overrides.config)) : RunConfig{};
  if (overrides.strategy) c.strategy = *overrides.strategy;
  if (overrides.seed) c.seeds = {*overrides.seed};
  if (overrides.out) (role == OutputRole::data ? c.data_dir : c.runs_dir) = *overrides.out;
  c.validate();
  return c;
}

// ------------------------------------------------------------ data files ---

namespace {

fs::path split_path(const fs::path& dir, const std::string& name) { return dir / (name + ".jsonl"); }
fs::path features_path(const fs::path& dir, const std::string& split) {
  return dir / ("features." + split + ".xlft");
}
fs::path lexicon_path(const fs::path& dir, const std::string& lang) { return dir / ("lexicon." + lang + ".tsv"); }

}  // namespace

void cmd_gen_data(const RunConfig& config, std::ostream& log) {
  const fs::path& dir = config.data_dir;
  fs::create_directories(dir);
  const SyntheticCorpus corpus = generate_synthetic(config.synthetic);
  if (corpus.vocab.size() > config.model.vocab_size) {
    throw Error(ErrorCategory::config, "generated vocabulary of " + std::to_string(corpus.vocab.size()) +
                                           " tokens exceeds model vocab_size " +
                                           std::to_string(config.model.vocab_size));
  }
  save_split(corpus.train, split_path(dir, "train"));
  save_split(corpus.dev, split_path(dir, "dev"));
  save_split(corpus.test, split_path(dir, "test"));
  corpus.features.save(features_path(dir, "train"), corpus.train);
  corpus.features.save(features_path(dir, "dev"), corpus.dev);
  corpus.features.save(features_path(dir, "test"), corpus.test);
  const auto targets = build_target_test_sets(corpus.test, corpus.lexicon, config.synthetic.languages);
  for (const auto& [lang, split] : targets) save_split(split, split_path(dir, "test." + lang));
  save_taxonomy(corpus.taxonomy, dir / "taxonomy.json");
  save_embeddings(corpus.embeddings, dir / "embeddings.txt");
  for (const auto& lang : corpus.lexicon.languages()) save_lexicon_file(corpus.lexicon, lang, lexicon_path(dir, lang));
  corpus.vocab.save(dir / "vocab.txt");
  write_text(dir / "synthetic.json", config.synthetic.to_json() + "\n");
  log << "wrote " << corpus.train.size() << "/" << corpus.dev.size() << "/" << corpus.test.size()
      << " train/dev/test examples and " << targets.size() << " target test sets to " << dir.string()
      << "\n";
}

DataBundle load_data_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCategory::io, "data directory " + dir.string() + " not found");
  const SyntheticSpec spec = SyntheticSpec::from_json(read_text(dir / "synthetic.json"));
  std::map<std::string, fs::path> lex_paths;
  std::map<std::string, Split> targets;
  for (const auto& lang : spec.languages) {
    lex_paths[lang] = lexicon_path(dir, lang);
    targets[lang] = load_split(split_path(dir, "test." + lang));
  }
  FeatureStore features;
  for (const char* s : {"train", "dev", "test"}) features.load(features_path(dir, s));
  return DataBundle{load_split(split_path(dir, "train")),
                    load_split(split_path(dir, "dev")),
                    load_split(split_path(dir, "test")),
                    std::move(targets),
                    std::move(features),
                    load_taxonomy(dir / "taxonomy.json"),
                    load_embeddings(dir / "embeddings.txt"),
                    load_lexicons(lex_paths),
                    Vocabulary::load(dir / "vocab.txt")};
}

void align_token_embeddings(ParamSet& params, const Vocabulary& vocab, const BilingualLexicon& lexicon,
                            double noise, std::uint64_t seed) {
  Tensor& table = params.at("embeddings.token").value;
  if (vocab.size() > table.rows()) {
    throw Error(ErrorCategory::shape, "vocabulary of " + std::to_string(vocab.size()) +
                                          " tokens does not fit a token table of " +
                                          std::to_string(table.rows()) + " rows");
  }
  double ss = 0.0;
  for (double v : table.data()) ss += v * v;
  const double scale = std::sqrt(ss / static_cast<double>(table.size()));
  RngStream rng(seed, "align");
  std::vector<std::uint8_t> done(vocab.size(), 0);
  for (const auto& lang : lexicon.languages()) {
    for (const auto& [source, targets] : lexicon.entries(lang)) {
      if (!vocab.contains(source)) continue;
      const auto src = table.row(vocab.id(source));
      for (const auto& t : targets) {
        if (!vocab.contains(t) || done[vocab.id(t)]) continue;
        done[vocab.id(t)] = 1;
        auto dst = table.row(vocab.id(t));
        for (std::size_t h = 0; h < dst.size(); ++h) dst[h] = src[h] + noise * scale * rng.normal();
      }
    }
  }
}

ParamSet pretrained_init(const ModelConfig& model, const DataBundle& data, double alignment_noise) {
  ParamSet params = init_model(model);
  align_token_embeddings(params, data.vocab, data.lexicon, alignment_noise, model.seed);
  return params;
}

void cmd_build_distances(const RunConfig& config, std::ostream& log) {
  const fs::path& dir = config.data_dir;
  const LabelTaxonomy tax = load_taxonomy(dir / "taxonomy.json");
  const EmbeddingTable emb = load_embeddings(dir / "embeddings.txt");
  const DistanceMatrix wn = wordnet_distance_matrix(tax, config.d1, config.d2);
  const DistanceMatrix em = embedding_distance_matrix(emb, tax.labels());
  Container c;
  c.add_tensor(wn.container_name(), wn.to_tensor());
  c.add_tensor(em.container_name(), em.to_tensor());
  c.save(dir / "distances.xlft");
  log << "wrote " << (dir / "distances.xlft").string() << " (" << tax.size() << " labels)\n";
}

// ------------------------------------------------------------- training ---

fs::path seed_dir(const RunConfig& config, std::uint64_t seed) {
  return config.runs_dir / config.strategy / ("seed" + std::to_string(seed));
}

std::map<std::string, EvalResult> evaluate_model(const ParamSet& params, const ModelConfig& model,
                                                 const DataBundle& data,
                                                 std::map<std::string, std::vector<std::size_t>>* preds) {
  const std::size_t threads = eval_thread_count();
  std::map<std::string, EvalResult> out;
  auto run = [&](const std::string& lang, const Split& split) {
    auto p = predict_split(params, model, split, data.vocab, data.features, threads);
    std::vector<std::size_t> golds;
    for (const auto& ex : split) golds.push_back(ex.label);
    out[lang] = evaluate_predictions(p, golds, data.taxonomy);
    if (preds) (*preds)[lang] = std::move(p);
  };
  run("en", data.test);
  for (const auto& [lang, split] : data.target_tests) run(lang, split);
  return out;
}

namespace {

ModelConfig model_for(const RunConfig& config, std::uint64_t seed, const DataBundle& data) {
  ModelConfig m = config.model;
  m.seed = seed;
  if (data.vocab.size() > m.vocab_size) {
    throw Error(ErrorCategory::config, "vocabulary of " + std::to_string(data.vocab.size()) +
                                           " tokens exceeds model vocab_size " + std::to_string(m.vocab_size));
  }
  if (data.taxonomy.size() != m.num_labels) {
    throw Error(ErrorCategory::config, "data has " + std::to_string(data.taxonomy.size()) +
                                           " labels, model expects " + std::to_string(m.num_labels));
  }
  return m;
}

LossConfig loss_for(const RunConfig& config, const Strategy& strategy, const fs::path& data_dir) {
  LossConfig loss;
  loss.k = config.k;
  if (strategy.prior == PriorSource::none) {
    loss.alpha = 0.0;
    return loss;
  }
  loss.alpha = config.alpha;
  const fs::path path = data_dir / "distances.xlft";
  if (!fs::exists(path)) {
    throw Error(ErrorCategory::io, "strategy " + strategy.name + " needs " + path.string() +
                                       "; run build-distances first");
  }
  const Container c = Container::load(path);
  const auto source = strategy.prior == PriorSource::wordnet ? DistanceSource::wordnet : DistanceSource::embedding;
  const std::string name = "distance." + std::string(to_string(source));
  if (!c.contains(name)) throw Error(ErrorCategory::io, path.string() + " lacks entry '" + name + "'");
  loss.distance = std::make_shared<DistanceMatrix>(source, c.tensor(name));
  return loss;
}

ojson results_json(const std::map<std::string, EvalResult>& results) {
  ojson j = ojson::object();
  for (const auto& [lang, r] : results) {
    j[lang] = {{"accuracy", r.accuracy}, {"synonym_accuracy", r.synonym_accuracy}, {"n", r.n_examples}};
  }
  return j;
}

void train_seed(const RunConfig& config, const Strategy& strategy, const DataBundle& data,
                const LossConfig& loss, std::uint64_t seed, std::ostream& log, std::mutex& log_mutex) {
  const ModelConfig model = model_for(config, seed, data);
  const TrainData td{&data.train, &data.vocab, &data.features};
  TrainOptions opts;
  opts.epochs = config.epochs;
  opts.batch_size = config.batch_size;
  opts.adam.lr = config.lr;
  opts.seed = seed;
  opts.lexicon = &data.lexicon;
  if (strategy.cdm) {
    CodeMixConfig cm;
    cm.select_ratio = config.codemix_ratio;
    cm.languages = config.codemix_languages.empty() ? data.lexicon.languages() : config.codemix_languages;
    cm.seed = seed;
    opts.codemix = cm;
  }

  const ParamSet theta0 = pretrained_init(model, data, config.alignment_noise);
  ParamSet params;
  std::optional<PruningMask> mask;
  std::vector<double> epoch_loss;
  if (strategy.sft) {
    mask = imp_run(theta0, model, td, loss, config.imp, opts);
    params = theta0;
    rewind(params, theta0, *mask);
    epoch_loss = train_model(params, model, td, loss, opts, &*mask).epoch_loss;
  } else {
    params = theta0;
    epoch_loss = train_model(params, model, td, loss, opts).epoch_loss;
  }
  params.clear_slots();
  params.clear_grads();

  const auto results = evaluate_model(params, model, data);
  const fs::path dir = seed_dir(config, seed);
  fs::create_directories(dir);
  Container ckpt;
  add_params(ckpt, params);
  if (mask) {
    mask->add_to(ckpt);
    Container mc;
    mask->add_to(mc);
    mc.save(dir / "mask.xlft");
  }
  ckpt.save(dir / "model.xlft");
  write_text(dir / "model_config.json", model.to_json() + "\n");

  ojson metrics;
  metrics["strategy"] = strategy.name;
  metrics["seed"] = seed;
  metrics["per_language"] = results_json(results);
  metrics["epoch_loss"] = epoch_loss;
  if (mask) {
    const auto rep = sparsity_report(*mask, params.scalar_count());
    metrics["sparsity"] = {{"prunable", rep.prunable_sparsity}, {"global", rep.global_sparsity}};
  }
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");

  ojson manifest;
  manifest["version"] = version();
  manifest["config_hash"] = config.config_hash();
  manifest["seed"] = seed;
  manifest["strategy"] = strategy.name;
  manifest["config"] = ojson::parse(config.to_json());
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::lock_guard lock(log_mutex);
  log << strategy.name << " seed " << seed << ":";
  for (const auto& [lang, r] : results) {
    char buf[48];
    std::snprintf(buf, sizeof buf, " %s=%.4f", lang.c_str(), r.accuracy);
    log << buf;
  }
  log << "\n";
}

}  // namespace

void cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Strategy strategy = Strategy::parse(config.strategy);
  const DataBundle data = load_data_dir(config.data_dir);
  const LossConfig loss = loss_for(config, strategy, config.data_dir);

  std::mutex log_mutex;
  const std::size_t jobs = std::min(config.jobs, config.seeds.size());
  if (jobs <= 1) {
    for (auto seed : config.seeds) train_seed(config, strategy, data, loss, seed, log, log_mutex);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < config.seeds.size(); i += jobs) {
          train_seed(config, strategy, data, loss, config.seeds[i], log, log_mutex);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ----------------------------------------------------------- evaluation ---

namespace {

ParamSet load_checkpoint(const RunConfig& config, std::uint64_t seed, const DataBundle& data,
                         ModelConfig& model) {
  const fs::path dir = seed_dir(config, seed);
  if (!fs::exists(dir / "model.xlft")) {
    throw Error(ErrorCategory::io, "no checkpoint at " + (dir / "model.xlft").string() + "; run train first");
  }
  model = ModelConfig::from_json(read_text(dir / "model_config.json"));
  ModelConfig expected = model_for(config, seed, data);
  if (!(model == expected)) {
    throw Error(ErrorCategory::config, "checkpoint " + dir.string() + " was trained with a different model config");
  }
  ParamSet params = init_model(model);
  load_params(Container::load(dir / "model.xlft"), params);
  return params;
}

}  // namespace

std::string cmd_evaluate(const RunConfig& config, std::ostream& log) {
  config.validate();
  const DataBundle data = load_data_dir(config.data_dir);
  std::vector<std::map<std::string, EvalResult>> runs;
  std::map<std::string, std::vector<std::size_t>> first_preds;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    ModelConfig model;
    const ParamSet params = load_checkpoint(config, config.seeds[i], data, model);
    runs.push_back(evaluate_model(params, model, data, i == 0 ? &first_preds : nullptr));
  }
  const RunAggregate agg = aggregate_runs(runs, "en");

  ojson j;
  j["strategy"] = config.strategy;
  j["seeds"] = config.seeds;
  ojson per = ojson::object();
  for (const auto& [lang, s] : agg.per_language) {
    per[lang] = {{"acc_mean", s.accuracy.mean},
                 {"acc_std", s.accuracy.std},
                 {"syn_acc_mean", s.synonym_accuracy.mean},
                 {"syn_acc_std", s.synonym_accuracy.std}};
  }
  j["per_language"] = per;
  j["avg_excl_source"] = agg.avg_excl_source;
  ojson confusion = ojson::object();
  for (const auto& [lang, preds] : first_preds) {
    const Split& split = lang == "en" ? data.test : data.target_tests.at(lang);
    std::vector<std::size_t> golds;
    for (const auto& ex : split) golds.push_back(ex.label);
    ojson rows = ojson::array();
    for (const auto& e : confusion_report(preds, golds, data.taxonomy, 5)) {
      rows.push_back({{"gold", e.gold}, {"pred", e.pred}, {"rel", relation_tag(e.relation)}, {"count", e.count}});
    }
    confusion[lang] = rows;
  }
  j["confusion"] = confusion;

  const std::string text = j.dump(2) + "\n";
  const fs::path dir = config.runs_dir / config.strategy;
  write_text(dir / "report.json", text);
  std::string table = "strategy " + config.strategy + ", " + std::to_string(config.seeds.size()) + " seed(s)\n" +
                      format_table(agg, "en");
  write_text(dir / "report.txt", table);
  log << table;
  return text;
}

std::string cmd_report_sparsity(const RunConfig& config, const std::optional<fs::path>& mask_path) {
  config.validate();
  ModelConfig model = config.model;
  fs::path path;
  if (mask_path) {
    path = *mask_path;
  } else {
    const fs::path dir = seed_dir(config, config.seeds.front());
    path = dir / "mask.xlft";
    if (fs::exists(dir / "model_config.json")) model = ModelConfig::from_json(read_text(dir / "model_config.json"));
  }
  if (!fs::exists(path)) throw Error(ErrorCategory::io, "mask file " + path.string() + " not found");
  const ParamSet params = init_model(model);
  const PruningMask mask = PruningMask::from_container(Container::load(path), params);
  const SparsityReport rep = sparsity_report(mask, params.scalar_count());
  ojson j;
  j["mask"] = path.generic_string();
  j["prunable_params"] = mask.total_count();
  j["total_params"] = params.scalar_count();
  j["masked"] = mask.masked_count();
  j["prunable_sparsity"] = rep.prunable_sparsity;
  j["global_sparsity"] = rep.global_sparsity;
  return j.dump(2) + "\n";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::io: return 3;
    case ErrorCategory::parse: return 4;
    case ErrorCategory::shape: return 5;
    case ErrorCategory::precondition: return 6;
    case ErrorCategory::taxonomy: return 7;
  }
  return 1;
}

}  // namespace xlft
