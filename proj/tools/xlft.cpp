// xlft: data generation, training, evaluation and sparsity reports.
#include <CLI11.hpp>
#include <iostream>

#include "xlft/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::string strategy;
  std::uint64_t seed = 0;
  std::string out;
  std::string mask;
};

void add_common(CLI::App* cmd, Flags& f, bool with_strategy) {
  cmd->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "run a single seed instead of the configured list");
  cmd->add_option("--out", f.out, "output directory");
  if (with_strategy) {
    cmd->add_option("--strategy", f.strategy, "ce, prior_wn, prior_em, prior_em+sft, prior_em+cdm or prior_em+sft+cdm");
  }
}

xlft::CliOverrides overrides(const CLI::App* cmd, const Flags& f) {
  xlft::CliOverrides o;
  auto given = [cmd](const char* name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--config")) o.config = f.config;
  if (given("--strategy")) o.strategy = f.strategy;
  if (given("--seed")) o.seed = f.seed;
  if (given("--out")) o.out = f.out;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual fine-tuning toolkit"};
  app.set_version_flag("--version", std::string(xlft::version()));
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus, taxonomy, embeddings and lexicons");
  add_common(gen, f, false);
  auto* dist = app.add_subcommand("build-distances", "build the wordnet and embedding distance matrices");
  add_common(dist, f, false);
  auto* train = app.add_subcommand("train", "train one strategy for every configured seed");
  add_common(train, f, true);
  auto* eval = app.add_subcommand("evaluate", "evaluate checkpoints and aggregate over seeds");
  add_common(eval, f, true);
  auto* sparsity = app.add_subcommand("report-sparsity", "prunable and global sparsity of a mask");
  add_common(sparsity, f, true);
  sparsity->add_option("--mask", f.mask, "mask container (default: the run's mask.xlft)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      xlft::cmd_gen_data(xlft::resolve_config(overrides(gen, f), xlft::OutputRole::data), std::cerr);
    } else if (dist->parsed()) {
      xlft::cmd_build_distances(xlft::resolve_config(overrides(dist, f), xlft::OutputRole::data), std::cerr);
    } else if (train->parsed()) {
      xlft::cmd_train(xlft::resolve_config(overrides(train, f), xlft::OutputRole::runs), std::cerr);
    } else if (eval->parsed()) {
      std::cout << xlft::cmd_evaluate(xlft::resolve_config(overrides(eval, f), xlft::OutputRole::runs), std::cerr);
    } else if (sparsity->parsed()) {
      std::optional<std::filesystem::path> mask;
      if (sparsity->count("--mask")) mask = f.mask;
      std::cout << xlft::cmd_report_sparsity(
          xlft::resolve_config(overrides(sparsity, f), xlft::OutputRole::runs), mask);
    }
  } catch (const xlft::Error& e) {
    std::cerr << "error[" << xlft::to_string(e.category()) << "]: " << e.what() << "\n";
    return xlft::exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << "\n";
    return xlft::exit_code(xlft::ErrorCategory::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
