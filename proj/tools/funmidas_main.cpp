#include "funmidas/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  namespace cli = funmidas::cli;
  CLI::App app{"Distribution nowcasting with functional MIDAS models"};
  app.require_subcommand(1, 1);

  cli::Options opt;
  std::string config, out;
  std::uint64_t seed = 0;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "write a synthetic indicator panel, micro samples and true densities"},
      {"estimate", "fit the FPCA and one estimator; write draws, summary and inclusion heat map"},
      {"nowcast", "run the pseudo-real-time nowcast exercise"},
      {"mc-study", "run the Monte Carlo comparison of estimators"},
      {"evaluate", "score density forecasts against realized densities"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run manifest")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--seed", seed, "master seed; overrides the manifest");
    sub->add_option("--threads", opt.threads, "OpenMP threads (0 keeps the default)")->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kConfig;
  }

  opt.command = app.get_subcommands().front()->get_name();
  opt.config = config;
  opt.out = out;
  if (app.get_subcommands().front()->count("--seed") > 0) opt.seed = seed;
  return cli::run(opt, std::cout, std::cerr);
}
