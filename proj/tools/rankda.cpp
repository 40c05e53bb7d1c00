// rankda: command-line front end. See README for commands and flags.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rankda/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bayesian rank aggregation with data augmentation and sandwich samplers"};
  app.require_subcommand(1);
  rankda::CliOptions opt;
  std::string config, data, schema, out;
  std::uint64_t seed = 0;
  std::size_t chains = 0;

  const char* commands[][2] = {
      {"simulate", "draw a synthetic data set"},
      {"gibbs", "run the two-block Gibbs sampler"},
      {"sandwich", "run the sandwich sampler"},
      {"em", "estimate lambda by Monte Carlo EM"},
      {"oracle", "exact posterior, transition matrix and spectra"},
      {"diagnose", "diagnostics of a stored run"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config, "JSON configuration file");
    sub->add_option("--data", data, "ranking data (CSV), or the stored run for diagnose");
    sub->add_option("--schema", schema, "covariate schema (JSON)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "random seed (overrides the configuration)");
    sub->add_option("--chains", chains, "number of parallel chains")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (!config.empty()) opt.config = config;
  if (!data.empty()) opt.data = data;
  if (!schema.empty()) opt.schema = schema;
  if (!out.empty()) opt.out = out;
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--chains")) opt.chains = chains;
  return rankda::run_command(sub->get_name(), opt, std::cerr);
}
