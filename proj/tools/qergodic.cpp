#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "qergodic/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace qergodic;
  CLI::App app{"Quasi-stationary and quasi-ergodic measures of absorbing Markov chains"};
  app.require_subcommand(1);

  cli::CommandOptions co;
  if (const char* env = std::getenv("QERGODIC_SEED")) {
    try {
      co.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: QERGODIC_SEED is not an unsigned integer\n";
      return 1;
    }
  }
  std::string format = "table";
  std::string file;
  double rho_tol = 0.0;

  const std::map<std::string, std::string> about{
      {"analyze", "full report: normal form, spectra, paths, assumptions, measures"},
      {"qed", "quasi-ergodic measure"},
      {"qsd", "quasi-stationary distribution"},
      {"paths", "admissible block paths and the maximal family"},
      {"finite-n", "exact conditioned occupation at horizon --n"},
      {"simulate", "Monte Carlo occupation estimates"},
      {"verify", "exact identities and finite-n convergence checks"}};
  for (const auto& name : cli::command_names()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("file", file, "chain document (JSON or CSV), - for stdin")->required();
    sub->add_option("--format", format)->check(CLI::IsMember({"json", "table"}));
    sub->add_option("--n", co.n, "horizon")->check(CLI::NonNegativeNumber);
    sub->add_option("--trials", co.trials)->check(CLI::PositiveNumber);
    sub->add_option("--seed", co.seed);
    sub->add_option("--n-max", co.n_max, "largest horizon for exact identities")->check(CLI::NonNegativeNumber);
    sub->add_option("--rho-tol", rho_tol, "relative tolerance for equal spectral radii");
    sub->add_flag("--no-pi-restriction", co.no_pi_restriction);
    sub->add_flag("--conditioned", co.conditioned, "sample the survival-conditioned law exactly");
    sub->add_option("--workers", co.workers);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  co.format = format == "json" ? cli::Format::Json : cli::Format::Table;
  const std::string cmd = app.get_subcommands().front()->get_name();
  if (app.get_subcommands().front()->count("--rho-tol") > 0) co.rho_tol = rho_tol;

  cli::ChainDocument doc;
  try {
    doc = cli::parse_document(file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  const auto r = cli::run_command(cmd, doc, co);
  std::cout << r.out;
  std::cerr << r.err;
  return r.exit_code;
}
