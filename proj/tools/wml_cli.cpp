#include "app.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace wml::app;
  CLI::App cli{"Matrix-weighted martingale square function toolkit"};
  cli.require_subcommand(1);
  cli.set_help_all_flag("--help-all");

  std::optional<std::string> config;
  Overrides flags;
  std::string out;
  cli.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  cli.add_option("--seed", flags.seed, "Random seed (falls back to WML_SEED)");
  cli.add_option("--p", flags.p, "Exponent p");
  cli.add_option("--d", flags.d, "Matrix dimension");
  cli.add_option("--depth", flags.depth, "Filtration depth");
  cli.add_option("--cgamma", flags.cgamma, "Stopping threshold");
  cli.add_option("--out", flags.out, "Output directory");
  cli.add_option("--parallel", flags.parallel, "Worker threads");
  cli.add_flag("--acceptance", flags.acceptance, "Also assert the slope windows (check)");

  std::vector<std::string> inputs;
  auto add = [&](const char* name, const char* help, bool takes_input) {
    CLI::App* sub = cli.add_subcommand(name, help);
    sub->fallthrough();
    if (takes_input) sub->add_option("input", inputs, "Sweep CSV");
    return sub;
  };
  add("gen", "Write a space, weight and function from a generator spec", false);
  add("check", "Run the invariant suite", false);
  add("sweep", "Sweep a weight family and fit the exponent", false);
  add("fit", "Fit log ratio against log ap_char from a sweep CSV", true);
  add("report", "Summarize a sweep CSV", true);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    const RunConfig cfg = load_config(cli.get_subcommands().front()->get_name(), config, flags, inputs);
    return run(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitUsage;
}
