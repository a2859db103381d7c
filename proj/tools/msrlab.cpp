#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "msrlab/msrlab.hpp"

using namespace msrlab;

int main(int argc, char** argv) {
  CLI::App app{"Repository-mining pipeline with explicit variant configuration"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path;
  std::string out_dir = "out";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "TOML configuration file")->required();
  app.add_option("--out", out_dir, "artifact directory")->capture_default_str();
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", seed, "override every variant's bootstrap seed");

  const std::vector<std::pair<std::string, run::Command>> commands{
      {"extract", run::Command::extract},   {"networks", run::Command::networks},
      {"roles", run::Command::roles},       {"brooks", run::Command::brooks},
      {"turnover", run::Command::turnover}, {"compare", run::Command::compare},
      {"report", run::Command::report}};
  const std::map<std::string, std::string> help{
      {"extract", "write fact tables and window counts"},
      {"networks", "write per-window developer networks"},
      {"roles", "run the core/peripheral classification study"},
      {"brooks", "run the team size and productivity study"},
      {"turnover", "run the turnover and bug density study"},
      {"compare", "run every enabled study per variant and compare variants"},
      {"report", "render report.md from existing artifacts"}};
  for (const auto& [name, cmd] : commands) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  run::Command cmd = run::Command::compare;
  for (const auto& [name, c] : commands)
    if (app.got_subcommand(name)) cmd = c;

  config::Config cfg;
  try {
    cfg = config::load(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  run::Options opts;
  opts.out = out_dir;
  opts.jobs = jobs;
  opts.seed = seed;
  opts.log = [](const std::string& msg) { std::cerr << msg << "\n"; };
  try {
    auto summary = run::run(cfg, cmd, opts);
    for (const auto& v : summary.variants)
      if (!v.ok) std::cerr << "analysis failure: variant '" << v.name << "', stage '" << v.stage << "': " << v.error << "\n";
    return summary.exit_code;
  } catch (const RepositoryError& e) {
    std::cerr << "repository error: " << e.what() << "\n";
    return 3;
  } catch (const StageError& e) {
    std::cerr << "analysis failure in stage '" << e.stage() << "': " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "analysis failure in stage '" << run::to_string(cmd) << "': " << e.what() << "\n";
    return 1;
  }
}
