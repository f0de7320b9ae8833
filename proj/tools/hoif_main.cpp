#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hoif/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"higher-order U-statistic estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_prefix;
  std::uint64_t seed = 0;
  int threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment configuration file (JSON, schema version 1)")
        ->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", threads, "cap worker threads");
    sub->add_option("--out", out_prefix, "override the output path prefix");
  };

  CLI::App* est = app.add_subcommand("estimate", "run one estimation experiment");
  CLI::App* plan = app.add_subcommand("plan", "evaluate the rate planner (no data generated)");
  CLI::App* verify = app.add_subcommand("verify", "run the exact-identity oracle suite");
  CLI::App* mc = app.add_subcommand("mc", "run a Monte Carlo study");
  for (auto* sub : {est, plan, verify, mc}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  std::string task;
  if (est->parsed()) task = "estimate";
  if (plan->parsed()) task = "plan";
  if (verify->parsed()) task = "verify";
  if (mc->parsed()) task = "mc";

  const hoif::RunResult rr = hoif::run_config_file(config_path, task, seed, threads, out_prefix);
  if (!rr.message.empty()) {
    (rr.exit_code == 0 ? std::cout : std::cerr) << rr.message << (rr.message.back() == '\n' ? "" : "\n");
  }
  for (const auto& f : rr.files) std::cout << "wrote " << f << "\n";
  return rr.exit_code;
}
