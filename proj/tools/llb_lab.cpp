#include "llb/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Stochastic LLB experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format;
  unsigned threads = 0;

  for (auto kind : {llb::ExperimentKind::simulate, llb::ExperimentKind::expand, llb::ExperimentKind::measure,
                    llb::ExperimentKind::eps_sweep, llb::ExperimentKind::oracle_check,
                    llb::ExperimentKind::identity_suite}) {
    auto* sub = app.add_subcommand(llb::to_string(kind));
    sub->add_option("--config", config_path, "flat key = value configuration document");
    sub->add_option("--seed", seed, "master seed (overrides noise.seed)");
    sub->add_option("--out", out_dir, "report directory (overrides output.dir)");
    sub->add_option("--format", format, "report format (overrides output.format)")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", threads, "worker threads, 0 = all cores");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : llb::exit_config;
  }

  llb::Overrides ov;
  for (auto* sub : app.get_subcommands()) ov.kind = llb::parse_kind(sub->get_name());
  if (app.get_subcommands().front()->count("--seed")) ov.seed = seed;
  if (!out_dir.empty()) ov.out_dir = out_dir;
  if (!format.empty()) ov.format = llb::parse_format(format);

  llb::ExperimentConfig cfg;
  try {
    cfg = config_path.empty() ? llb::parse_config("", ov) : llb::load_config(config_path, ov);
  } catch (const llb::ConfigError& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"messages", e.errors()}}.dump() << "\n";
    return llb::exit_config;
  }
  return llb::run(cfg, threads, std::cerr);
}
