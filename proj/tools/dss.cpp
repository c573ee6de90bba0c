// Command-line driver: train, eval, oracle, export-plot-data.
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dss/cli.hpp"

namespace {

struct Flags {
  std::string config_file;
  std::vector<std::string> sets;
  std::string scenario, scenario_file, actions, seed, out, checkpoint, agents, horizon, iterations;
  bool record_timing = false;
  bool no_root_noise = false;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "key = value run configuration file");
  cmd->add_option("--set", f.sets, "override one setting, key=value (repeatable)");
  cmd->add_option("--scenario", f.scenario, "built-in scenario 1..4");
  cmd->add_option("--scenario-file", f.scenario_file, "scenario description file");
  cmd->add_option("--actions", f.actions, "number of bandwidth-split actions N");
  cmd->add_option("--seed,--seeds", f.seed, "seed or comma-separated seeds");
  cmd->add_option("--out", f.out, "output path");
}

// Later entries win: file first, then flags in a fixed order, then --set.
dss::KeyValues cli_overrides(const CLI::App* cmd, const Flags& f) {
  dss::KeyValues kv;
  auto put = [&](const char* opt, const char* key, const std::string& v) {
    if (cmd->get_option_no_throw(opt) && cmd->count(opt) > 0) kv.emplace_back(key, v);
  };
  put("--scenario", "scenario", f.scenario);
  put("--scenario-file", "scenario_file", f.scenario_file);
  put("--actions", "action_count", f.actions);
  put("--seed", "seeds", f.seed);
  put("--out", "out", f.out);
  put("--checkpoint", "checkpoint", f.checkpoint);
  put("--agents", "agents", f.agents);
  put("--horizon", "horizon", f.horizon);
  put("--iterations", "iterations", f.iterations);
  if (f.record_timing) kv.emplace_back("record_timing", "true");
  if (f.no_root_noise) kv.emplace_back("train.root_noise", "false");
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw dss::ConfigError("--set expects key=value, got `" + s + "`");
    kv.emplace_back(dss::detail::trim(s.substr(0, eq)), dss::detail::trim(s.substr(eq + 1)));
  }
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LTE/NR dynamic spectrum sharing simulator and learned-model controller"};
  app.set_version_flag("--version", DSS_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train the controller and write a run directory");
  add_common(train, f);
  train->add_option("--iterations", f.iterations, "training iterations");
  train->add_flag("--record-timing", f.record_timing, "write real wall_ms instead of 0");
  train->add_flag("--no-root-noise", f.no_root_noise, "disable root Dirichlet noise");

  auto* eval = app.add_subcommand("eval", "compare the trained agent with baselines and the oracle");
  add_common(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "trained weights");
  eval->add_option("--agents", f.agents,
                   "comma list of trained,proportional,equal,alternating,alternating-lte-first,oracle");

  auto* oracle = app.add_subcommand("oracle", "exact best action sequence on the true environment");
  add_common(oracle, f);
  oracle->add_option("--horizon", f.horizon, "subframes to plan (default: whole episode)");

  auto* plot = app.add_subcommand("export-plot-data", "per-scenario tidy csv files from run directories");
  plot->add_option("runs", f.inputs, "run directories")->required();
  plot->add_option("--out", f.out, "output directory (default plot-data)");

  CLI11_PARSE(app, argc, argv);

  dss::RunConfig cfg;
  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (!f.config_file.empty()) {
      cfg.input_text = dss::read_text_file(f.config_file);
      dss::apply_run_keys(cfg, dss::parse_key_values(cfg.input_text, f.config_file));
    }
    dss::apply_run_keys(cfg, cli_overrides(cmd, f));
    for (const auto& p : f.inputs) cfg.inputs.emplace_back(p);
    // A reloaded config.txt carries its own command line; the subcommand wins.
    cfg.command = cmd->get_name();
  } catch (const dss::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dss::kExitConfig;
  }

  try {
    if (cfg.command == "train") return dss::cmd_train(cfg, std::cout, std::cerr);
    if (cfg.command == "eval") return dss::cmd_eval(cfg, std::cout, std::cerr);
    if (cfg.command == "oracle") return dss::cmd_oracle(cfg, std::cout, std::cerr);
    return dss::cmd_export_plot_data(cfg, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
