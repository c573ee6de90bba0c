#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dss/agents.hpp"
#include "dss/checkpoint.hpp"
#include "dss/evaluation.hpp"
#include "dss/muzero_agent.hpp"
#include "dss/oracle.hpp"
#include "dss/run_io.hpp"
#include "dss/scenario.hpp"
#include "dss/training.hpp"

#ifndef DSS_VERSION
#define DSS_VERSION "0.0.0"
#endif

namespace dss {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitFormat = 4;

/// Resolved settings of one CLI invocation.
struct RunConfig {
  std::string command;
  int scenario_id = 3;
  std::string scenario_file;
  int action_count = 0;  // 0 keeps the scenario default
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path out;
  std::filesystem::path checkpoint;
  std::vector<std::string> agents = {"trained", "proportional", "equal", "alternating", "oracle"};
  int horizon = 0;  // oracle; 0 means the whole episode
  bool record_timing = false;
  TrainHyperparams train;
  RandomizationSpec randomization;
  KeyValues scenario_overrides;
  std::vector<std::filesystem::path> inputs;  // export-plot-data run directories
  std::string input_text;  // config file contents, echoed verbatim into run directories
};

namespace detail {

inline std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& s : split(v, ',')) {
    const auto n = parse_int(key, s);
    if (n < 0) throw ConfigError(key + ": seeds must be >= 0");
    out.push_back(static_cast<std::uint64_t>(n));
  }
  if (out.empty()) throw ConfigError(key + ": empty seed list");
  return out;
}

template <typename T, typename Parse>
Range<T> parse_range(const std::string& key, const std::string& v, Parse parse) {
  const auto f = split(v, ',');
  if (f.size() != 2) throw ConfigError(key + ": expected `lo,hi`");
  return {parse(f[0]), parse(f[1])};
}

}  // namespace detail

/// Applies one `key = value` setting to a run configuration.
inline void apply_run_key(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "command") c.command = v;
  else if (key == "scenario") c.scenario_id = static_cast<int>(parse_int(key, v));
  else if (key == "scenario_file") c.scenario_file = v;
  else if (key == "action_count") c.action_count = static_cast<int>(parse_int(key, v));
  else if (key == "seed" || key == "seeds") c.seeds = detail::parse_seed_list(key, v);
  else if (key == "out") c.out = v;
  else if (key == "checkpoint") c.checkpoint = v;
  else if (key == "agents") c.agents = detail::split(v, ',');
  else if (key == "horizon") c.horizon = static_cast<int>(parse_int(key, v));
  else if (key == "record_timing") c.record_timing = parse_bool(key, v);
  else if (key == "iterations") c.train.iterations = static_cast<int>(parse_int(key, v));
  else if (key.rfind("train.", 0) == 0) {
    if (!apply_train_key(c.train, key.substr(6), v)) throw ConfigError("unknown key `" + key + "`");
  } else if (key.rfind("scenario.", 0) == 0) {
    c.scenario_overrides.emplace_back(key.substr(9), v);
  } else if (key == "randomize.packet_scale") {
    c.randomization.packet_scale =
        detail::parse_range<double>(key, v, [&](const std::string& s) { return parse_double(key, s); });
  } else if (key == "randomize.phase_shift") {
    c.randomization.phase_shift = detail::parse_range<int>(key, v, [&](const std::string& s) {
      return s == "max" ? RandomizationSpec::kWholePeriod : static_cast<int>(parse_int(key, s));
    });
  } else if (key == "randomize.distance_m") {
    if (v == "none") c.randomization.distance_m.reset();
    else
      c.randomization.distance_m =
          detail::parse_range<double>(key, v, [&](const std::string& s) { return parse_double(key, s); });
  } else {
    throw ConfigError("unknown key `" + key + "`");
  }
}

inline void apply_run_keys(RunConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_run_key(c, k, v);
}

/// Scenario selected by the configuration: file or built-in id, then
/// action_count, then `scenario.*` overrides.
inline ScenarioConfig resolve_scenario(const RunConfig& c) {
  ScenarioConfig s = c.scenario_file.empty()
                         ? build_scenario(c.scenario_id)
                         : scenario_from_text(read_text_file(c.scenario_file), c.scenario_file);
  if (c.action_count != 0) s.action_count = c.action_count;
  for (const auto& [k, v] : c.scenario_overrides)
    if (!apply_scenario_key(s, k, v)) throw ConfigError("unknown scenario key `scenario." + k + "`");
  s.validate();
  return s;
}

/// Complete resolved configuration as `key = value` text.
inline std::string run_config_to_text(const RunConfig& c) {
  std::ostringstream o;
  o << "command = " << c.command << "\n";
  if (c.scenario_file.empty()) o << "scenario = " << c.scenario_id << "\n";
  else o << "scenario_file = " << c.scenario_file << "\n";
  o << "action_count = " << c.action_count << "\n";
  o << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? "," : "") << c.seeds[i];
  o << "\n";
  o << "out = " << c.out.string() << "\n";
  if (!c.checkpoint.empty()) o << "checkpoint = " << c.checkpoint.string() << "\n";
  o << "record_timing = " << (c.record_timing ? "true" : "false") << "\n";
  o << train_to_text(c.train);
  const auto& r = c.randomization;
  o << "randomize.packet_scale = " << format_double(r.packet_scale.lo) << ","
    << format_double(r.packet_scale.hi) << "\n";
  o << "randomize.phase_shift = " << r.phase_shift.lo << ","
    << (r.phase_shift.hi == RandomizationSpec::kWholePeriod ? std::string("max")
                                                             : std::to_string(r.phase_shift.hi))
    << "\n";
  o << "randomize.distance_m = "
    << (r.distance_m ? format_double(r.distance_m->lo) + "," + format_double(r.distance_m->hi)
                     : std::string("none"))
    << "\n";
  for (const auto& [k, v] : c.scenario_overrides) o << "scenario." << k << " = " << v << "\n";
  return o.str();
}

inline std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::uint64_t seed,
                                             int iteration) {
  std::ostringstream name;
  name << "iter-" << std::setw(3) << std::setfill('0') << iteration << ".ckpt";
  return run_dir / "checkpoints" / ("seed-" + std::to_string(seed)) / name.str();
}

inline std::filesystem::path final_checkpoint_path(const std::filesystem::path& run_dir,
                                                   std::uint64_t seed) {
  return run_dir / "checkpoints" / ("seed-" + std::to_string(seed)) / "final.ckpt";
}

/// Called after every iteration with (seed, report).
using TrainObserver = std::function<void(std::uint64_t, const IterationReport&)>;

/// `train`: runs the configured iterations for every seed and writes
/// scores.csv, checkpoints, log.jsonl and manifest.json into `out`.
inline int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err,
                     const TrainObserver& observer = {}) {
  ScenarioConfig scenario;
  try {
    c.train.validate();
    scenario = resolve_scenario(c);
    if (c.out.empty()) throw ConfigError("train: --out is required");
    create_run_directory(c.out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const std::string config_text = run_config_to_text(c);
  const std::string scenario_text = scenario_to_text(scenario);
  write_file_atomic(c.out / "config.txt", config_text);
  if (!c.input_text.empty()) write_file_atomic(c.out / "config.input", c.input_text);
  write_file_atomic(c.out / "scenario.txt", scenario_text);
  nlohmann::json manifest = {
      {"code_version", DSS_VERSION},
      {"command", c.command},
      {"scenario", scenario.name},
      {"scenario_hash", git_blob_sha1(scenario_text)},
      {"config_hash", git_blob_sha1(config_text)},
      {"seeds", c.seeds},
      {"seed_derivation",
       "weights derive_seed(seed,{1}); episode e of iteration i derive_seed(seed,{2,i,e}); "
       "batches of iteration i derive_seed(seed,{3,i})"},
      {"root_dirichlet_noise", c.train.root_noise},
      {"randomized_training_environments", c.train.randomize},
      {"scores_version", kScoresVersion},
      {"wall_ms_recorded", c.record_timing}};
  write_file_atomic(c.out / "manifest.json", manifest.dump(2) + "\n");

  JsonlLogger log(c.out / "log.jsonl");
  std::ofstream scores(c.out / "scores.csv", std::ios::binary);
  scores << scores_preamble();
  scores.flush();
  log.log("start", {{"scenario", scenario.name}, {"iterations", c.train.iterations}, {"seeds", c.seeds}});

  for (const auto seed : c.seeds) {
    Trainer trainer(scenario, c.train, seed, c.randomization);
    for (int i = 0; i < c.train.iterations; ++i) {
      IterationReport rep;
      try {
        rep = trainer.train_iteration();
      } catch (const TrainingError& e) {
        const auto diag = c.out / ("diverged-seed-" + std::to_string(seed) + ".ckpt");
        save_checkpoint(trainer.weights(), diag);
        nlohmann::json d = {{"seed", seed}, {"iteration", i}, {"error", e.what()},
                            {"weights", diag.filename().string()}};
        write_file_atomic(c.out / "diagnostics.json", d.dump(2) + "\n");
        log.log("diverged", d);
        err << "error: training diverged (seed " << seed << ", iteration " << i << "): " << e.what()
            << "\n";
        return kExitDiverged;
      }
      ScoreRow row{rep.iteration, scenario.name, "trained", seed, rep.eval_score, rep.train_loss,
                   c.record_timing ? rep.wall_ms : 0.0};
      scores << format_score_row(row);
      scores.flush();
      const auto ckpt = checkpoint_path(c.out, seed, i);
      std::filesystem::create_directories(ckpt.parent_path());
      save_checkpoint(trainer.weights(), ckpt);
      log.log("iteration", {{"seed", seed},
                            {"iteration", rep.iteration},
                            {"eval_score", rep.eval_score},
                            {"train_loss", rep.train_loss},
                            {"value_loss", rep.mean_loss.value},
                            {"policy_loss", rep.mean_loss.policy},
                            {"reward_loss", rep.mean_loss.reward},
                            {"mean_episode_return", rep.mean_episode_return},
                            {"eval_actions", rep.eval_actions}});
      out << "seed " << seed << " iteration " << rep.iteration << " eval " << std::fixed
          << std::setprecision(5) << rep.eval_score << " loss " << rep.train_loss << "\n";
      if (observer) observer(seed, rep);
    }
    if (c.train.iterations > 0) save_checkpoint(trainer.weights(), final_checkpoint_path(c.out, seed));
  }
  log.log("done");
  return kExitOk;
}

inline std::unique_ptr<Agent> make_agent(const std::string& name,
                                         const std::shared_ptr<const ModelWeights>& weights) {
  if (name == "trained") {
    if (!weights) throw ConfigError("agent `trained` needs --checkpoint");
    return std::make_unique<MuZeroAgent>(weights);
  }
  if (name == "proportional") return std::make_unique<ProportionalAgent>();
  if (name == "equal") return std::make_unique<EqualSplitAgent>();
  if (name == "alternating" || name == "alternating-nr-first") return std::make_unique<AlternatingAgent>(0);
  if (name == "alternating-lte-first") return std::make_unique<AlternatingAgent>(1);
  if (name == "oracle") return std::make_unique<OracleAgent>();
  throw ConfigError("unknown agent `" + name + "`");
}

struct EvalRow {
  std::string scenario;
  std::string agent;
  std::uint64_t seed = 0;
  double score = 0.0;
  std::vector<int> actions;
};

/// `eval`: plays every requested agent on the scenario for each seed and
/// writes the comparison csv to `out` (when set).
inline int cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err,
                    std::vector<EvalRow>* rows_out = nullptr) {
  std::vector<EvalRow> rows;
  try {
    const ScenarioConfig scenario = resolve_scenario(c);
    std::shared_ptr<const ModelWeights> weights;
    if (std::find(c.agents.begin(), c.agents.end(), "trained") != c.agents.end()) {
      if (c.checkpoint.empty()) throw ConfigError("eval: agent `trained` needs --checkpoint");
      weights = std::make_shared<const ModelWeights>(load_checkpoint(c.checkpoint));
      const int obs_dim = Observation::dim(scenario.num_users(), weights->config.window);
      if (weights->config.obs_dim != obs_dim || weights->config.action_count != scenario.action_count)
        throw ConfigError("checkpoint shapes (obs_dim " + std::to_string(weights->config.obs_dim) +
                          ", actions " + std::to_string(weights->config.action_count) +
                          ") do not match the scenario (obs_dim " + std::to_string(obs_dim) +
                          ", actions " + std::to_string(scenario.action_count) + ")");
    }
    for (const auto& name : c.agents) {
      auto agent = make_agent(name, weights);
      for (const auto seed : c.seeds) {
        const auto ep = run_episode(*agent, Environment(scenario, seed));
        rows.push_back({scenario.name, name, seed, ep.score, ep.actions});
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFormat;
  }

  std::ostringstream csv;
  csv << "# eval-version " << kEvalVersion << "\n" << kEvalHeader << "\n";
  for (const auto& r : rows) {
    csv << r.scenario << "," << r.agent << "," << r.seed << "," << format_double(r.score) << ",";
    for (int a : r.actions) csv << a;
    csv << "\n";
    out << std::left << std::setw(24) << r.agent << " seed " << r.seed << "  score " << std::fixed
        << std::setprecision(5) << r.score << "\n";
  }
  if (!c.out.empty()) {
    if (c.out.has_parent_path()) std::filesystem::create_directories(c.out.parent_path());
    write_file_atomic(c.out, csv.str());
  }
  if (rows_out) *rows_out = std::move(rows);
  return kExitOk;
}

/// `oracle`: exact best action sequence over the horizon.
inline int cmd_oracle(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioConfig scenario = resolve_scenario(c);
    const int horizon = c.horizon > 0 ? c.horizon : scenario.episode_length;
    nlohmann::json results = nlohmann::json::array();
    for (const auto seed : c.seeds) {
      const OraclePlan plan = oracle_plan(scenario, horizon, {}, seed);
      std::string seq;
      for (int a : plan.actions) seq += std::to_string(a);
      out << scenario.name << " seed " << seed << " horizon " << horizon << " score " << std::fixed
          << std::setprecision(6) << plan.score << " actions " << seq << " (" << plan.nodes
          << " nodes)\n";
      results.push_back({{"scenario", scenario.name}, {"seed", seed}, {"horizon", horizon},
                         {"score", plan.score}, {"actions", plan.actions}, {"nodes", plan.nodes}});
    }
    if (!c.out.empty()) write_file_atomic(c.out, results.dump(2) + "\n");
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BudgetError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

/// `export-plot-data`: one tidy csv per scenario with the per-iteration
/// median over seeds, every seed's score and the perfect-score reference 16.
inline int cmd_export_plot_data(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.inputs.empty()) {
    err << "error: export-plot-data needs at least one run directory\n";
    return kExitConfig;
  }
  // scenario -> agent -> iteration -> seed -> score
  std::map<std::string, std::map<std::string, std::map<int, std::map<std::uint64_t, double>>>> data;
  std::map<std::string, std::set<std::uint64_t>> seeds;
  try {
    for (const auto& dir : c.inputs) {
      const auto path = dir / "scores.csv";
      if (!std::filesystem::exists(path)) throw ConfigError("missing " + path.string());
      for (const auto& r : parse_scores(read_text_file(path), path.string())) {
        data[r.scenario][r.agent][r.iteration][r.seed] = r.eval_score;
        seeds[r.scenario].insert(r.seed);
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFormat;
  }
  const auto out_dir = c.out.empty() ? std::filesystem::path("plot-data") : c.out;
  std::filesystem::create_directories(out_dir);
  for (const auto& [scenario, agents] : data) {
    std::ostringstream csv;
    csv << "iteration,agent,median,reference";
    for (auto s : seeds[scenario]) csv << ",seed_" << s;
    csv << "\n";
    for (const auto& [agent, iters] : agents)
      for (const auto& [it, per_seed] : iters) {
        std::vector<double> v;
        for (const auto& [s, score] : per_seed) v.push_back(score);
        csv << it << "," << agent << "," << format_double(median(v)) << ",16";
        for (auto s : seeds[scenario]) {
          csv << ",";
          if (auto f = per_seed.find(s); f != per_seed.end()) csv << format_double(f->second);
        }
        csv << "\n";
      }
    const auto path = out_dir / ("plot-" + scenario + ".csv");
    write_file_atomic(path, csv.str());
    out << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace dss
