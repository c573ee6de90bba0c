#include <gtest/gtest.h>

#include <sstream>
#include <unistd.h>

#include "dss/cli.hpp"

using namespace dss;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("dss-cli-" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d.parent_path());
  return d;
}

RunConfig tiny_train(const fs::path& out, int iterations) {
  RunConfig c;
  c.command = "train";
  c.scenario_id = 3;
  c.out = out;
  c.seeds = {4};
  apply_run_keys(c, parse_key_values("train.episodes = 2\ntrain.simulations = 4\n"
                                     "train.train_steps = 2\ntrain.batch_size = 4\n"
                                     "train.hidden = 8\ntrain.state_dim = 4\n"));
  c.train.iterations = iterations;
  return c;
}

}  // namespace

TEST(RunKeys, ApplyAndEcho) {
  RunConfig c;
  apply_run_keys(c, parse_key_values("scenario = 2\naction_count = 3\nseeds = 1,2,3\n"
                                     "train.learning_rate = 0.001\nrandomize.phase_shift = 0,max\n"
                                     "randomize.distance_m = none\nscenario.user.0.packet_bits = 8000\n"));
  EXPECT_EQ(c.scenario_id, 2);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.train.learning_rate, 1e-3);
  EXPECT_EQ(c.randomization.phase_shift.hi, RandomizationSpec::kWholePeriod);
  EXPECT_FALSE(c.randomization.distance_m.has_value());
  const auto s = resolve_scenario(c);
  EXPECT_EQ(s.action_count, 3);
  EXPECT_EQ(s.users[0].packet_bits, 8000);
  // The echoed configuration reproduces itself.
  RunConfig again;
  apply_run_keys(again, parse_key_values(run_config_to_text(c)));
  EXPECT_EQ(run_config_to_text(again), run_config_to_text(c));
}

TEST(RunKeys, UnknownKeysRejected) {
  RunConfig c;
  EXPECT_THROW(apply_run_key(c, "colour", "red"), ConfigError);
  EXPECT_THROW(apply_run_key(c, "train.bogus", "1"), ConfigError);
  EXPECT_THROW(apply_run_key(c, "seeds", "-1"), ConfigError);
  c.scenario_overrides.emplace_back("bogus", "1");
  EXPECT_THROW(resolve_scenario(c), ConfigError);
}

TEST(Train, ZeroIterationsWritesHeaderOnly) {
  const auto dir = scratch("zero");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(tiny_train(dir, 0), out, err), kExitOk) << err.str();
  EXPECT_EQ(read_text_file(dir / "scores.csv"), scores_preamble());
  for (const char* f : {"config.txt", "scenario.txt", "manifest.json", "log.jsonl"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  EXPECT_EQ(manifest["scenario_hash"], git_blob_sha1(read_text_file(dir / "scenario.txt")));
  EXPECT_EQ(manifest["wall_ms_recorded"], false);
}

TEST(Train, RefusesExistingDirectory) {
  const auto dir = scratch("exists");
  fs::create_directories(dir);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train(tiny_train(dir, 1), out, err), kExitConfig);
  EXPECT_NE(err.str().find("already exists"), std::string::npos);
}

TEST(Train, InvalidConfigExitCode) {
  auto c = tiny_train(scratch("bad"), 1);
  c.train.td_steps = 1;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train(c, out, err), kExitConfig);
}

TEST(Train, RerunIsByteIdenticalAndCheckpointsLoad) {
  const auto a = scratch("rerun-a"), b = scratch("rerun-b");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(tiny_train(a, 2), out, err), kExitOk) << err.str();
  ASSERT_EQ(cmd_train(tiny_train(b, 2), out, err), kExitOk) << err.str();
  const auto sa = read_text_file(a / "scores.csv");
  EXPECT_EQ(sa, read_text_file(b / "scores.csv"));
  const auto rows = parse_scores(sa);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].iteration, 1);
  EXPECT_EQ(rows[1].wall_ms, 0.0);
  EXPECT_EQ(read_text_file(checkpoint_path(a, 4, 1)), read_text_file(checkpoint_path(b, 4, 1)));
  EXPECT_EQ(read_text_file(checkpoint_path(a, 4, 1)), read_text_file(final_checkpoint_path(a, 4)));
  EXPECT_TRUE(fs::exists(a / "checkpoints" / "seed-4" / "iter-000.ckpt"));
}

TEST(Train, DivergenceWritesDiagnostics) {
  const auto dir = scratch("diverge");
  auto c = tiny_train(dir, 1);
  c.train.learning_rate = 1e300;
  c.train.train_steps = 20;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train(c, out, err), kExitDiverged);
  EXPECT_TRUE(fs::exists(dir / "diagnostics.json"));
  EXPECT_TRUE(fs::exists(dir / "diverged-seed-4.ckpt"));
}

TEST(Eval, FiveAgentRows) {
  const auto dir = scratch("eval");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(tiny_train(dir, 1), out, err), kExitOk) << err.str();
  RunConfig c;
  c.command = "eval";
  c.scenario_id = 3;
  c.checkpoint = final_checkpoint_path(dir, 4);
  c.out = dir / "eval.csv";
  std::vector<EvalRow> rows;
  ASSERT_EQ(cmd_eval(c, out, err, &rows), kExitOk) << err.str();
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].agent, "trained");
  EXPECT_EQ(rows[4].agent, "oracle");
  for (const auto& r : rows) {
    EXPECT_LE(r.score, rows[4].score + 1e-12);
    EXPECT_EQ(r.actions.size(), 16u);
  }
  const auto csv = read_text_file(c.out);
  EXPECT_EQ(csv.rfind("# eval-version 1\nscenario,agent,seed,score,actions\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Eval, ShapeMismatchAndMissingCheckpoint) {
  const auto dir = scratch("eval-mismatch");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(tiny_train(dir, 1), out, err), kExitOk);
  RunConfig c;
  c.scenario_id = 3;
  c.action_count = 4;
  c.checkpoint = final_checkpoint_path(dir, 4);
  EXPECT_EQ(cmd_eval(c, out, err), kExitConfig);
  c.action_count = 0;
  c.checkpoint = dir / "nope.ckpt";
  EXPECT_EQ(cmd_eval(c, out, err), kExitFormat);
  c.checkpoint.clear();
  EXPECT_EQ(cmd_eval(c, out, err), kExitConfig);
}

TEST(Oracle, WritesJson) {
  const auto dir = scratch("oracle");
  fs::create_directories(dir);
  RunConfig c;
  c.scenario_id = 1;
  c.horizon = 8;
  c.out = dir / "oracle.json";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_oracle(c, out, err), kExitOk) << err.str();
  const auto j = nlohmann::json::parse(read_text_file(c.out));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["actions"].size(), 8u);
  EXPECT_LE(j[0]["score"].get<double>(), 8.0);
}

TEST(ExportPlotData, MedianAndReference) {
  const auto dir = scratch("plot");
  fs::create_directories(dir / "r1");
  fs::create_directories(dir / "r2");
  std::string a = scores_preamble(), b = scores_preamble();
  a += format_score_row({0, "sx", "trained", 1, 10.0, 1.0, 0.0});
  a += format_score_row({0, "sx", "trained", 2, 14.0, 1.0, 0.0});
  b += format_score_row({0, "sx", "trained", 3, 12.0, 1.0, 0.0});
  write_file_atomic(dir / "r1" / "scores.csv", a);
  write_file_atomic(dir / "r2" / "scores.csv", b);
  RunConfig c;
  c.inputs = {dir / "r1", dir / "r2"};
  c.out = dir / "out";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_export_plot_data(c, out, err), kExitOk) << err.str();
  EXPECT_EQ(read_text_file(dir / "out" / "plot-sx.csv"),
            "iteration,agent,median,reference,seed_1,seed_2,seed_3\n0,trained,12,16,10,14,12\n");
  c.inputs = {dir / "missing"};
  EXPECT_EQ(cmd_export_plot_data(c, out, err), kExitConfig);
}
