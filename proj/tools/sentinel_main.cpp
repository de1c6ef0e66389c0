#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "sentinel/episode_log.hpp"
#include "sentinel/eval.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/scenario_gen.hpp"
#include "sentinel/serve.hpp"

using namespace sentinel;

namespace {

void add_run_flags(CLI::App* cmd, RunConfig& cfg, std::string& level) {
  cmd->add_option("--scenario", cfg.scenario_path, "Scenario JSON file")->required();
  cmd->add_option("--seed", cfg.seed, "Override the scenario seed");
  cmd->add_option("--threshold", cfg.threshold, "Passive alert threshold in [0,1]");
  cmd->add_option("--llm", cfg.llm, "mock or http:<endpoint>");
  cmd->add_option("--out", cfg.out_dir, "Output directory");
  cmd->add_option("--renewal-rate", cfg.renewal_rate, "Corpus renewal rate in [0,1]");
  cmd->add_option("--level", level, "Prompt level: mini, middle or high");
  cmd->add_option("--corpus", cfg.corpus_path, "Corpus log (default <out>/corpus.ndjson)");
  cmd->add_option("--rubric", cfg.rubric_path, "Mission rubric JSON (default: built in)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sentinel: cooperative perception and reasoning for road safety"};
  app.require_subcommand(1);

  RunConfig run;
  std::string run_level = "middle";
  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario end to end and write its episode log");
  add_run_flags(run_cmd, run, run_level);

  EvalConfig eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Perception report from logs, or the renewal and intensity sweeps");
  eval_cmd->add_option("--mode", eval.mode, "perception or sweeps");
  eval_cmd->add_option("--log", eval.logs, "Episode log (repeatable)");
  eval_cmd->add_option("--suite", eval.suite_dir, "Scenario suite directory (sweeps)");
  eval_cmd->add_option("--seed", eval.seed, "Sweep seed");
  eval_cmd->add_option("--epochs", eval.sweep.epochs, "Passes over the suite per sweep column");
  eval_cmd->add_option("--out", eval.out_dir, "Output directory");

  ServeConfig serve;
  std::string serve_level = "middle";
  CLI::App* serve_cmd = app.add_subcommand("serve", "Host a live session behind the HTTP API");
  add_run_flags(serve_cmd, serve.run, serve_level);
  serve_cmd->add_option("--port", serve.port, "TCP port (0 picks one)");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--tick-ms", serve.tick_ms, "Wall-clock milliseconds per simulated tick");

  std::vector<std::string> to_validate;
  CLI::App* validate_cmd = app.add_subcommand("validate", "Check scenario files");
  validate_cmd->add_option("--scenario", to_validate, "Scenario JSON file (repeatable)")->required();

  std::string replay_log;
  CLI::App* replay_cmd = app.add_subcommand("replay", "Print a log's frame/alert event stream");
  replay_cmd->add_option("--log", replay_log, "Episode log")->required();

  std::string fixtures_dir;
  CLI::App* fixtures_cmd = app.add_subcommand("fixtures", "Regenerate the bundled scenario fixtures");
  fixtures_cmd->add_option("--out", fixtures_dir, "Target directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      run.level = prompt_level_from_string(run_level);
      const RunOutcome out = cmd_run(run);
      std::printf("log %s\n", out.log_path.string().c_str());
      std::printf("alerts %zu, corpus boxes committed %zu\n", out.alerts, out.committed.size());
      if (out.collision_tick) std::printf("collision at tick %lld\n", static_cast<long long>(*out.collision_tick));
      return out.exit_code;
    }
    if (*eval_cmd) {
      for (const auto& p : cmd_eval(eval)) std::printf("wrote %s\n", p.string().c_str());
      return 0;
    }
    if (*serve_cmd) {
      serve.run.level = prompt_level_from_string(serve_level);
      return cmd_serve(serve);
    }
    if (*validate_cmd) {
      int bad = 0;
      for (const std::string& path : to_validate) {
        try {
          const Scenario sc = load_scenario_file(path);
          std::printf("ok %s (%s, %lld ticks, %zu agents)\n", path.c_str(), sc.id.c_str(),
                      static_cast<long long>(sc.tick_count()), sc.sensing_agent_ids().size());
        } catch (const Error& e) {
          std::printf("invalid %s: %s\n", path.c_str(), e.what());
          ++bad;
        }
      }
      return bad ? 1 : 0;
    }
    if (*replay_cmd) {
      const EpisodeLog log = read_episode_log(replay_log);
      for (const json& rec : log.ticks) {
        for (const StreamEvent& e : stream_events(rec)) std::cout << e.sse();
      }
      return 0;
    }
    if (*fixtures_cmd) {
      write_fixtures(fixtures_dir);
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
