#include "marvel/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "marvel/attribute_cases.hpp"
#include "marvel/checkpoint.hpp"
#include "marvel/controllers.hpp"
#include "marvel/csv_io.hpp"
#include "marvel/evaluation.hpp"
#include "marvel/rds.hpp"
#include "marvel/replay.hpp"
#include "marvel/scenario.hpp"
#include "marvel/trainer.hpp"
#include "marvel/units.hpp"

namespace marvel::cli {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string scenario = "desk";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::string> algorithm;
  std::optional<std::int64_t> checkpoint_every;
  std::string out;
  bool resume = false;
};

struct EvaluateArgs {
  std::vector<std::string> controllers;
  std::vector<std::string> scenarios = {"desk-eval"};
  std::string checkpoint;
  std::string config;
  bool mask = false;
  int seeds = 5;
  std::optional<std::uint64_t> seed_base;
  std::string out;
  bool logs = false;
};

struct ReplayArgs {
  std::string data;
  std::string checkpoint;
  bool mask = false;
  std::vector<double> gantries;
  std::string out = ".";
};

struct AttributeArgs {
  std::string log;
  std::string checkpoint;
  std::vector<std::string> cases;
  int samples = 5;
  int steps = 256;
  std::string out;
};

struct ExportArgs {
  std::string log;
  std::string scenario;
  std::string out = ".";
};

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string checkpoint_name(std::int64_t step) {
  std::ostringstream ss;
  ss << "checkpoint_" << std::setw(9) << std::setfill('0') << step << ".json";
  return ss.str();
}

// Newest checkpoint in `dir` that loads cleanly; corrupt ones are reported
// and skipped. A readable checkpoint from a different config is an error.
std::optional<io::LoadedCheckpoint> latest_checkpoint(const std::string& dir,
                                                      const train::TrainConfig& config) {
  std::vector<std::string> names;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string n = e.path().filename().string();
      if (n.rfind("checkpoint_", 0) == 0 && e.path().extension() == ".json") names.push_back(n);
    }
  }
  std::sort(names.rbegin(), names.rend());
  for (const auto& n : names) {
    std::optional<io::LoadedCheckpoint> ck;
    try {
      ck = io::load_checkpoint(join(dir, n));
    } catch (const ValidationError& e) {
      std::cerr << "skipping " << n << ": " << e.what() << '\n';
      continue;
    }
    if (ck->config_hash != train::config_hash(config)) {
      throw ValidationError(n + " was written with a different training config");
    }
    return ck;
  }
  return std::nullopt;
}

int run_train(const TrainArgs& a) {
  train::TrainConfig config;
  if (!a.config.empty()) config = train::load_config_file(a.config);
  if (a.seed) config.seed = *a.seed;
  if (a.steps) config.training_step_max = *a.steps;
  if (a.algorithm) config.algorithm = train::algorithm_from_string(*a.algorithm);
  if (a.checkpoint_every) config.checkpoint_every = *a.checkpoint_every;
  config.validate();
  const Scenario scenario = resolve_scenario(a.scenario);
  ensure_dir(a.out);

  std::optional<io::LoadedCheckpoint> resumed;
  std::vector<train::CurvePoint> prefix;
  const std::string curve_path = join(a.out, "learning_curve.csv");
  if (a.resume) {
    resumed = latest_checkpoint(a.out, config);
    if (resumed) {
      if (resumed->scenario_name != scenario.name) {
        throw ValidationError("checkpoint was trained on scenario '" + resumed->scenario_name +
                              "'");
      }
      if (fs::exists(curve_path)) {
        std::ifstream in(curve_path);
        for (const auto& p : io::read_learning_curve(in)) {
          if (p.step <= resumed->learner.training_step) prefix.push_back(p);
        }
      }
      std::cerr << "resuming at step " << resumed->learner.training_step << '\n';
    } else {
      std::cerr << "no usable checkpoint in " << a.out << ", starting fresh\n";
    }
  }

  env::VslEnv environment(scenario, env::RewardWeights{});
  train::TrainHooks hooks;
  hooks.on_checkpoint = [&](const train::Learner& l) {
    io::save_checkpoint(join(a.out, checkpoint_name(l.training_step)), l, scenario.name);
  };
  hooks.on_progress = [](const train::CurvePoint& p) {
    std::cerr << "step " << p.step << " mean_total " << io::format_double(p.mean_total) << '\n';
  };
  auto result = train::train(config, environment, hooks, resumed ? &resumed->learner : nullptr);
  prefix.insert(prefix.end(), result.curve.begin(), result.curve.end());

  std::ostringstream curve;
  io::write_learning_curve(curve, prefix);
  io::write_text_file(curve_path, curve.str());
  io::save_checkpoint(join(a.out, "final.json"), result.learner, scenario.name);
  std::cout << "trained " << train::to_string(config.algorithm) << " to step "
            << result.learner.training_step << "; artifacts in " << a.out << '\n';
  return kExitOk;
}

std::unique_ptr<control::Controller> make_controller(const std::string& kind,
                                                     const EvaluateArgs& a) {
  if (kind == "no-control") return std::make_unique<control::NoControl>();
  if (kind == "speed-matching") return std::make_unique<control::SpeedMatching>();
  if (kind == "policy") {
    if (a.checkpoint.empty()) throw ValidationError("--controller policy needs --checkpoint");
    std::optional<train::TrainConfig> expected;
    if (!a.config.empty()) expected = train::load_config_file(a.config);
    auto ck = io::load_checkpoint(a.checkpoint, expected);
    std::string label = train::to_string(ck.learner.config.algorithm);
    if (a.mask) label += "+iam";
    return std::make_unique<control::PolicyController>(ck.learner.actor, a.mask,
                                                       control::PolicyMode::kArgmax, 0, label);
  }
  throw ValidationError("unknown controller '" + kind +
                        "' (no-control, speed-matching, policy)");
}

int run_evaluate(const EvaluateArgs& a) {
  if (a.seeds < 1) throw ValidationError("--seeds must be >= 1");
  std::vector<std::unique_ptr<control::Controller>> controllers;
  for (const auto& c : a.controllers) controllers.push_back(make_controller(c, a));
  std::vector<Scenario> scenarios;
  for (const auto& s : a.scenarios) scenarios.push_back(resolve_scenario(s));
  ensure_dir(a.out);

  std::vector<eval::EvaluationReport> reports;
  for (const auto& scenario : scenarios) {
    const auto seeds = eval::evaluation_seeds(a.seed_base.value_or(scenario.seed), a.seeds);
    for (const auto& controller : controllers) {
      auto result = eval::run_evaluation(scenario, *controller, seeds);
      if (a.logs) {
        for (const auto& rec : result.records) {
          const std::string stem = controller->name() + "_" + scenario.name + "_" +
                                   std::to_string(rec.metrics.seed);
          std::ostringstream log, speed, limits;
          io::write_episode_log(log, rec.log);
          io::write_grid(speed, rec.speed);
          io::write_grid(limits, rec.limits);
          io::write_text_file(join(a.out, stem + "_log.csv"), log.str());
          io::write_text_file(join(a.out, stem + "_speed.csv"), speed.str());
          io::write_text_file(join(a.out, stem + "_limits.csv"), limits.str());
        }
      }
      for (const auto& run : result.report.runs) {
        if (!run.ok) std::cerr << "seed " << run.seed << " failed: " << run.error << '\n';
      }
      reports.push_back(std::move(result.report));
    }
  }
  std::ostringstream csv;
  io::write_report_csv(csv, reports);
  io::write_text_file(join(a.out, "report.csv"), csv.str());
  std::cout << eval::format_report(reports);
  for (const auto& r : reports) {
    if (r.completed == 0) throw std::runtime_error("every run failed for " + r.controller);
  }
  return kExitOk;
}

int run_replay(const ReplayArgs& a) {
  const auto series = io::parse_rds_csv(a.data);
  for (const auto& r : series.rejected) {
    std::cerr << "rejected line " << r.line << ": " << r.reason << '\n';
  }
  for (const auto& g : series.gaps) std::cerr << "gap: " << g << '\n';
  auto ck = io::load_checkpoint(a.checkpoint);
  const auto sensors = io::index_sensors(series);
  std::vector<double> gantries = a.gantries;
  if (gantries.empty()) gantries = sensors.milemarkers;
  std::sort(gantries.begin(), gantries.end());
  const auto assignment = io::assign_sensors(gantries, sensors.milemarkers);
  for (const auto& w : assignment.warnings) std::cerr << "warning: " << w << '\n';

  const auto result = io::open_loop_replay(series, gantries, assignment, ck.learner.actor, a.mask);
  ensure_dir(a.out);
  std::ostringstream speed, limits;
  io::write_grid(speed, result.speed);
  io::write_grid(limits, result.limits);
  io::write_text_file(join(a.out, "speed_grid.csv"), speed.str());
  io::write_text_file(join(a.out, "limit_grid.csv"), limits.str());
  std::cout << "replayed " << result.speed.cols << " steps over " << gantries.size()
            << " gantries (" << result.held_count << " held windows)\n";
  return kExitOk;
}

int run_attribute(const AttributeArgs& a) {
  std::ifstream in(a.log);
  if (!in) throw ValidationError("cannot open '" + a.log + "'");
  const auto log = io::read_episode_log(in);
  auto ck = io::load_checkpoint(a.checkpoint);
  std::vector<io::Transition> cases;
  for (const auto& c : a.cases) cases.push_back(io::parse_transition(c));
  if (cases.empty()) cases = io::standard_transitions();
  const auto samples = io::attribute_transitions(log, ck.learner.actor, cases, a.samples, a.steps);
  const auto summary = io::summarize_cases(samples, cases);

  std::ostringstream csv;
  csv << "transition,samples,prev_action,speed,occupancy,up_speed,up_occupancy,mean_gap\n";
  for (const auto& s : summary) {
    csv << s.transition.label() << ',' << s.samples;
    for (double v : s.mean_attribution) csv << ',' << io::format_double(v);
    csv << ',' << io::format_double(s.mean_gap) << '\n';
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    io::write_text_file(a.out, csv.str());
    std::cout << "wrote " << a.out << '\n';
  }
  return kExitOk;
}

int run_export(const ExportArgs& a) {
  std::ifstream in(a.log);
  if (!in) throw ValidationError("cannot open '" + a.log + "'");
  const auto log = io::read_episode_log(in);
  int agents = 0, steps = 0;
  for (const auto& r : log) {
    if (r.agent < 0 || r.step < 0) throw ValidationError("negative step or agent in log");
    agents = std::max(agents, r.agent + 1);
    steps = std::max(steps, r.step + 1);
  }
  eval::Grid speed, limits;
  if (!a.scenario.empty()) {
    const Scenario s = resolve_scenario(a.scenario);
    if (s.agent_count() != agents) {
      throw ValidationError("log has " + std::to_string(agents) + " agents, scenario has " +
                            std::to_string(s.agent_count()));
    }
    for (int g : s.agent_gantries) speed.milepoints.push_back(s.layout.gantry_milepoints[g]);
  } else {
    for (int i = 0; i < agents; ++i) speed.milepoints.push_back(i);
  }
  limits.milepoints = speed.milepoints;
  speed.cols = limits.cols = steps;
  speed.values.assign(static_cast<std::size_t>(agents) * steps, 0.0);
  limits.values = speed.values;
  for (const auto& r : log) {
    speed.at(r.agent, r.step) = r.nu;
    limits.at(r.agent, r.step) = r.action_mph;
  }
  ensure_dir(a.out);
  std::ostringstream s_out, l_out;
  io::write_grid(s_out, speed);
  io::write_grid(l_out, limits);
  io::write_text_file(join(a.out, "speed_grid.csv"), s_out.str());
  io::write_text_file(join(a.out, "limit_grid.csv"), l_out.str());
  std::cout << "exported " << agents << " x " << steps << " grids to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Variable speed limit corridor control: training, evaluation and replay"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a shared policy with MAPPO or IPPO");
  train_cmd->add_option("--scenario", ta.scenario, "Built-in scenario or JSON file");
  train_cmd->add_option("--config", ta.config, "Training config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", ta.seed, "Training seed");
  train_cmd->add_option("--steps", ta.steps, "Environment steps");
  train_cmd->add_option("--algorithm", ta.algorithm, "mappo or ippo");
  train_cmd->add_option("--checkpoint-every", ta.checkpoint_every, "Steps between checkpoints");
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_flag("--resume", ta.resume, "Continue from the newest valid checkpoint");

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Closed-loop controller evaluation");
  eval_cmd->add_option("--controller", ea.controllers, "no-control, speed-matching or policy")
      ->required();
  eval_cmd->add_option("--scenario", ea.scenarios, "Scenarios to run");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Policy checkpoint");
  eval_cmd->add_option("--config", ea.config, "Expected training config (hash check)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_flag("--mask", ea.mask, "Invalid-action masking for the policy");
  eval_cmd->add_option("--seeds", ea.seeds, "Number of seeds");
  eval_cmd->add_option("--seed-base", ea.seed_base, "First seed (default: scenario seed)");
  eval_cmd->add_option("--out", ea.out, "Output directory")->required();
  eval_cmd->add_flag("--logs", ea.logs, "Also write per-seed logs and grids");

  ReplayArgs ra;
  auto* replay_cmd = app.add_subcommand("replay", "Open-loop replay of roadside sensor data");
  replay_cmd->add_option("--data", ra.data, "RDS CSV")->required();
  replay_cmd->add_option("--checkpoint", ra.checkpoint, "Policy checkpoint")->required();
  replay_cmd->add_flag("--mask", ra.mask, "Invalid-action masking");
  replay_cmd->add_option("--gantries", ra.gantries, "Gantry mile markers (default: sensors)")
      ->delimiter(',');
  replay_cmd->add_option("--out", ra.out, "Output directory");

  AttributeArgs aa;
  auto* attr_cmd = app.add_subcommand("attribute", "Integrated gradients over logged decisions");
  attr_cmd->add_option("--log", aa.log, "Episode log CSV")->required();
  attr_cmd->add_option("--checkpoint", aa.checkpoint, "Policy checkpoint")->required();
  attr_cmd->add_option("--case", aa.cases, "Transition such as 70-30 (default: all six)");
  attr_cmd->add_option("--samples", aa.samples, "Samples per transition");
  attr_cmd->add_option("--steps", aa.steps, "Integration steps");
  attr_cmd->add_option("--out", aa.out, "Summary CSV (default: stdout)");

  ExportArgs xa;
  auto* export_cmd = app.add_subcommand("export-grids", "Episode log to speed and limit grids");
  export_cmd->add_option("--log", xa.log, "Episode log CSV")->required();
  export_cmd->add_option("--scenario", xa.scenario, "Scenario for agent mile points");
  export_cmd->add_option("--out", xa.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(ta);
    if (*eval_cmd) return run_evaluate(ea);
    if (*replay_cmd) return run_replay(ra);
    if (*attr_cmd) return run_attribute(aa);
    if (*export_cmd) return run_export(xa);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace marvel::cli
