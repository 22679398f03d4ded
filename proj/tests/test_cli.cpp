#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ideal_policy.hpp"
#include "marvel/checkpoint.hpp"
#include "marvel/cli.hpp"
#include "marvel/csv_io.hpp"
#include "marvel/rds.hpp"
#include "marvel/scenario.hpp"
#include "marvel/trainer.hpp"

namespace fs = std::filesystem;
using namespace marvel;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "marvel_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(MARVEL_CLI_PATH) + " " + args + " > " +
                          (work_dir() / "stdout.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return io::read_text_file(p.string()); }

std::string first_line(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  return line;
}

// Short desk corridor so each command finishes in seconds.
std::string short_scenario() {
  const fs::path p = work_dir() / "short.json";
  if (!fs::exists(p)) {
    Scenario s = builtin_scenario("desk");
    s.name = "short";
    s.warmup_s = 120.0;
    s.episode_steps = 6;
    io::write_text_file(p.string(), scenario_to_json_text(s));
  }
  return p.string();
}

std::string small_config() {
  const fs::path p = work_dir() / "small.json";
  if (!fs::exists(p)) {
    train::TrainConfig c;
    c.episode_length = 6;
    c.batch_size = 12;
    c.ppo_epochs = 2;
    c.hidden_size = 16;
    c.training_step_max = 24;
    io::write_text_file(p.string(), train::config_to_json_text(c));
  }
  return p.string();
}

std::string ideal_checkpoint() {
  const fs::path p = work_dir() / "ideal.json";
  if (!fs::exists(p)) {
    train::TrainConfig c;
    train::Learner l = train::make_learner(c, 4);
    l.actor = testing_support::ideal_policy();
    l.actor_opt = nn::AdamState(l.actor.param_count(), c.actor_lr);
    io::save_checkpoint(p.string(), l, "desk");
  }
  return p.string();
}

}  // namespace

TEST_CASE("usage errors exit with 1, help with 0") {
  CHECK(run("") == cli::kExitUsage);
  CHECK(run("frobnicate") == cli::kExitUsage);
  CHECK(run("evaluate --bogus-flag") == cli::kExitUsage);
  CHECK(run("evaluate --controller no-control") == cli::kExitUsage);  // --out missing
  CHECK(run("--help") == cli::kExitOk);
}

TEST_CASE("data validation errors exit with 2") {
  const fs::path bad = work_dir() / "bad.csv";
  io::write_text_file(bad.string(), "timestamp,speed_mph\n0,60\n");
  CHECK(run("replay --data " + bad.string() + " --checkpoint " + ideal_checkpoint() +
            " --out " + (work_dir() / "r_bad").string()) == cli::kExitValidation);
  CHECK(run("evaluate --controller warp-drive --out " + (work_dir() / "e_bad").string()) ==
        cli::kExitValidation);
  CHECK(run("attribute --log " + (work_dir() / "nope.csv").string() + " --checkpoint " +
            ideal_checkpoint()) == cli::kExitValidation);
}

TEST_CASE("config hash mismatch is refused") {
  const fs::path cfg = work_dir() / "other.json";
  train::TrainConfig other;
  other.entropy_coef = 0.01;
  io::write_text_file(cfg.string(), train::config_to_json_text(other));
  CHECK(run("evaluate --controller policy --checkpoint " + ideal_checkpoint() + " --config " +
            cfg.string() + " --scenario " + short_scenario() + " --seeds 1 --out " +
            (work_dir() / "e_hash").string()) == cli::kExitValidation);
}

TEST_CASE("evaluate writes the report and per-seed logs") {
  const fs::path out = work_dir() / "eval";
  REQUIRE(run("evaluate --controller no-control --controller speed-matching --controller policy"
              " --checkpoint " + ideal_checkpoint() + " --mask --scenario " + short_scenario() +
              " --seeds 2 --logs --out " + out.string()) == cli::kExitOk);
  CHECK(first_line(out / "report.csv") == io::kReportHeader);
  const std::string report = slurp(out / "report.csv");
  CHECK(report.find("no-control,short,mean") != std::string::npos);
  CHECK(report.find("mappo+iam,short,mean") != std::string::npos);
  int logs = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().string().ends_with("_log.csv")) ++logs;
  }
  CHECK(logs == 6);
}

TEST_CASE("export-grids and attribute consume an episode log") {
  const fs::path out = work_dir() / "eval_one";
  REQUIRE(run("evaluate --controller policy --checkpoint " + ideal_checkpoint() +
              " --scenario " + short_scenario() + " --seeds 1 --logs --out " + out.string()) ==
          cli::kExitOk);
  fs::path log;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().string().ends_with("_log.csv")) log = e.path();
  }
  REQUIRE(!log.empty());
  const fs::path grids = work_dir() / "grids";
  CHECK(run("export-grids --log " + log.string() + " --scenario " + short_scenario() +
            " --out " + grids.string()) == cli::kExitOk);
  CHECK(first_line(grids / "speed_grid.csv").starts_with("gantry,milepoint,0,1"));
  CHECK(fs::exists(grids / "limit_grid.csv"));
  const fs::path attr = work_dir() / "attr.csv";
  CHECK(run("attribute --log " + log.string() + " --checkpoint " + ideal_checkpoint() +
            " --steps 64 --out " + attr.string()) == cli::kExitOk);
  CHECK(first_line(attr) ==
        "transition,samples,prev_action,speed,occupancy,up_speed,up_occupancy,mean_gap");
}

TEST_CASE("replay writes both grids") {
  const fs::path data = work_dir() / "day.csv";
  std::ostringstream os;
  os << io::kRdsHeader << '\n';
  for (int m = 0; m < 5; ++m) {
    for (int g = 0; g < 4; ++g) {
      os << 60 * m << ",S" << g << ',' << 0.25 + 0.5 * g << ',' << (g == 1 ? 20 : 66)
         << ",0.1,1200\n";
    }
  }
  io::write_text_file(data.string(), os.str());
  const fs::path out = work_dir() / "replay";
  REQUIRE(run("replay --data " + data.string() + " --checkpoint " + ideal_checkpoint() +
              " --mask --out " + out.string()) == cli::kExitOk);
  std::istringstream limits(slurp(out / "limit_grid.csv"));
  const auto grid = io::read_grid(limits);
  REQUIRE(grid.rows() == 4);
  REQUIRE(grid.cols == 5);
  for (int c = 0; c < 5; ++c) {
    CHECK(grid.at(0, c) == 70.0);
    CHECK(grid.at(1, c) == 30.0);
    CHECK(grid.at(2, c) == 40.0);
    CHECK(grid.at(3, c) == 50.0);
  }
  CHECK(fs::exists(out / "speed_grid.csv"));
}

TEST_CASE("train is deterministic and resumable") {
  const fs::path a = work_dir() / "train_a", b = work_dir() / "train_b";
  const std::string common = " --scenario " + short_scenario() + " --config " + small_config() +
                             " --seed 3 --checkpoint-every 12 --out ";
  REQUIRE(run("train" + common + a.string()) == cli::kExitOk);
  REQUIRE(run("train" + common + b.string()) == cli::kExitOk);
  CHECK(first_line(a / "learning_curve.csv") == io::kLearningCurveHeader);
  CHECK(slurp(a / "learning_curve.csv") == slurp(b / "learning_curve.csv"));
  CHECK(slurp(a / "final.json") == slurp(b / "final.json"));
  CHECK(fs::exists(a / "checkpoint_000000012.json"));

  // Resume from the first periodic checkpoint and land on the same result.
  const fs::path c = work_dir() / "train_c";
  fs::create_directories(c);
  fs::copy_file(a / "checkpoint_000000012.json", c / "checkpoint_000000012.json");
  std::ostringstream head;
  {
    std::istringstream in(slurp(a / "learning_curve.csv"));
    std::string line;
    std::getline(in, line);
    head << line << '\n';
    std::getline(in, line);
    head << line << '\n';
  }
  io::write_text_file((c / "learning_curve.csv").string(), head.str());
  REQUIRE(run("train" + common + c.string() + " --resume") == cli::kExitOk);
  CHECK(slurp(c / "final.json") == slurp(a / "final.json"));
  CHECK(slurp(c / "learning_curve.csv") == slurp(a / "learning_curve.csv"));
}
