#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "polish/experiment.hpp"

namespace fs = std::filesystem;
using namespace polish;

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
};

RunConfig load_with_overrides(const CommonArgs& args, std::string* echo = nullptr) {
  RunConfig cfg;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw ConfigError("cannot open config file: " + args.config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (echo) *echo = ss.str();
    Json j;
    try {
      j = Json::parse(ss.str());
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    cfg = load_config(j);
  } else {
    cfg = sim_profile();
    cfg.validate();
  }
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale variable-impedance polishing workbench"};
  app.require_subcommand(1);

  CommonArgs common;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "run configuration file (JSON)");
    cmd->add_option("--seed", common.seed, "master seed")
        ->each([&](const std::string&) { common.seed_set = true; });
    cmd->add_option("--out", common.out_dir, "output directory");
  };

  // train
  auto* train = app.add_subcommand("train", "train an agent (cheq | sac-safe | sac-unsafe)");
  std::string train_mode = "cheq";
  long train_steps = -1;
  std::string resume_path;
  add_common(train);
  train->add_option("--mode", train_mode, "cheq | sac-safe | sac-unsafe");
  train->add_option("--steps", train_steps, "environment-step budget");
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_checkpoint;
  std::string eval_mode = "cheq";
  int eval_episodes = 5;
  bool eval_deterministic = false;
  add_common(eval);
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--mode", eval_mode, "agent mode the checkpoint was trained in");
  eval->add_option("--episodes", eval_episodes, "number of evaluation episodes");
  eval->add_flag("--deterministic", eval_deterministic, "use the mean policy action");

  // tune
  auto* tune = app.add_subcommand("tune", "gain search (fixed | section-wise)");
  std::string tune_mode = "fixed";
  int tune_budget = -1;
  add_common(tune);
  tune->add_option("--mode", tune_mode, "fixed | section-wise");
  tune->add_option("--budget", tune_budget, "episodes per search stage");

  // compare
  auto* compare = app.add_subcommand("compare", "align metrics across runs");
  std::vector<std::string> compare_runs_arg;
  long compare_grid = 1000;
  add_common(compare);
  compare->add_option("runs", compare_runs_arg, "run directories")->expected(-1);
  compare->add_option("--grid", compare_grid, "step grid for alignment");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      std::string echo;
      RunConfig cfg = load_with_overrides(common, &echo);
      if (train_steps > 0) cfg.run.steps = train_steps;
      const TrainMode mode = parse_train_mode(train_mode);
      fs::path out = common.out_dir.empty()
                         ? fs::path("runs") / (std::string(train_mode_name(mode)) + "-seed" +
                                               std::to_string(cfg.seed))
                         : fs::path(common.out_dir);
      std::optional<fs::path> resume;
      if (!resume_path.empty()) resume = fs::path(resume_path);
      std::optional<std::string> echo_src;
      if (!common.config_path.empty()) echo_src = echo;
      const TrainSummary s = train_run(cfg, mode, out, resume, echo_src);
      std::cout << "run " << s.run_dir.string() << ": " << s.total_steps << " steps, "
                << s.episodes << " episodes, " << s.accum_first_violations
                << " failures, final eval return " << s.final_eval_return_mean << "\n";
    } else if (*eval) {
      RunConfig cfg = load_with_overrides(common);
      fs::path out = common.out_dir.empty() ? fs::path("eval-out") : fs::path(common.out_dir);
      const EvalReport r = eval_run(cfg, parse_train_mode(eval_mode), eval_checkpoint,
                                    eval_episodes, eval_deterministic, out);
      std::cout << "eval: mean return " << r.mean_return << ", mean |MRR - target| "
                << r.mean_mrr_dev << "\n";
    } else if (*tune) {
      RunConfig cfg = load_with_overrides(common);
      const bool sectionwise = tune_mode == "section-wise";
      if (!sectionwise && tune_mode != "fixed")
        throw ConfigError("tune mode must be fixed or section-wise");
      const int budget = tune_budget > 0 ? tune_budget : cfg.tune.budget;
      fs::path out = common.out_dir.empty() ? fs::path("tune-out") : fs::path(common.out_dir);
      const TuneOutput t = tune_run(cfg, sectionwise, budget, out);
      if (sectionwise) {
        std::cout << "section-wise profile written to " << (out / "gain_profile.json")
                  << "\n";
      } else {
        std::cout << "best gains: k_y " << t.fixed.best.k_y << ", k_z " << t.fixed.best.k_z
                  << ", zeta " << t.fixed.best.zeta << " (score " << t.fixed.best_score
                  << ")\n";
      }
    } else if (*compare) {
      if (compare_runs_arg.size() < 2) throw ConfigError("compare needs >= 2 run dirs");
      std::vector<fs::path> dirs(compare_runs_arg.begin(), compare_runs_arg.end());
      fs::path out = common.out_dir.empty() ? fs::path("compare.csv")
                                            : fs::path(common.out_dir) / "compare.csv";
      compare_runs(dirs, out, compare_grid);
      std::cout << "comparison written to " << out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergedError& e) {
    std::cerr << "runtime divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
