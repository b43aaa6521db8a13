#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "polish/experiment.hpp"

using namespace polish;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "polish_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// small, fast training configuration
RunConfig tiny_run_config(std::uint64_t seed, long steps) {
  RunConfig cfg = sim_profile();
  cfg.seed = seed;
  cfg.sac.hidden = {32, 32};
  cfg.sac.random_steps = 60;
  cfg.sac.batch_size = 32;
  cfg.env.horizon = 40;
  cfg.run.steps = steps;
  cfg.run.eval_every = 0;
  cfg.run.final_eval_episodes = 1;
  cfg.run.log_updates_every = 1;
  return cfg;
}

}  // namespace

TEST_CASE("profiles carry the published table values", "[persistence]") {
  const RunConfig sim = sim_profile();
  REQUIRE(sim.env.horizon == 380);
  REQUIRE(sim.env.control_hz == 50.0);
  REQUIRE(sim.env.weights.f == 0.4);
  REQUIRE(sim.env.bounds.f_max == 2.0);
  REQUIRE(sim.env.bounds.f_mid == 0.5);
  REQUIRE(sim.sac.ensemble_size == 5);
  REQUIRE(sim.sac.lr == 3e-4);
  REQUIRE(sim.sac.random_steps == 15000);
  REQUIRE(sim.cheq.u_min == 0.02);
  REQUIRE(sim.cheq.u_max == 0.2);
  REQUIRE(sim.tune.weights.w_w == 0.52);

  const RunConfig hw = hardware_like_profile();
  REQUIRE(hw.env.horizon == 150);
  REQUIRE(hw.env.control_hz == 20.0);
  REQUIRE(hw.sac.ensemble_size == 10);
  REQUIRE(hw.sac.utd == 2);
  REQUIRE(hw.cheq.u_min == 0.015);
  REQUIRE(hw.cheq.window == 10);
  REQUIRE(hw.env.weights.f == 0.3);
  REQUIRE(hw.env.bounds.f_max == 4.0);

  REQUIRE_THROWS_AS(make_profile("bogus"), ConfigError);
}

TEST_CASE("config load applies overrides and rejects unknown keys", "[persistence]") {
  Json j;
  j["profile"] = "sim";
  j["seed"] = 123;
  j["env"] = {{"horizon", 42}};
  j["sac"] = {{"ensemble_size", 3}};
  const RunConfig cfg = load_config(j);
  REQUIRE(cfg.seed == 123);
  REQUIRE(cfg.env.horizon == 42);
  REQUIRE(cfg.sac.ensemble_size == 3);
  REQUIRE(cfg.env.control_hz == 50.0);  // untouched default

  Json bad = j;
  bad["env"]["horizont"] = 9;
  REQUIRE_THROWS_AS(load_config(bad), ConfigError);
  Json bad2 = j;
  bad2["typo_section"] = 1;
  REQUIRE_THROWS_AS(load_config(bad2), ConfigError);

  // invariant violation: tracking weights must sum to one
  Json bad3 = j;
  bad3["env"] = {{"weights", {{"f", 0.9}}}};
  REQUIRE_THROWS_AS(load_config(bad3), ConfigError);
}

TEST_CASE("config echo round-trips and the hash is stable", "[persistence]") {
  const RunConfig cfg = sim_profile();
  const Json j = to_json(cfg);
  const RunConfig back = load_config(j);
  REQUIRE(to_json(back) == j);
  REQUIRE(config_hash(cfg) == config_hash(back));

  RunConfig other = cfg;
  other.env.horizon = 100;
  REQUIRE(config_hash(other) != config_hash(cfg));
}

TEST_CASE("checkpoint container round-trips bit-identically", "[persistence]") {
  const fs::path dir = temp_dir("ckpt");
  Checkpoint c;
  c.f32["a"] = {1.5f, -2.25f, 3.0e-7f};
  c.f64["b"] = {1.0 / 3.0};
  c.i64["c"] = {-7, 1LL << 40};
  c.text["d"] = "state string with spaces";
  c.save(dir / "x.bin");
  const Checkpoint r = Checkpoint::load(dir / "x.bin");
  REQUIRE(r.f32.at("a") == c.f32.at("a"));
  REQUIRE(r.f64.at("b") == c.f64.at("b"));
  REQUIRE(r.i64.at("c") == c.i64.at("c"));
  REQUIRE(r.text.at("d") == c.text.at("d"));
  REQUIRE_THROWS_AS(Checkpoint::load(dir / "missing.bin"), ConfigError);
}

TEST_CASE("trainer state round-trips through the checkpoint", "[persistence]") {
  SacConfig sc;
  sc.obs_dim = 4;
  sc.action_dim = 2;
  sc.hidden = {8, 8};
  sc.ensemble_size = 2;
  sc.batch_size = 8;
  sc.random_steps = 0;
  sc.target_entropy = -2;
  ActionSpace space;
  space.lo = VectorXd::Constant(2, -1.0);
  space.hi = VectorXd::Constant(2, 1.0);

  SacTrainer a(sc, space, 5);
  Rng r(6);
  for (int i = 0; i < 20; ++i) {
    Transition t;
    t.state = Eigen::VectorXf::Random(4);
    t.next_state = Eigen::VectorXf::Random(4);
    t.rl_action = Eigen::VectorXf::Random(2) * 0.9f;
    t.reward = static_cast<float>(r.normal());
    a.observe(std::move(t));
  }
  for (int i = 0; i < 10; ++i) a.update();

  Checkpoint ck;
  ck.i64["meta/config_hash"] = {0};
  ck.i64["meta/episode_index"] = {0};
  pack_trainer(ck, a, true);
  const fs::path dir = temp_dir("trainer");
  ck.save(dir / "t.bin");

  SacTrainer b(sc, space, 999);  // different seed; state comes from the file
  unpack_trainer(Checkpoint::load(dir / "t.bin"), b);

  // both trainers continue identically
  for (int i = 0; i < 10; ++i) {
    const UpdateStats sa = a.update();
    const UpdateStats sb = b.update();
    REQUIRE(sa.critic_loss == sb.critic_loss);
    REQUIRE(sa.actor_loss == sb.actor_loss);
    REQUIRE(sa.alpha == sb.alpha);
  }
  const VectorXd obs = VectorXd::Zero(4);
  REQUIRE(a.sample_action(obs).action_physical == b.sample_action(obs).action_physical);
}

TEST_CASE("metrics files are valid line-delimited json", "[persistence]") {
  const fs::path dir = temp_dir("jsonl");
  {
    JsonlWriter w(dir / "m.jsonl");
    w.write({{"a", 1}});
    w.write({{"b", 2.5}});
    w.flush();
    // append-only: reopening appends
    JsonlWriter w2(dir / "m.jsonl");
    w2.write({{"c", "x"}});
  }
  const auto records = read_jsonl(dir / "m.jsonl");
  REQUIRE(records.size() == 3);
  REQUIRE(records[0].at("a") == 1);
  REQUIRE(records[2].at("c") == "x");
}

TEST_CASE("training runs are deterministic per seed and config", "[persistence]") {
  const RunConfig cfg = tiny_run_config(7, 240);
  const fs::path d1 = temp_dir("det1");
  const fs::path d2 = temp_dir("det2");
  train_run(cfg, TrainMode::cheq, d1);
  train_run(cfg, TrainMode::cheq, d2);
  REQUIRE(read_file(d1 / "episodes.jsonl") == read_file(d2 / "episodes.jsonl"));
  REQUIRE(read_file(d1 / "updates.jsonl") == read_file(d2 / "updates.jsonl"));
  REQUIRE(read_file(d1 / "steps.jsonl") == read_file(d2 / "steps.jsonl"));
  REQUIRE(read_file(d1 / "summary.json") == read_file(d2 / "summary.json"));
  // config echo parses back equal to the effective config
  const RunConfig echoed = load_config_file((d1 / "config.json").string());
  REQUIRE(to_json(echoed) == to_json(cfg));
}

TEST_CASE("checkpoint resume continues identically", "[persistence]") {
  // one run straight through vs the same run paused and resumed
  const RunConfig cfg_full = tiny_run_config(11, 480);
  RunConfig cfg_half = cfg_full;
  cfg_half.run.steps = 240;  // run.* does not participate in the config hash
  REQUIRE(config_hash(cfg_full) == config_hash(cfg_half));

  const fs::path d_full = temp_dir("resume_full");
  const fs::path d_half = temp_dir("resume_half");
  const fs::path d_resumed = temp_dir("resume_cont");
  train_run(cfg_full, TrainMode::cheq, d_full);
  train_run(cfg_half, TrainMode::cheq, d_half);
  train_run(cfg_full, TrainMode::cheq, d_resumed, d_half / "checkpoint_final.bin");

  // the resumed run's episodes equal the tail of the uninterrupted run
  std::vector<std::string> full_lines, resumed_lines;
  {
    std::istringstream f(read_file(d_full / "episodes.jsonl"));
    std::string line;
    while (std::getline(f, line)) full_lines.push_back(line);
    std::istringstream r(read_file(d_resumed / "episodes.jsonl"));
    while (std::getline(r, line)) resumed_lines.push_back(line);
  }
  REQUIRE(resumed_lines.size() > 0);
  REQUIRE(resumed_lines.size() < full_lines.size());
  for (std::size_t i = 0; i < resumed_lines.size(); ++i)
    REQUIRE(resumed_lines[i] ==
            full_lines[full_lines.size() - resumed_lines.size() + i]);
  REQUIRE(read_file(d_full / "summary.json") == read_file(d_resumed / "summary.json"));

  // resume must refuse a mismatched config hash
  RunConfig wrong = cfg_full;
  wrong.env.horizon = 39;
  const fs::path d_wrong = temp_dir("resume_wrong");
  REQUIRE_THROWS_AS(
      train_run(wrong, TrainMode::cheq, d_wrong, d_half / "checkpoint_final.bin"),
      ConfigError);
}

TEST_CASE("compare aligns runs and quantiles bracket the median", "[persistence]") {
  const fs::path d1 = temp_dir("cmp1");
  const fs::path d2 = temp_dir("cmp2");
  RunConfig c1 = tiny_run_config(3, 240);
  RunConfig c2 = tiny_run_config(4, 240);
  train_run(c1, TrainMode::cheq, d1);
  train_run(c2, TrainMode::cheq, d2);

  const fs::path out = temp_dir("cmpout") / "compare.csv";
  compare_runs({d1, d2}, out, 40);

  std::ifstream in(out);
  REQUIRE(in);
  std::string header;
  std::getline(in, header);
  REQUIRE(header ==
          "metric,mode,step,n,median,q025,q975,spread,values");
  long rows = 0;
  std::string line;
  long grid_len = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string metric, mode, step, n, med, q025, q975, spread;
    std::getline(ss, metric, ',');
    std::getline(ss, mode, ',');
    std::getline(ss, step, ',');
    std::getline(ss, n, ',');
    std::getline(ss, med, ',');
    std::getline(ss, q025, ',');
    std::getline(ss, q975, ',');
    std::getline(ss, spread, ',');
    REQUIRE(std::stod(q025) <= std::stod(med) + 1e-12);
    REQUIRE(std::stod(med) <= std::stod(q975) + 1e-12);
    if (metric == "return") ++grid_len;
  }
  // one mode group; three metrics, each over the same grid
  REQUIRE(rows == 3 * grid_len);

  // comparing a run with itself: zero spread everywhere
  const fs::path out_self = temp_dir("cmpself") / "compare.csv";
  compare_runs({d1, d1}, out_self, 40);
  std::ifstream in2(out_self);
  std::getline(in2, header);
  while (std::getline(in2, line)) {
    const auto pos = line.rfind(",0,");
    (void)pos;
    std::stringstream ss(line);
    std::vector<std::string> cols;
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    REQUIRE(std::stod(cols[7]) == 0.0);  // spread column
  }

  REQUIRE_THROWS_AS(compare_runs({d1}, out, 40), ConfigError);
}
