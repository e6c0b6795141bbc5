#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "poselift/checkpoint.hpp"
#include "poselift/cli.hpp"
#include "poselift/dataset_io.hpp"
#include "poselift/errors.hpp"
#include "poselift/run_config.hpp"

using namespace poselift;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("poselift_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

fs::path only_file(const fs::path& dir, const std::string& prefix, const std::string& ext = "") {
  fs::path found;
  int count = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && (ext.empty() || e.path().extension() == ext)) {
      found = e.path();
      ++count;
    }
  }
  REQUIRE(count == 1);
  return found;
}

const std::vector<std::string> kSmallNet = {"--width", "16", "--blocks", "1", "--epochs", "3",
                                            "--batch-size", "32"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is deterministic and reports split sizes") {
  Scratch s("synth");
  const auto a = run_cli({"synth", "--samples", "5000", "--seed", "7", "--out", s / "a.csv"});
  const auto b = run_cli({"synth", "--samples", "5000", "--seed", "7", "--out", s / "b.csv"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out.find("train 3500\nval 750\ntest 750\n") != std::string::npos);
  CHECK(slurp(s / "a.csv") == slurp(s / "b.csv"));
  CHECK(slurp(s / "a.csv").find("# config=") != std::string::npos);
}

TEST_CASE("validation failures exit with code 2") {
  Scratch s("validation");
  CHECK(run_cli({"synth", "--samples", "0", "--out", s / "x.csv"}).code == 2);
  CHECK(run_cli({"bogus"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"train", "--dataset", s / "x.csv", "--width", "0"}).code == 2);
  const auto missing = run_cli({"train", "--dataset", s / "missing.csv"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("missing.csv") != std::string::npos);
  CHECK(run_cli({"synth", "--help"}).code == 0);
}

TEST_CASE("config files: unknown keys rejected, flags win, env var default") {
  Scratch s("config");
  {
    std::ofstream(s / "bad.json") << R"({"synth": {"samples": 10, "colour": 3}})";
  }
  const auto bad = run_cli({"synth", "--config", s / "bad.json", "--out", s / "d.csv"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("synth.colour") != std::string::npos);
  {
    std::ofstream(s / "typed.json") << R"({"synth": {"samples": "ten"}})";
  }
  CHECK(run_cli({"synth", "--config", s / "typed.json", "--out", s / "d.csv"}).code == 2);

  {
    std::ofstream(s / "ok.json") << R"({"synth": {"samples": 20, "seed": 3}})";
  }
  REQUIRE(run_cli({"synth", "--config", s / "ok.json", "--out", s / "c.csv"}).code == 0);
  REQUIRE(run_cli({"synth", "--config", s / "ok.json", "--samples", "30", "--out", s / "f.csv"})
              .code == 0);
  CHECK(read_dataset(fs::path(s / "c.csv")).samples.size() == 20);
  CHECK(read_dataset(fs::path(s / "f.csv")).samples.size() == 30);

  ::setenv(cli::kConfigEnvVar, (s / "ok.json").c_str(), 1);
  const auto env = run_cli({"synth", "--out", s / "e.csv"});
  ::unsetenv(cli::kConfigEnvVar);
  REQUIRE(env.code == 0);
  CHECK(slurp(s / "e.csv") == slurp(s / "c.csv"));
}

TEST_CASE("run config parsing") {
  const cli::RunConfig def = cli::parse_run_config("{}", "t");
  CHECK(def.network.width == 1024);
  CHECK(def.network.blocks == 1);
  CHECK(def.synth.samples == 5000);
  CHECK(cli::run_config_hash(def) == cli::run_config_hash(cli::RunConfig{}));
  const cli::RunConfig c =
      cli::parse_run_config(R"({"eval": {"mpjpe_joints": "non_root"}})", "t");
  CHECK(c.training.averaging == JointAveraging::non_root);
  CHECK(cli::run_config_hash(c) != cli::run_config_hash(def));
  CHECK_THROWS_AS(cli::parse_run_config("[1]", "t"), InvalidInput);
  CHECK_THROWS_AS(cli::parse_run_config("{", "t"), InvalidInput);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"training": {"optimizer": "rmsprop"}})", "t"),
                  InvalidInput);
}

TEST_CASE("train, eval and predict") {
  Scratch s("train");
  REQUIRE(run_cli({"synth", "--samples", "300", "--seed", "5", "--out", s / "d.csv"}).code == 0);
  const auto t1 = run_cli(with({"train", "--dataset", s / "d.csv", "--out-dir", s / "r1"},
                               kSmallNet));
  const auto t2 = run_cli(with({"train", "--dataset", s / "d.csv", "--out-dir", s / "r2"},
                               kSmallNet));
  REQUIRE(t1.code == 0);
  REQUIRE(t2.code == 0);
  const fs::path ck1 = only_file(s.dir / "r1", "model_");
  const fs::path ck2 = only_file(s.dir / "r2", "model_");
  CHECK(ck1.filename() == ck2.filename());
  CHECK(slurp(ck1) == slurp(ck2));
  CHECK(slurp(only_file(s.dir / "r1", "train_log_")) ==
        slurp(only_file(s.dir / "r2", "train_log_")));

  // Training-split evaluation reproduces the last logged train MPJPE.
  const std::string log = slurp(only_file(s.dir / "r1", "train_log_"));
  const auto last_line = log.substr(log.rfind('\n', log.size() - 2) + 1);
  std::vector<std::string> fields;
  std::stringstream ls(last_line);
  for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
  REQUIRE(fields.size() == 6);
  const double logged_train_mpjpe = std::stod(fields[3]);

  const auto e1 = run_cli({"eval", "--checkpoint", ck1.string(), "--dataset", s / "d.csv",
                           "--split", "train", "--out-dir", s / "e1"});
  const auto e2 = run_cli({"eval", "--checkpoint", ck1.string(), "--dataset", s / "d.csv",
                           "--split", "train", "--out-dir", s / "e2"});
  REQUIRE(e1.code == 0);
  CHECK(slurp(only_file(s.dir / "e1", "eval_train_")) ==
        slurp(only_file(s.dir / "e2", "eval_train_")));
  const auto pos = e1.out.find(" mpjpe ") + 7;
  const double evaluated = std::stod(e1.out.substr(pos, e1.out.find('\n', pos) - pos));
  CHECK(std::isfinite(evaluated));
  CHECK(std::abs(evaluated - logged_train_mpjpe) < 1e-9);

  const auto cr = run_cli({"eval", "--checkpoint", ck1.string(), "--dataset", s / "d.csv",
                           "--cr", "--stage", "identity", "--out-dir", s / "e3"});
  REQUIRE(cr.code == 0);
  CHECK(cr.out.find("with_cr") != std::string::npos);

  // A dataset on a different skeleton is refused.
  DatasetFile other = read_dataset(fs::path(s / "d.csv"));
  other.skeleton.joint_names[3] = "LeftFoot";
  write_dataset(fs::path(s / "other.csv"), other);
  const auto mismatch = run_cli({"eval", "--checkpoint", ck1.string(), "--dataset",
                                 s / "other.csv", "--out-dir", s / "e4"});
  CHECK(mismatch.code == 2);

  // predict round trip on the validation 2D poses.
  PoseFile2D poses;
  poses.joint_names = other.skeleton.joint_names;
  poses.joint_names[3] = read_dataset(fs::path(s / "d.csv")).skeleton.joint_names[3];
  for (int i = 0; i < 5; ++i) {
    poses.ids.push_back(other.samples[i].id);
    poses.poses.push_back(other.samples[i].pose2d);
  }
  write_poses2d(s / "in2d.csv", poses);
  const auto p = run_cli({"predict", "--checkpoint", ck1.string(), "--input", s / "in2d.csv",
                          "--out", s / "out3d.csv"});
  REQUIRE(p.code == 0);
  const PoseFile3D lifted = read_poses3d(fs::path(s / "out3d.csv"));
  CHECK(lifted.poses.size() == 5);
  CHECK(lifted.ids == poses.ids);
}

TEST_CASE("zero epochs writes the initialization") {
  Scratch s("epochs0");
  REQUIRE(run_cli({"synth", "--samples", "100", "--out", s / "d.csv"}).code == 0);
  REQUIRE(run_cli({"train", "--dataset", s / "d.csv", "--out-dir", s.dir.string(), "--width",
                   "8", "--epochs", "0", "--seed", "4"})
              .code == 0);
  const Checkpoint c = read_checkpoint(only_file(s.dir, "model_"));
  NetworkConfig nc;
  nc.width = 8;
  const LiftingNetwork init = init_network(SkeletonSpec::human36m(), nc, 4);
  CHECK(c.network.input.dense.weight == init.input.dense.weight);
  CHECK(c.network.output.weight == init.output.weight);
  CHECK(c.network.blocks[0].stages[1].bn.running_var == init.blocks[0].stages[1].bn.running_var);
}

TEST_CASE("divergence exits with code 3 and names the epoch") {
  Scratch s("diverge");
  REQUIRE(run_cli({"synth", "--samples", "200", "--out", s / "d.csv"}).code == 0);
  const auto r = run_cli({"train", "--dataset", s / "d.csv", "--out-dir", s.dir.string(),
                          "--width", "16", "--epochs", "50", "--optimizer", "sgd", "--lr",
                          "1e5", "--no-batchnorm", "--no-maxnorm"});
  CHECK(r.code == 3);
  CHECK(r.err.find("epoch") != std::string::npos);
}

TEST_CASE("ablate, sweep and gradcheck") {
  Scratch s("ablate");
  REQUIRE(run_cli({"synth", "--samples", "200", "--out", s / "d.csv"}).code == 0);
  const auto a1 = run_cli(with({"ablate", "--dataset", s / "d.csv", "--out-dir", s / "a1"},
                               kSmallNet));
  const auto a2 = run_cli(with({"ablate", "--dataset", s / "d.csv", "--out-dir", s / "a2",
                                "--workers", "2"},
                               kSmallNet));
  const auto a3 = run_cli(with({"ablate", "--dataset", s / "d.csv", "--out-dir", s / "a3"},
                               kSmallNet));
  REQUIRE(a1.code == 0);
  REQUIRE(a2.code == 0);
  REQUIRE(a3.code == 0);
  const std::string csv = slurp(only_file(s.dir / "a1", "ablation_", ".csv"));
  CHECK(csv == slurp(only_file(s.dir / "a3", "ablation_", ".csv")));
  // The worker count enters the config hash but not the results.
  const std::string threaded =
      slurp(only_file(s.dir / "a2", "ablation_", ".csv"));
  CHECK(threaded.substr(threaded.find('\n')) == csv.substr(csv.find('\n')));
  int rows = 0;
  std::stringstream ss(csv);
  for (std::string line; std::getline(ss, line);) {
    if (!line.empty() && (line[0] == '0' || line[0] == '1')) ++rows;
  }
  CHECK(rows == 8);

  const auto sw = run_cli({"sweep", "--dataset", s / "d.csv", "--out-dir", s / "sw", "--blocks",
                           "1,2", "--widths", "8,16", "--epochs", "1"});
  REQUIRE(sw.code == 0);
  const std::string sweep = slurp(only_file(s.dir / "sw", "sweep_", ".csv"));
  int cells = 0;
  std::stringstream sws(sweep);
  for (std::string line; std::getline(sws, line);) {
    if (!line.empty() && line[0] >= '0' && line[0] <= '9') ++cells;
  }
  CHECK(cells == 4);

  const auto g = run_cli({"gradcheck", "--width", "8", "--blocks", "1", "--all-flags"});
  CHECK(g.code == 0);
  CHECK(g.out.find("max_rel_error") != std::string::npos);
}

}
