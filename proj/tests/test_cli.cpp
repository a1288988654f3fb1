// Copyright 2026 The effmp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace
{

const char * kCli = EFFMP_CLI_PATH;

struct RunResult
{
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string & args)
{
  const fs::path out = fs::temp_directory_path() / "effmp_cli_out.txt";
  const std::string cmd = std::string(kCli) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out);
  std::ostringstream text;
  text << in.rdbuf();
  result.output = text.str();
  return result;
}

fs::path work_dir()
{
  const auto dir = fs::temp_directory_path() / "effmp_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_config(const fs::path & path)
{
  std::ofstream out(path);
  out << "variant=set_transformer model_dim=16 heads=2 b=1 s=1 k=6\n"
      << "use_goal_features=1 goal_embed_dim=8 goal_hidden_dim=8 ff_hidden_dim=16\n"
      << "lambda=0.9 r=16 forward_cone_deg=180 seed=5\n"
      << "batch_size=4 lr=0.003 max_steps=8 eval_every=4 patience=2\n"
      << "point_dropout_p=0.05 rotate90_p=0.25 jitter_sigma_m=0.05\n";
}

}  // namespace

TEST_CASE("usage errors exit 2")
{
  CHECK(run("").exit_code == 2);                    // missing subcommand
  CHECK(run("bogus-subcommand").exit_code == 2);
  CHECK(run("eval --data-dir /tmp").exit_code == 2);  // missing --checkpoint
  CHECK(run("predict --checkpoint x").exit_code == 2);  // missing bundle + --out
  const RunResult help = run("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.output.find("gen-data") != std::string::npos);
}

TEST_CASE("runtime failures exit 1 with a message")
{
  const auto dir = work_dir();
  const RunResult r = run("eval --checkpoint " + (dir / "missing.ckpt").string() +
                          " --data-dir " + dir.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("full pipeline: gen-data, train, predict, eval, plot")
{
  const auto dir = work_dir();
  const auto data = dir / "data";
  write_config(dir / "cfg.txt");

  CHECK(run("gen-data --out " + data.string() + " --count 6 --seed 3 --template intersection"
            " --agents 4 --noise 0.05").exit_code == 0);

  CHECK(run("train --config " + (dir / "cfg.txt").string() + " --data-dir " + data.string() +
            " --out " + (dir / "m.ckpt").string() + " --log " + (dir / "train.log").string())
          .exit_code == 0);
  CHECK(slurp(dir / "train.log").find("STEP 1 loss=") != std::string::npos);

  const std::string bundle = (data / "scene_00000.bundle").string();
  CHECK(run("predict " + bundle + " --checkpoint " + (dir / "m.ckpt").string() + " --out " +
            (dir / "pred.txt").string() + " --seed 11").exit_code == 0);
  const std::string pred_text = slurp(dir / "pred.txt");
  CHECK(pred_text.find("PRED ") == 0);
  CHECK(pred_text.find("k=6") != std::string::npos);

  const RunResult eval = run("eval --checkpoint " + (dir / "m.ckpt").string() + " --data-dir " +
                             data.string() + " --out " + (dir / "breakdown.txt").string());
  CHECK(eval.exit_code == 0);
  CHECK(eval.output.find("EVAL scenes=6 ade=") != std::string::npos);
  CHECK(eval.output.find("minade6=") != std::string::npos);
  CHECK(slurp(dir / "breakdown.txt").find("SCENE ") != std::string::npos);

  // worker count must not change the aggregate
  {
    const fs::path out = fs::temp_directory_path() / "effmp_cli_threads.txt";
    const std::string cmd = "EFFMP_THREADS=3 " + std::string(kCli) + " eval --checkpoint " +
                            (dir / "m.ckpt").string() + " --data-dir " + data.string() + " > " +
                            out.string() + " 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(slurp(out) == eval.output);
  }

  // k=1 column equality: minade1 equals ade exactly
  const RunResult eval1 = run("eval --checkpoint " + (dir / "m.ckpt").string() + " --data-dir " +
                              data.string() + " --k 1");
  CHECK(eval1.exit_code == 0);
  {
    std::istringstream iss(eval1.output);
    std::string tok;
    double ade_v = -1.0;
    double minade_v = -2.0;
    while (iss >> tok) {
      if (tok.rfind("ade=", 0) == 0) {
        ade_v = std::stod(tok.substr(4));
      }
      if (tok.rfind("minade1=", 0) == 0) {
        minade_v = std::stod(tok.substr(8));
      }
    }
    CHECK(ade_v == doctest::Approx(minade_v).epsilon(1e-12));
  }

  CHECK(run("extract-features " + bundle + " --out " + (dir / "goals.txt").string() +
            " --config " + (dir / "cfg.txt").string()).exit_code == 0);
  CHECK(slurp(dir / "goals.txt").find("GOALS ") == 0);

  CHECK(run("plot " + bundle + " " + (dir / "pred.txt").string() + " --out " +
            (dir / "plot.svg").string()).exit_code == 0);
  const std::string svg = slurp(dir / "plot.svg");
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.rfind("</svg>") != std::string::npos);

  SUBCASE("config hash mismatch is rejected")
  {
    std::ofstream other(dir / "other.txt");
    other << "variant=set_transformer model_dim=24 heads=2 b=1 s=1 k=6 use_goal_features=1 "
             "goal_embed_dim=8 goal_hidden_dim=8 ff_hidden_dim=16\n";
    other.close();
    const RunResult bad = run("eval --checkpoint " + (dir / "m.ckpt").string() + " --data-dir " +
                              data.string() + " --config " + (dir / "other.txt").string());
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("hash mismatch") != std::string::npos);
  }
}

TEST_CASE("determinism: identical seeds give byte-identical outputs")
{
  const auto dir = work_dir();
  const auto data_a = dir / "a";
  const auto data_b = dir / "b";
  const std::string gen = " --count 4 --seed 7 --template curve --agents 3 --noise 0.1";
  CHECK(run("gen-data --out " + data_a.string() + gen).exit_code == 0);
  CHECK(run("gen-data --out " + data_b.string() + gen).exit_code == 0);
  for (const auto & entry : fs::directory_iterator(data_a)) {
    const auto other = data_b / entry.path().filename();
    CHECK(slurp(entry.path()) == slurp(other));
  }

  write_config(dir / "cfg.txt");
  CHECK(run("train --config " + (dir / "cfg.txt").string() + " --data-dir " + data_a.string() +
            " --out " + (dir / "m.ckpt").string() + " --log " + (dir / "t.log").string())
          .exit_code == 0);
  const std::string bundle = (data_a / "scene_00002.bundle").string();
  for (const char * name : {"p1.txt", "p2.txt"}) {
    CHECK(run("predict " + bundle + " --checkpoint " + (dir / "m.ckpt").string() + " --out " +
              (dir / name).string() + " --seed 5").exit_code == 0);
  }
  CHECK(slurp(dir / "p1.txt") == slurp(dir / "p2.txt"));

  for (const char * name : {"v1.svg", "v2.svg"}) {
    CHECK(run("plot " + bundle + " " + (dir / "p1.txt").string() + " --out " +
              (dir / name).string() + " --seed 5").exit_code == 0);
  }
  CHECK(slurp(dir / "v1.svg") == slurp(dir / "v2.svg"));
}

TEST_CASE("flops subcommand")
{
  const RunResult r = run("flops --agents 10");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("params=") != std::string::npos);
  CHECK(r.output.find("gflops=") != std::string::npos);
  const RunResult lstm = run("flops --agents 10 --variant lstm_mhsa");
  CHECK(lstm.exit_code == 0);
  CHECK(lstm.output.find("variant=lstm_mhsa") != std::string::npos);
}

TEST_CASE("extract-features on a stationary target clamps the radius")
{
  const auto dir = work_dir();
  // hand-written bundle with a stationary target
  {
    std::ofstream scene(dir / "s.scene");
    scene << "SCENE still m=4 n=2 hz=10\n";
    scene << "TRACK ego ego 1.0 1.0 1.1 1.0 1.2 1.0 1.3 1.0 mask=1111\n";
    scene << "TRACK target target 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 mask=1111\n";
    scene << "FUTURE 0.0 0.0 0.0 0.0\n";
    std::ofstream grid(dir / "s.grid");
    grid << "GRID -8.0 -8.0 1.0 16 16\n";
    for (int i = 0; i < 16; ++i) {
      grid << "1111111111111111\n";
    }
    std::ofstream manifest(dir / "s.bundle");
    manifest << "scene s.scene\ngrid s.grid\n";
  }
  CHECK(run("extract-features " + (dir / "s.bundle").string() + " --out " +
            (dir / "g.txt").string()).exit_code == 0);
  const std::string goals = slurp(dir / "g.txt");
  std::istringstream iss(goals);
  std::string tag;
  double cx = 0;
  double cy = 0;
  double radius = -1;
  iss >> tag >> cx >> cy >> radius;
  CHECK(radius == doctest::Approx(2.0));  // min_radius_m floor
}
