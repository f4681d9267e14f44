#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "helpers.hpp"
#include "napkit/assets.hpp"
#include "napkit/camera.hpp"
#include "napkit/image_io.hpp"

namespace fs = std::filesystem;
using namespace napkit;

namespace {

struct RunResult {
  int code = -1;
  std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd =
      std::string("'") + NAPKIT_CLI_PATH + "' " + args + " > '" + (scratch / "stdout.txt").string() + "' 2> '" +
      err.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "run.json") continue;
    out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  }
  return out;
}

fs::path make_compose_inputs(const fs::path& dir) {
  CameraModel cam;
  cam.width = 96;
  cam.height = 72;
  cam.cx = 47.5;
  cam.cy = 35.5;
  cam.fx = cam.fy = 90;
  cam.k1 = -0.05;
  save_calibration(cam, dir / "cam.json");
  fs::create_directories(dir / "signs" / "14");
  fs::create_directories(dir / "signs" / "1");
  fs::create_directories(dir / "bg");
  write_png(dir / "signs" / "14" / "a.png", make_stop_sign(24));
  write_png(dir / "signs" / "14" / "b.png", make_stop_sign(30));
  write_png(dir / "signs" / "1" / "a.png", make_blue_sign(24));
  for (int i = 0; i < 3; ++i) write_png(dir / "bg" / ("f" + std::to_string(i) + ".png"), make_background(96, 72, i));
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help is available for every subcommand") {
    const auto dir = fresh_dir("cli_help");
    CHECK(run_cli("--help", dir).code == 0);
    for (const char* sub : {"compose", "attack", "evaluate", "report", "serve"}) {
      CHECK(run_cli(std::string(sub) + " --help", dir).code == 0);
    }
    CHECK(run_cli("", dir).code == 2);
    CHECK(run_cli("frobnicate", dir).code == 2);
  }

  TEST_CASE("compose is reproducible for a fixed seed") {
    const auto dir = make_compose_inputs(fresh_dir("cli_compose"));
    const std::string common = "--seed 12 compose --calib '" + (dir / "cam.json").string() + "' --signs '" +
                               (dir / "signs").string() + "' --backgrounds '" + (dir / "bg").string() + "'";
    REQUIRE(run_cli(common + " --out '" + (dir / "a").string() + "'", dir).code == 0);
    REQUIRE(run_cli(common + " --out '" + (dir / "b").string() + "'", dir).code == 0);
    const auto a = tree_contents(dir / "a");
    CHECK(a.size() > 4);
    CHECK(a == tree_contents(dir / "b"));
    CHECK(fs::exists(dir / "a" / "run.json"));
  }

  TEST_CASE("missing calibration is a data error naming the path") {
    const auto dir = make_compose_inputs(fresh_dir("cli_missing"));
    const auto r = run_cli("compose --calib '" + (dir / "nope.json").string() + "' --signs '" +
                               (dir / "signs").string() + "' --backgrounds '" + (dir / "bg").string() +
                               "' --out '" + (dir / "out").string() + "'",
                           dir);
    CHECK(r.code == 3);
    CHECK(r.err.find("nope.json") != std::string::npos);
  }

  TEST_CASE("attack writes one loss row per iteration") {
    const auto dir = fresh_dir("cli_attack");
    REQUIRE(run_cli("--seed 2 attack --iters 10 --init dog --out '" + (dir / "run").string() + "'", dir).code == 0);
    std::size_t found = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "run")) {
      if (e.path().filename() != "loss_history.csv") continue;
      const std::string text = read_text_file(e.path());
      CHECK(std::count(text.begin(), text.end(), '\n') == 11);
      ++found;
    }
    CHECK(found == 1);
    CHECK(fs::exists(dir / "run" / "best_patch.png"));
  }

  TEST_CASE("attack against a detector without gradients is a capability error") {
    const auto dir = fresh_dir("cli_nograd");
    const std::string serve = std::string(NAPKIT_CLI_PATH) + " serve --detector toy";
    const auto r = run_cli("attack --iters 3 --detector \"external:" + serve + "\" --out '" + (dir / "run").string() + "'",
                           dir);
    CHECK(r.code == 4);
    CHECK(r.err.find("NoGradientSupport") != std::string::npos);
  }

  TEST_CASE("report without clean rows is a precondition error") {
    const auto dir = fresh_dir("cli_report");
    write_text_file(dir / "records.csv",
                    "distance_m,patch_type,size,placement,frame_idx,confidence\n"
                    "0.3,white,small,center,0,0.5\n"
                    "0.6,white,small,center,0,0.4\n");
    const auto r = run_cli("report --records '" + (dir / "records.csv").string() + "' --out '" +
                               (dir / "rep").string() + "'",
                           dir);
    CHECK(r.code == 5);
    CHECK(r.err.find("MissingCleanBaseline") != std::string::npos);
  }

  TEST_CASE("malformed config file is a config error") {
    const auto dir = fresh_dir("cli_config");
    write_text_file(dir / "bad.json", "{ not json");
    CHECK(run_cli("--config '" + (dir / "bad.json").string() + "' report", dir).code == 2);
  }
}
