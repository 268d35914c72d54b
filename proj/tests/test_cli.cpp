// End-to-end checks of the installed command-line surface: exit codes per stage,
// result-file round trips, config-file handling, and determinism of emitted artifacts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stcal/evaluation.hpp"
#include "stcal/result_io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = STCAL_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("stcal_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("cli pipeline and exit codes") {
  TempDir tmp;
  REQUIRE(run("simulate --preset figure8 --level 0 --seed 5 --span 30 --out " + tmp / "sim") ==
          0);
  REQUIRE(fs::exists(tmp / "sim/hand.txt"));
  REQUIRE(fs::exists(tmp / "sim/eye.txt"));
  REQUIRE(fs::exists(tmp / "sim/truth.txt"));

  SUBCASE("missing input exits with the ingest code and writes nothing") {
    const int rc = run("calibrate --hand " + tmp / "nope.txt" + " --eye " + tmp / "sim/eye.txt" +
                       " --out " + tmp / "r.txt");
    CHECK(rc == 1);
    CHECK_FALSE(fs::exists(tmp / "r.txt"));
  }

  SUBCASE("align prints a reliable estimate") {
    CHECK(run("align --hand " + tmp / "sim/hand.txt" + " --eye " + tmp / "sim/eye.txt") == 0);
  }

  SUBCASE("full pipeline reproduces the truth on noise-free data") {
    REQUIRE(run("run --hand " + tmp / "sim/hand.txt" + " --eye " + tmp / "sim/eye.txt" +
                " --out " + tmp / "out") == 0);
    const stcal::ResultFile truth = stcal::load_result(tmp / "sim/truth.txt");
    const stcal::ResultFile be = stcal::load_result(tmp / "out/result_be.txt");
    const auto [terr, rerr] = stcal::extrinsic_error(be.extrinsic, truth.extrinsic);
    CHECK(terr < 1e-6);
    CHECK(rerr < 1e-6);
    CHECK(std::abs(be.dt - truth.dt) < 1e-5);
    CHECK(fs::exists(tmp / "out/manifest.txt"));
    CHECK(fs::exists(tmp / "out/pairs.csv"));
    CHECK(fs::exists(tmp / "out/per_sample_errors.csv"));
  }

  SUBCASE("calibrate twice gives byte-identical results") {
    REQUIRE(run("calibrate --hand " + tmp / "sim/hand.txt" + " --eye " + tmp / "sim/eye.txt" +
                " --seed 9 --out " + tmp / "a.txt") == 0);
    REQUIRE(run("calibrate --hand " + tmp / "sim/hand.txt" + " --eye " + tmp / "sim/eye.txt" +
                " --seed 9 --out " + tmp / "b.txt") == 0);
    CHECK(slurp(tmp / "a.txt") == slurp(tmp / "b.txt"));
  }

  SUBCASE("config file sets defaults, flags override") {
    {
      std::ofstream cfg(tmp / "stcal.cfg");
      cfg << "[calibrate]\n";
      cfg << "eta=7.5\n";
      cfg << "seed=11\n";
      cfg << "hand=" << tmp / "sim/hand.txt" << "\n";
      cfg << "eye=" << tmp / "sim/eye.txt" << "\n";
      cfg << "out=" << tmp / "cfg_result.txt" << "\n";
    }
    CHECK(run("--config " + tmp / "stcal.cfg" + " calibrate") == 0);
    CHECK(fs::exists(tmp / "cfg_result.txt"));
  }
}

TEST_CASE("cli evaluate on simulated data") {
  TempDir tmp;
  REQUIRE(run("simulate --preset figure8 --level 2 --seed 6 --span 30 --out " + tmp / "sim") ==
          0);
  REQUIRE(run("calibrate --hand " + tmp / "sim/hand.txt" + " --eye " + tmp / "sim/eye.txt" +
              " --out " + tmp / "lc.txt --diagnostics " + tmp / "pairs.csv") == 0);
  CHECK(run("evaluate --est " + tmp / "sim/eye.txt" + " --gt-raw " + tmp / "sim/hand.txt" +
            " --calib " + tmp / "lc.txt --out-csv " + tmp / "err.csv") == 0);
  CHECK(fs::exists(tmp / "err.csv"));
  // diagnostics CSV has a header plus one row per pair
  std::ifstream f(tmp / "pairs.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "i,j,t_i,t_j,hand_angle_deg,eye_angle_deg,E,weight,inlier");
}

TEST_CASE("cli ablate determinism across job counts") {
  TempDir tmp;
  const std::string common =
      "ablate --variants rotconstr,interframe --levels 0,4 --seeds 2 --span 26 --iters 40 ";
  REQUIRE(run(common + "--jobs 1 --out " + tmp / "j1.csv") == 0);
  REQUIRE(run(common + "--jobs 4 --out " + tmp / "j4.csv") == 0);
  CHECK(slurp(tmp / "j1.csv") == slurp(tmp / "j4.csv"));
  std::ifstream f(tmp / "j1.csv");
  std::string line;
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 1 + 2 * 2 * 2);
}
