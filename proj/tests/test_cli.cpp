#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "streamkern/simulate.hpp"

using namespace streamkern;

namespace {

const std::string kCli = STREAMKERN_CLI_PATH;
const std::string kTmp = STREAMKERN_TEST_TMPDIR;

int run_cmd(const std::string& args, const std::string& capture = "") {
  std::string cmd = kCli + " " + args;
  if (!capture.empty()) cmd += " > " + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

const std::string kSmokeConfig = kTmp + "/cli_smoke.cfg";

void ensure_smoke_config() {
  write_file(kSmokeConfig,
             "preset = ex2\n"
             "reps = 2\n"
             "estimators = projection\n"
             "n_min = 100\n"
             "n_max = 1500\n"
             "points_per_decade = 6\n"
             "mc_points = 150\n");
}

}  // namespace

TEST_CASE("run writes the pinned CSV header and succeeds") {
  ensure_smoke_config();
  const std::string csv = kTmp + "/cli_run.csv";
  const int code =
      run_cmd("run --config " + kSmokeConfig + " --seed 7 --out " + csv, kTmp + "/run_out.txt");
  REQUIRE(code == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("estimator,rep,n,N,sq_l2_error,cum_cpu_ns\n", 0) == 0);
  const std::string log = slurp(kTmp + "/run_out.txt");
  CHECK(log.find("projection") != std::string::npos);
}

TEST_CASE("run is deterministic in the statistical payload") {
  ensure_smoke_config();
  const std::string a = kTmp + "/cli_det_a.csv", b = kTmp + "/cli_det_b.csv";
  REQUIRE(run_cmd("run --config " + kSmokeConfig + " --seed 11 --out " + a,
                  kTmp + "/det_a.txt") == 0);
  REQUIRE(run_cmd("run --config " + kSmokeConfig + " --seed 11 --out " + b,
                  kTmp + "/det_b.txt") == 0);
  std::ifstream fa(a), fb(b);
  const ErrorCurve ca = read_csv(fa), cb = read_csv(fb);
  REQUIRE(ca.cells.size() == cb.cells.size());
  for (std::size_t i = 0; i < ca.cells.size(); ++i) {
    CHECK(ca.cells[i].estimator == cb.cells[i].estimator);
    CHECK(ca.cells[i].rep == cb.cells[i].rep);
    CHECK(ca.cells[i].n == cb.cells[i].n);
    CHECK(ca.cells[i].basis == cb.cells[i].basis);
    CHECK(ca.cells[i].sq_l2_error == cb.cells[i].sq_l2_error);  // bitwise
  }
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run_cmd("run", kTmp + "/usage1.txt") == 2);                       // no preset/config
  CHECK(run_cmd("run --preset nope", kTmp + "/usage2.txt") == 2);         // unknown preset
  CHECK(run_cmd("run --preset ex2 --config x.cfg", kTmp + "/u3.txt") == 2);
  CHECK(run_cmd("slope /does/not/exist.csv", kTmp + "/usage4.txt") == 2);
  CHECK(run_cmd("wat", kTmp + "/usage5.txt") == 2);
  write_file(kTmp + "/bad.cfg", "preset = ex2\nunknown_key = 3\n");
  CHECK(run_cmd("run --config " + kTmp + "/bad.cfg", kTmp + "/usage6.txt") == 2);
}

TEST_CASE("verify subcommand") {
  CHECK(run_cmd("verify", kTmp + "/verify_all.txt") == 0);
  const std::string all = slurp(kTmp + "/verify_all.txt");
  CHECK(all.find("oracle:incremental_vs_direct") != std::string::npos);
  CHECK(all.find("FAIL") == std::string::npos);

  CHECK(run_cmd("verify --filter ortho", kTmp + "/verify_ortho.txt") == 0);
  const std::string ortho = slurp(kTmp + "/verify_ortho.txt");
  CHECK(ortho.find("ortho:sobolev_min") != std::string::npos);
  CHECK(ortho.find("recursion") == std::string::npos);

  CHECK(run_cmd("verify --filter no_such_property", kTmp + "/verify_none.txt") == 2);
}

TEST_CASE("slope subcommand on a synthetic power law") {
  const std::string csv = kTmp + "/cli_synth.csv";
  std::ostringstream text;
  text << kCsvHeader << '\n';
  for (int rep = 0; rep < 2; ++rep)
    for (std::int64_t n : {100, 316, 1000, 3162, 10000})
      text << "projection," << rep << ',' << n << ",4," << (1.0 / n) << ",0\n";
  write_file(csv, text.str());
  REQUIRE(run_cmd("slope " + csv + " --nmin 100 --nmax 10000", kTmp + "/slope_out.txt") == 0);
  const std::string out = slurp(kTmp + "/slope_out.txt");
  CHECK(out.find("-1.0000") != std::string::npos);

  SECTION("empty fit range exits 2") {
    CHECK(run_cmd("slope " + csv + " --nmin 100000 --nmax 1000000", kTmp + "/s2.txt") == 2);
  }

  SECTION("malformed CSV exits 2") {
    write_file(kTmp + "/cli_garbage.csv", "this,is,not\na,csv,we,accept\n");
    CHECK(run_cmd("slope " + kTmp + "/cli_garbage.csv", kTmp + "/s3.txt") == 2);
  }
}

TEST_CASE("snapshot save and resume are bit-exact") {
  const std::string half = kTmp + "/cli_half.ope1";
  const std::string full_resumed = kTmp + "/cli_resumed.ope1";
  const std::string full_direct = kTmp + "/cli_direct.ope1";
  REQUIRE(run_cmd("snapshot --preset ex2 --seed 3 --n 250 --out " + half,
                  kTmp + "/snap1.txt") == 0);
  REQUIRE(run_cmd("snapshot --resume " + half + " --preset ex2 --seed 3 --n 500 --out " +
                      full_resumed,
                  kTmp + "/snap2.txt") == 0);
  REQUIRE(run_cmd("snapshot --preset ex2 --seed 3 --n 500 --out " + full_direct,
                  kTmp + "/snap3.txt") == 0);
  CHECK(slurp(full_resumed) == slurp(full_direct));
  CHECK(slurp(half).rfind("OPE1 projection", 0) == 0);

  SECTION("additive snapshots carry the dimension header") {
    const std::string add = kTmp + "/cli_add.ope1";
    REQUIRE(run_cmd("snapshot --preset additive10 --n 60 --out " + add, kTmp + "/snap4.txt") ==
            0);
    CHECK(slurp(add).rfind("OPE1 additive\ndim 10\n", 0) == 0);
  }
}
