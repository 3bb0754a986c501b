#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Drives the built `nfm` and `nfm-synth` binaries end to end on a small
// synthetic corpus. Binary paths come from NFM_CLI_BIN / NFM_SYNTH_BIN
// (ctest sets them).

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nfm/checkpoint.hpp"
#include "nfm/data.hpp"
#include "nfm/metrics.hpp"
#include "nfm/train.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace nfm;

namespace {

std::string binary(const char* env, const char* fallback) {
  if (const char* v = std::getenv(env)) return v;
  return fallback;
}

const std::string cli = binary("NFM_CLI_BIN", "./tools/nfm");
const std::string synth = binary("NFM_SYNTH_BIN", "./tools/nfm-synth");

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run(const std::string& cmd) {
  CommandResult result;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (std::size_t got = std::fread(buf.data(), 1, buf.size(), pipe)) {
    result.output.append(buf.data(), got);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "nfm_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli pipeline: synth, prepare, train, evaluate") {
  Workspace ws;

  // tiny corpus so the whole pipeline runs in seconds
  const auto gen = run(synth + " --out " + ws.path("raw.tsv") +
                       " --users 25 --items 40 --logs 600 --seed 5");
  REQUIRE(gen.exit_code == 0);
  REQUIRE(fs::exists(ws.path("raw.tsv")));

  const std::string prepare_cmd =
      cli + " prepare --raw " + ws.path("raw.tsv") + " --neg-ratio 2 --seed 11 --out " +
      ws.path("data");
  const auto prep = run(prepare_cmd);
  CAPTURE(prep.output);
  REQUIRE(prep.exit_code == 0);
  for (const char* name : {"train.libfm", "valid.libfm", "test.libfm", "meta.json"}) {
    CHECK(fs::exists(ws.dir / "data" / name));
  }

  SUBCASE("prepare is byte-identical across runs") {
    const std::string first = slurp(ws.dir / "data" / "train.libfm");
    const auto rerun = run(cli + " prepare --raw " + ws.path("raw.tsv") +
                           " --neg-ratio 2 --seed 11 --out " + ws.path("data2"));
    REQUIRE(rerun.exit_code == 0);
    CHECK(first == slurp(ws.dir / "data2" / "train.libfm"));
    CHECK(slurp(ws.dir / "data" / "test.libfm") == slurp(ws.dir / "data2" / "test.libfm"));
  }

  SUBCASE("counts follow the 1+ratio rule and the split fractions") {
    const auto train = parse_libfm(slurp(ws.dir / "data" / "train.libfm"));
    const auto valid = parse_libfm(slurp(ws.dir / "data" / "valid.libfm"));
    const auto test = parse_libfm(slurp(ws.dir / "data" / "test.libfm"));
    const Index total = train.size() + valid.size() + test.size();
    CHECK(total == 600 * 3);
    CHECK(train.size() == static_cast<Index>(std::floor(0.7 * 1800)));
    CHECK(valid.size() == static_cast<Index>(std::floor(0.2 * 1800)));
  }

  SUBCASE("train writes a checkpoint and the epoch CSV") {
    const auto trained = run(cli + " train --method nfm --train " + ws.path("data/train.libfm") +
                             " --valid " + ws.path("data/valid.libfm") +
                             " --factors 8 --layers 8 --activation relu --dropout 0.2,0.2" +
                             " --max-epochs 3 --seed 3 --quiet --checkpoint " + ws.path("m.ckpt") +
                             " --epochs-csv " + ws.path("epochs.csv"));
    CAPTURE(trained.output);
    REQUIRE(trained.exit_code == 0);
    REQUIRE(fs::exists(ws.path("m.ckpt")));
    const std::string csv = slurp(ws.path("epochs.csv"));
    CHECK(csv.rfind("epoch,train_rmse,valid_rmse,seconds\n", 0) == 0);
    CHECK(csv.find("\n1,") != std::string::npos);

    const auto eval = run(cli + " evaluate --checkpoint " + ws.path("m.ckpt") + " --data " +
                          ws.path("data/test.libfm"));
    CAPTURE(eval.output);
    REQUIRE(eval.exit_code == 0);
    CHECK(eval.output.find("rmse ") != std::string::npos);
    CHECK(eval.output.find("model nfm") != std::string::npos);
  }

  SUBCASE("an NFM-0 checkpoint built from an FM checkpoint evaluates identically") {
    Rng rng(9);
    const Index n = parse_libfm(slurp(ws.dir / "data" / "test.libfm")).num_features;
    const auto fm = testutil::random_fm(rng, n, 6, 0.05);
    save_fm(fm, ws.path("fm.ckpt"));
    NfmArchitecture arch;
    arch.num_factors = 6;
    auto nfm0 = make_nfm<double>(n, arch, 1);
    pretrain_embeddings(nfm0, fm);
    save_nfm(nfm0, ws.path("nfm0.ckpt"));

    const auto fm_eval = run(cli + " evaluate --checkpoint " + ws.path("fm.ckpt") + " --data " +
                             ws.path("data/test.libfm"));
    const auto nfm_eval = run(cli + " evaluate --checkpoint " + ws.path("nfm0.ckpt") + " --data " +
                              ws.path("data/test.libfm"));
    REQUIRE(fm_eval.exit_code == 0);
    REQUIRE(nfm_eval.exit_code == 0);
    const auto rmse_line = [](const std::string& out) {
      const auto at = out.find("rmse ");
      REQUIRE(at != std::string::npos);
      return out.substr(at);
    };
    CHECK(rmse_line(fm_eval.output) == rmse_line(nfm_eval.output));
  }

  SUBCASE("reproduce runs a preset end to end and writes the results CSV") {
    // shrink the work: the tiny corpus plus the full preset settings still
    // finishes quickly because early stopping kicks in
    const auto repro = run(cli + " reproduce --preset frappe-dropout --data " + ws.path("data") +
                           " --out " + ws.path("results.csv") + " --quiet");
    CAPTURE(repro.output);
    REQUIRE(repro.exit_code == 0);
    const std::string csv = slurp(ws.path("results.csv"));
    CHECK(csv.rfind("method,factors,layers,dropout,lr,seed,valid_rmse,test_rmse,params\n", 0) == 0);
    CHECK(csv.find("nfm-0-d0.3") != std::string::npos);
  }
}

TEST_CASE("cli exit codes") {
  Workspace ws;
  CHECK(run(cli + " train --no-such-flag").exit_code == 2);
  CHECK(run(cli + " bogus-subcommand").exit_code == 2);
  CHECK(run(cli).exit_code == 2);
  CHECK(run(cli + " --help").exit_code == 0);

  // runtime failure: corrupt checkpoint
  {
    std::ofstream bad(ws.path("bad.ckpt"), std::ios::binary);
    bad << "garbage";
  }
  {
    std::ofstream data(ws.path("d.libfm"));
    data << "1 0:1\n";
  }
  const auto eval = run(cli + " evaluate --checkpoint " + ws.path("bad.ckpt") + " --data " +
                        ws.path("d.libfm"));
  CHECK(eval.exit_code == 1);
  CHECK(eval.output.find("error") != std::string::npos);

  // usage errors inside our own validation
  const auto bad_preset = run(cli + " reproduce --preset nope --data " + ws.dir.string());
  CHECK(bad_preset.exit_code == 2);
}
