#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "catkit/dataset.hpp"
#include "catkit/fitting.hpp"

using namespace catkit;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return CATKIT_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("catkit_cli_" + tag + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

long data_lines(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  long n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++n;
  }
  return n;
}

// Small world shared by the chain tests: 16 items, 22 users. The seed is kept
// separate so individual tests can swap it without repeating the flag.
const std::string kTinySynth =
    " --synth.items 16 --roles.train 10 --roles.val 3 --roles.biased 4"
    " --roles.test 5";
const std::string kSeed = " --seed 11";
const std::string kTinyFit = " --fit.max_epochs 200";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2, help exits 0") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("synth --help") == 0);
    CHECK(run_cli("") == 2);                    // a subcommand is required
    CHECK(run_cli("--no-such-flag synth") == 2);
    CHECK(run_cli("frobnicate") == 2);          // unknown subcommand
    CHECK(run_cli("fit") == 2);                 // --data is required
    CHECK(run_cli("bias --data x.csv") == 2);   // --model is required
    CHECK(run_cli("debias --data x.csv --model y.json") == 2);
    CHECK(run_cli("synth --synth.items notanumber") == 2);
  }

  TEST_CASE("data errors exit 3") {
    TempDir tmp("dataerr");
    CHECK(run_cli("fit --data " + tmp.sub("missing.csv")) == 3);
    const std::string bad = tmp.sub("bad.csv");
    {
      std::ofstream out(bad);
      out << "user_id,item_id,correct\n1,1,7\n";
    }
    CHECK(run_cli("fit --data " + bad) == 3);
    CHECK(run_cli("bias --data " + bad + " --model also-missing.json") == 3);
  }

  TEST_CASE("synth is seed-deterministic byte for byte") {
    TempDir tmp("synthdet");
    REQUIRE(run_cli("--out " + tmp.sub("a") + kTinySynth + kSeed + " synth") == 0);
    REQUIRE(run_cli("--out " + tmp.sub("b") + kTinySynth + kSeed + " synth") == 0);
    REQUIRE(run_cli("--out " + tmp.sub("c") + kTinySynth + " --seed 12 synth") == 0);
    CHECK(read_text(tmp.sub("a") + "/data.csv") == read_text(tmp.sub("b") + "/data.csv"));
    CHECK(read_text(tmp.sub("a") + "/data.csv") != read_text(tmp.sub("c") + "/data.csv"));
    CHECK(read_text(tmp.sub("a") + "/truth.json") ==
          read_text(tmp.sub("b") + "/truth.json"));
    // 22 kept users x 16 items, dense.
    CHECK(data_lines(tmp.sub("a") + "/data.csv") == 22 * 16);
    // Outputs announce their provenance.
    CHECK(read_text(tmp.sub("a") + "/data.csv").rfind("# catkit synth", 0) == 0);
  }

  TEST_CASE("synth, fit, bias, debias, eval chain round-trips through files") {
    TempDir tmp("chain");
    const std::string out = tmp.sub("o");
    const std::string common = "--out " + out + kTinySynth + kSeed + kTinyFit;

    REQUIRE(run_cli(common + " synth") == 0);
    const ResponseDataset data = load_csv(out + "/data.csv");
    CHECK(data.users_with_role(Role::Biased).size() == 4);
    CHECK(data.users_with_role(Role::Test).size() == 5);

    REQUIRE(run_cli(common + " --data " + out + "/data.csv --truth " + out +
                    "/truth.json fit") == 0);
    const FittedModel m = load_model_json(out + "/model.json");
    CHECK(m.index.n_items() == 16);
    // Only train users own ability parameters; val abilities are re-fit per
    // epoch against frozen items and never enter the model.
    CHECK(m.index.n_users() == 10);

    REQUIRE(run_cli(common + " --data " + out + "/data.csv --model " + out +
                    "/model.json --cat.steps 5 bias") == 0);
    CHECK(data_lines(out + "/biased.csv") == 4 * 5);

    // A made-up method name on otherwise valid inputs is a usage error.
    CHECK(run_cli(common + " --data " + out + "/data.csv --model " + out +
                  "/model.json --biased " + out +
                  "/biased.csv --debias.method Magic debias") == 2);

    REQUIRE(run_cli(common + " --data " + out + "/data.csv --model " + out +
                    "/model.json --biased " + out +
                    "/biased.csv --debias.method UserAIF debias") == 0);
    CHECK(fs::exists(out + "/model_UserAIF.json"));
    CHECK(fs::exists(out + "/influence_interactions.csv"));
    CHECK(fs::exists(out + "/influence_users.csv"));
    CHECK(data_lines(out + "/influence_interactions.csv") == 4 * 5);
    CHECK(data_lines(out + "/influence_users.csv") == 4);
    // The retrained model covers the biased users too.
    const FittedModel mu = load_model_json(out + "/model_UserAIF.json");
    CHECK(mu.index.n_items() == 16);

    REQUIRE(run_cli(common + " --data " + out + "/data.csv --model " + out +
                    "/model_UserAIF.json --truth " + out + "/truth.json --biased " + out +
                    "/biased.csv --eval.steps 3 --eval.repeats 2 eval") == 0);
    CHECK(fs::exists(out + "/metrics.csv"));
    CHECK(fs::exists(out + "/ratios.csv"));
    const std::string metrics = read_text(out + "/metrics.csv");
    CHECK(metrics.find("cat_auc_pool") != std::string::npos);
    CHECK(metrics.find("cat_auc_eval") != std::string::npos);
    CHECK(metrics.find("random_auc") != std::string::npos);
    CHECK(metrics.find("rank_corr") != std::string::npos);
    CHECK(metrics.find("bias_signature") != std::string::npos);
    CHECK(data_lines(out + "/ratios.csv") == 16);
  }

  TEST_CASE("weighting method produces per-row weights instead of selection") {
    TempDir tmp("weights");
    const std::string out = tmp.sub("o");
    const std::string common = "--out " + out + kTinySynth + kSeed + kTinyFit;
    REQUIRE(run_cli(common + " synth") == 0);
    REQUIRE(run_cli(common + " --data " + out + "/data.csv fit") == 0);
    REQUIRE(run_cli(common + " --data " + out + "/data.csv --model " + out +
                    "/model.json --cat.steps 5 bias") == 0);
    REQUIRE(run_cli(common + " --data " + out + "/data.csv --model " + out +
                    "/model.json --biased " + out +
                    "/biased.csv --debias.method IPS-NB debias") == 0);
    CHECK(fs::exists(out + "/model_IPS-NB.json"));
    // Every biased row keeps a weight column in the interactions report.
    const std::string infl = read_text(out + "/influence_interactions.csv");
    CHECK(infl.find("weight") != std::string::npos);
  }

  TEST_CASE("config file and flag overrides agree with pure-flag runs") {
    TempDir tmp("config");
    const std::string ini = tmp.sub("run.ini");
    {
      // Dotted option names must be quoted in the INI, else the part before
      // the dot is taken for a (nonexistent) subcommand scope and the line is
      // dropped. Quoted keys are exactly what the parser's own config writer
      // emits, so the format round-trips.
      std::ofstream out(ini);
      out << "'synth.items'=16\n"
          << "'roles.train'=10\n'roles.val'=3\n'roles.biased'=4\n'roles.test'=5\n"
          << "'fit.max_epochs'=200\n";
    }
    REQUIRE(run_cli("--out " + tmp.sub("a") + " --config " + ini + kSeed + " synth") ==
            0);
    // The pure-flag twin passes the same effective options (the output header
    // embeds a hash of the full config, so every option must match).
    REQUIRE(run_cli("--out " + tmp.sub("b") + kTinySynth + kSeed + kTinyFit +
                    " synth") == 0);
    CHECK(read_text(tmp.sub("a") + "/data.csv") == read_text(tmp.sub("b") + "/data.csv"));
    // A flag on top of the config wins.
    REQUIRE(run_cli("--out " + tmp.sub("c") + " --config " + ini + kSeed +
                    " --synth.items 8 synth") == 0);
    CHECK(data_lines(tmp.sub("c") + "/data.csv") == 22 * 8);
    // A config path that does not exist is a usage error, not a silent skip.
    CHECK(run_cli("--out " + tmp.sub("d") + " --config " + tmp.sub("nope.ini") +
                  kSeed + " synth") == 2);
  }
}
