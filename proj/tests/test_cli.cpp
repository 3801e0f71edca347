#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aemu/dataset_io.hpp"
#include "aemu/eval.hpp"
#include "aemu/nn.hpp"
#include "test_util.hpp"

using namespace aemu;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI with `args` inside `dir`, capturing stdout and stderr.
Run run(const test::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" AEMU_CLI_PATH "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

/// Small dataset plus a quickly trained tiny network, shared by several cases.
struct Trained {
  test::TempDir dir{"cli_trained"};
  Trained() {
    REQUIRE(run(dir, "generate --out train --samples 600 --seed 1").status == 0);
    REQUIRE(run(dir, "generate --out val --samples 200 --seed 2").status == 0);
    REQUIRE(run(dir, "generate --out test --samples 300 --seed 3 --format csv").status == 0);
    const auto r = run(dir, "train --train train --val val --out m.ckpt --width 12 --max-epochs 3 --batch-size 128");
    REQUIRE_MESSAGE(r.status == 0, r.err);
  }
};

}  // namespace

TEST_CASE("help lists subcommands and defaults") {
  test::TempDir dir("cli_help");
  auto r = run(dir, "--help");
  CHECK(r.status == 0);
  for (const char* sub : {"generate", "train", "evaluate", "predict", "bench", "plot", "schema"}) {
    CHECK(r.out.find(sub) != std::string::npos);
  }
  r = run(dir, "train --help");
  CHECK(r.status == 0);
  CHECK(r.out.find("--lr FLOAT [0.001]") != std::string::npos);
  CHECK(r.out.find("--batch-size UINT [4096]") != std::string::npos);
  CHECK(r.out.find("--patience UINT [10]") != std::string::npos);
  CHECK(r.out.find("--width UINT [256]") != std::string::npos);
  CHECK(r.out.find("--threads") != std::string::npos);
  CHECK(r.out.find("--config") != std::string::npos);
  CHECK(run(dir, "--version").out.find("0.1.0") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  test::TempDir dir("cli_usage");
  CHECK(run(dir, "").status == 2);
  CHECK(run(dir, "frobnicate").status == 2);
  CHECK(run(dir, "generate").status == 2);
  CHECK(run(dir, "generate --out x --samples 0").status == 2);
  CHECK(run(dir, "generate --out x --zero-inflation 1.5").status == 2);
  CHECK(run(dir, "train --train nope --val nope --out m.ckpt --activation swish").status == 2);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(run(dir, "generate --out x --config bad.json").status == 2);
}

TEST_CASE("generate writes a manifest and reruns bit-identically from it") {
  test::TempDir dir("cli_generate");
  const auto r = run(dir, "generate --out a --samples 250 --seed 9 --coagulation 0.5");
  REQUIRE(r.status == 0);
  const auto manifest = read_json(dir / "a" / "manifest.json");
  CHECK(manifest["subcommand"] == "generate");
  CHECK(manifest["exit_status"] == 0);
  CHECK(manifest["tool_version"] == "0.1.0");
  CHECK(manifest["duration_s"].get<double>() >= 0.0);
  CHECK(manifest["schema_hash"].get<std::uint64_t>() == builtin_schema().hash());
  CHECK(manifest["config"]["surrogate"]["seed"] == 9);
  CHECK(manifest["config"]["surrogate"]["n_samples"] == 250);

  REQUIRE(run(dir, "generate --out b --config a/manifest.json").status == 0);
  CHECK(slurp(dir / "a" / "inputs.bin") == slurp(dir / "b" / "inputs.bin"));
  CHECK(slurp(dir / "a" / "outputs.bin") == slurp(dir / "b" / "outputs.bin"));

  // Flags take precedence over the config file.
  REQUIRE(run(dir, "generate --out c --config a/manifest.json --samples 40").status == 0);
  const auto c = read_dataset(dir / "c", DataFormat::kBinary, builtin_schema());
  CHECK(c.inputs.n_rows() == 40);
  const auto a = read_dataset(dir / "a", DataFormat::kBinary, builtin_schema());
  CHECK(c.inputs == a.inputs.slice(0, 40));
}

TEST_CASE("schema subcommand") {
  test::TempDir dir("cli_schema");
  REQUIRE(run(dir, "schema --out s.json").status == 0);
  CHECK(read_json(dir / "s.json") == builtin_schema().to_json());
}

TEST_CASE("train, evaluate, predict, plot and bench") {
  Trained t;
  const auto& dir = t.dir;

  SUBCASE("train artifacts") {
    CHECK(fs::exists(dir / "m.ckpt"));
    const auto history = slurp(dir / "m.ckpt.history.csv");
    CHECK(history.rfind("epoch,train_mse,val_mse\n", 0) == 0);
    CHECK(std::count(history.begin(), history.end(), '\n') == 5);  // header, epoch 0, epochs 1-3
    const auto manifest = read_json(dir / "m.ckpt.manifest.json");
    CHECK(manifest["subcommand"] == "train");
    CHECK(manifest["config"]["model"]["width"] == 12);
    CHECK(manifest["config"]["train"]["max_epochs"] == 3);
    const auto ckpt = load_checkpoint(dir / "m.ckpt", builtin_schema());
    CHECK(ckpt.net.layer_dims == std::vector<std::size_t>{34, 12, 12, 28});
  }

  SUBCASE("offline evaluation of saved predictions matches direct evaluation") {
    REQUIRE(run(dir, "evaluate --checkpoint m.ckpt --data test --out direct.json").status == 0);
    REQUIRE(run(dir, "predict --checkpoint m.ckpt --inputs test/inputs.csv --out z.bin --space transformed")
                .status == 0);
    const auto r = run(dir, "evaluate --checkpoint m.ckpt --data test --out offline.json --predictions z.bin");
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(read_json(dir / "direct.json") == read_json(dir / "offline.json"));
  }

  SUBCASE("evaluate prints the table") {
    const auto r = run(dir, "evaluate --checkpoint m.ckpt --data test --out e.json");
    REQUIRE(r.status == 0);
    CHECK(r.out.find("Variable") != std::string::npos);
    CHECK(r.out.find("NRMSE") != std::string::npos);
    const auto j = read_json(dir / "e.json");
    CHECK(j["per_variable"].size() == 28);
    CHECK(j["n_rows"] == 300);
  }

  SUBCASE("predict with mass fix leaves no negative masses") {
    REQUIRE(run(dir, "predict --checkpoint m.ckpt --inputs test/inputs.csv --out full.csv").status == 0);
    const auto r = run(dir, "predict --checkpoint m.ckpt --inputs test/inputs.csv --out fixed.csv --mass-fix");
    REQUIRE(r.status == 0);
    const auto raw = read_table(dir / "full.csv", DataFormat::kCsv, builtin_schema(), Role::kOutput);
    const auto fixed = read_table(dir / "fixed.csv", DataFormat::kCsv, builtin_schema(), Role::kOutput);
    CHECK(fixed == mass_fix(raw, builtin_schema()).values);
    for (const auto& col : fixed.columns)
      for (double v : col) CHECK(v >= 0.0);
  }

  SUBCASE("mass fix outside full space is a usage error") {
    CHECK(run(dir, "predict --checkpoint m.ckpt --inputs test/inputs.csv --out t.csv --space tendency --mass-fix")
              .status == 2);
  }

  SUBCASE("data errors exit with 3") {
    std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
    CHECK(run(dir, "evaluate --checkpoint junk.ckpt --data test --out e.json").status == 3);
    CHECK(run(dir, "predict --checkpoint m.ckpt --inputs val/outputs.bin --out p.bin").status == 3);
    fs::create_directories(dir / "empty");
    CHECK(run(dir, "evaluate --checkpoint m.ckpt --data empty --out e.json").status == 3);
    const auto manifest = read_json(dir / "e.json.manifest.json");
    CHECK(manifest["exit_status"] == 3);
  }

  SUBCASE("plot writes one file pair per requested variable") {
    const auto r = run(dir,
                       "plot --checkpoint m.ckpt --data test --out-dir plots --variables 'SO4 as mass' 'ks water' "
                       "--max-points 100");
    REQUIRE_MESSAGE(r.status == 0, r.err);
    std::size_t csv = 0, svg = 0;
    for (const auto& e : fs::directory_iterator(dir / "plots")) {
      csv += e.path().extension() == ".csv";
      svg += e.path().extension() == ".svg";
    }
    CHECK(csv == 2);
    CHECK(svg == 2);
    CHECK(fs::exists(dir / "plots" / "manifest.json"));
    CHECK(run(dir, "plot --checkpoint m.ckpt --data test --out-dir p2 --variables 'no such var'").status != 0);
  }

  SUBCASE("bench prints the disclaimer and table") {
    const auto r = run(dir, "bench --checkpoint m.ckpt --samples 500 --reps 3 --out b.json");
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(r.out.find("NOTE:") != std::string::npos);
    CHECK(r.out.find("speed-up") != std::string::npos);
    CHECK(read_json(dir / "b.json")["n_samples"] == 500);
    CHECK(run(dir, "bench --checkpoint m.ckpt --samples 500 --reps 2").status == 2);
  }

  SUBCASE("numerical failure exits with 4") {
    const auto r = run(dir, "train --train train --val val --out bad.ckpt --width 8 --lr 1e30 --max-epochs 3");
    CHECK(r.status == 4);
    CHECK(r.err.find("non-finite") != std::string::npos);
  }
}
