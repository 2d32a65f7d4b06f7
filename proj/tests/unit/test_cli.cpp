#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "hrm/dataset.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "hrm_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with arguments, output silenced. Returns the exit status.
int run_cli(const std::string& args) {
  const std::string cmd = "HRM_OUT_DIR='" + work_dir().string() + "/default' '" HRM_CLI_PATH "' " + args +
                          " > '" + (work_dir() / "stdout.txt").string() + "' 2> '" +
                          (work_dir() / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return "'" + (work_dir() / name).string() + "'"; }

int line_count(const fs::path& p) {
  std::istringstream in(hrm::read_text_file(p));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) n += line.empty() ? 0 : 1;
  return n;
}

const char* kModel = "--width 8 --heads 2 --cycles 1 --low-steps 2 --max-segments 2 --min-segments 1";

}  // namespace

TEST_CASE("dataset command") {
  REQUIRE(run_cli("dataset --count 6 --clues 6 --seed 3 --out " + path("a.jsonl")) == 0);
  REQUIRE(run_cli("dataset --count 6 --clues 6 --seed 3 --out " + path("b.jsonl")) == 0);
  CHECK(line_count(work_dir() / "a.jsonl") == 6);
  CHECK(hrm::read_text_file(work_dir() / "a.jsonl") == hrm::read_text_file(work_dir() / "b.jsonl"));
  CHECK(fs::exists(work_dir() / "a.jsonl.manifest.json"));

  REQUIRE(run_cli("dataset --count 4 --clues 6 --seed 3 --mix-replicates 2 --out " + path("m.jsonl")) == 0);
  CHECK(line_count(work_dir() / "m.jsonl") == 12);

  REQUIRE(run_cli("dataset --count 3 --clues 6 --seed 3") == 0);
  CHECK(line_count(work_dir() / "default" / "dataset.jsonl") == 3);

  // Impossible clue target, bad flags, unknown subcommand.
  CHECK(run_cli("dataset --box-size 3 --clues 0 --count 1 --out " + path("x.jsonl")) != 0);
  CHECK(run_cli("dataset --count nope") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("dataset --box-size 9") == 2);
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("train, eval and analyze commands") {
  REQUIRE(run_cli("dataset --count 8 --clues 6 --seed 1 --out " + path("train.jsonl")) == 0);
  REQUIRE(run_cli("dataset --count 3 --clues 6 --seed 2 --exclude " + path("train.jsonl") + " --out " +
              path("eval.jsonl")) == 0);
  const std::string train = std::string("train --data ") + path("train.jsonl") + " " + kModel +
                            " --batch-size 4 --warmup 2 --checkpoint-interval 2 --log-interval 1 --seed 5 ";
  REQUIRE(run_cli(train + "--steps 4 --out " + path("run")) == 0);
  CHECK(line_count(work_dir() / "run" / "train_log.jsonl") == 4);
  CHECK(fs::exists(work_dir() / "run" / "ckpt_00000002.bin"));
  CHECK(fs::exists(work_dir() / "run" / "ckpt_00000004.bin"));

  REQUIRE(run_cli(train + "--steps 0 --out " + path("zero")) == 0);
  CHECK(fs::exists(work_dir() / "zero" / "ckpt_00000000.bin"));

  // Resume gives the same final checkpoint.
  fs::create_directories(work_dir() / "resumed");
  fs::copy_file(work_dir() / "run" / "ckpt_00000002.bin", work_dir() / "resumed" / "ckpt_00000002.bin");
  REQUIRE(run_cli(train + "--steps 4 --out " + path("resumed") + " --from-checkpoint " +
              path("resumed/ckpt_00000002.bin")) == 0);
  CHECK(hrm::read_text_file(work_dir() / "resumed" / "ckpt_00000004.bin") ==
        hrm::read_text_file(work_dir() / "run" / "ckpt_00000004.bin"));

  CHECK(run_cli(train + "--steps 4 --out " + path("bad") + " --batch-size 0") != 0);
  CHECK(run_cli("train --data " + path("missing.jsonl") + " --out " + path("bad")) == 1);
  CHECK(run_cli("train") == 2);

  const std::string ckpts = path("run/ckpt_00000002.bin") + " " + path("run/ckpt_00000004.bin");
  REQUIRE(run_cli("eval --data " + path("eval.jsonl") + " --checkpoints " + ckpts + " --mixed-checkpoints " + ckpts +
              " --k 2 --out " + path("report.json") + " --csv " + path("report.csv")) == 0);
  const auto report = nlohmann::json::parse(hrm::read_text_file(work_dir() / "report.json"));
  CHECK(report.at("rows").size() == 7);
  CHECK(line_count(work_dir() / "report.csv") == 8);
  CHECK(hrm::read_text_file(work_dir() / "stderr.txt").find("Baseline") != std::string::npos);
  CHECK(run_cli("eval --data " + path("eval.jsonl")) == 2);
  CHECK(run_cli("eval --data " + path("eval.jsonl") + " --checkpoints " + path("missing.bin")) == 1);

  const std::string ck = " --checkpoint " + path("run/ckpt_00000004.bin") + " --data " + path("eval.jsonl");
  REQUIRE(run_cli("analyze trace" + ck + " --index 1 --out " + path("trace.jsonl")) == 0);
  CHECK(line_count(work_dir() / "trace.jsonl") == 2);
  CHECK(run_cli("analyze trace" + ck + " --index 7") != 0);
  REQUIRE(run_cli("analyze pca" + ck + " --out " + path("pca.csv")) == 0);
  REQUIRE(run_cli("analyze modes" + ck + " --out " + path("modes.json")) == 0);
  CHECK(nlohmann::json::parse(hrm::read_text_file(work_dir() / "modes.json")).is_object());
  REQUIRE(run_cli("analyze basin" + ck + " --out " + path("basin.csv")) == 0);
  CHECK(line_count(work_dir() / "basin.csv") == 41 * 41 + 1);
  REQUIRE(run_cli("analyze landscape" + ck + " --out " + path("land.csv") + " --profile-out " + path("profile.csv")) == 0);
  CHECK(line_count(work_dir() / "land.csv") == 41 * 41 + 1);
  REQUIRE(run_cli("analyze stability" + ck + " --probe one-cell --out " + path("stab.json")) == 0);
  CHECK(nlohmann::json::parse(hrm::read_text_file(work_dir() / "stab.json")).at("probes") == 3);
  CHECK(run_cli("analyze stability" + ck + " --probe sideways") == 2);
  REQUIRE(run_cli("analyze jacobian" + ck + " --iters 5 --out " + path("jac.json")) == 0);
  CHECK(nlohmann::json::parse(hrm::read_text_file(work_dir() / "jac.json")).contains("spectral_norm"));
}

TEST_CASE("pipeline command") {
  REQUIRE(run_cli("pipeline --write-default " + path("default.json")) == 0);
  auto m = nlohmann::json::parse(hrm::read_text_file(work_dir() / "default.json"));
  CHECK(m.contains("model"));
  m["model"]["width"] = 8;
  m["model"]["heads"] = 2;
  m["model"]["n_cycles"] = 1;
  m["model"]["max_segments"] = 2;
  m["train"]["total_steps"] = 2;
  m["train"]["batch_size"] = 2;
  m["train"]["checkpoint_interval"] = 1;
  m["data"]["train_count"] = 4;
  m["data"]["eval_count"] = 2;
  m["data"]["clues"] = 6;
  m["eval"]["relabel_k"] = 2;
  hrm::write_text_file(work_dir() / "small.json", m.dump());
  REQUIRE(run_cli("pipeline --manifest " + path("small.json") + " --out " + path("p1")) == 0);
  REQUIRE(run_cli("pipeline --manifest " + path("small.json") + " --out " + path("p2")) == 0);
  for (const char* f : {"report.json", "analysis.json", "data/eval.jsonl"}) {
    CHECK(hrm::read_text_file(work_dir() / "p1" / f) == hrm::read_text_file(work_dir() / "p2" / f));
  }
  hrm::write_text_file(work_dir() / "broken.json", "{not json");
  CHECK(run_cli("pipeline --manifest " + path("broken.json") + " --out " + path("p3")) != 0);
  fs::remove_all(work_dir());
}
