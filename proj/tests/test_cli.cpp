#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(QAMATCH_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path kRoot = fs::temp_directory_path() / "qamatch_cli_test";
const std::string kSmall =
    "--set dim=4 --set n_max_labeled=20 --set n_max_unlabeled=60 --set gamma_labeled=4 --set gamma_unlabeled=4 "
    "--set n_validation=30 --set n_test=30";
const std::string kQuick = "--set hidden=8 --set iterations=40 --set eval_interval=10 --set labeled_batch=8 --set unlabeled_batch=8";

std::string dir(const char* name) { return (kRoot / name).string(); }

void generate_small(const char* name) {
  const auto r = run("generate " + kSmall + " --seed 3 --out " + dir(name));
  REQUIRE_MESSAGE(r.code == 0, r.out);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("setup") {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }

  TEST_CASE("generate, train, eval and report end to end") {
    generate_small("data");
    for (const char* f : {"train.jsonl", "validation.jsonl", "test.jsonl", "unlabeled_truth.tsv", "manifest.json"})
      CHECK(fs::exists(kRoot / "data" / f));

    auto r = run("train --data " + dir("data") + " " + kQuick + " --out " + dir("run"));
    REQUIRE_MESSAGE(r.code == 0, r.out);
    for (const char* f : {"model.qam", "report.jsonl", "manifest.json"}) CHECK(fs::exists(kRoot / "run" / f));

    const auto manifest = json::parse(slurp(kRoot / "run" / "manifest.json"));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["config"]["iterations"] == "40");
    CHECK(manifest["artifacts"]["model.qam"].get<std::string>().size() == 64);
    CHECK(manifest.contains("input_checksums"));

    r = run("eval --model " + dir("run") + "/model.qam --data " + dir("data") + "/test.jsonl");
    REQUIRE_MESSAGE(r.code == 0, r.out);
    const auto metrics = json::parse(r.out);
    CHECK(metrics["examples"] == 30);
    CHECK(metrics["confusion_matrix"].size() == 3);

    r = run("report " + dir("run") + "/report.jsonl " + dir("run") + "/report.jsonl --json");
    REQUIRE_MESSAGE(r.code == 0, r.out);
    bool found = false;
    for (const auto& row : json::parse(r.out))
      if (row["metric"] == "val_accuracy") found = row["runs"] == 2 && row["std"] == 0.0;
    CHECK(found);
    r = run("report " + dir("run") + "/report.jsonl");
    CHECK(r.code == 0);
    CHECK(r.out.find("val_accuracy") != std::string::npos);
  }

  TEST_CASE("same seed gives byte-identical artifacts and replay verifies them") {
    generate_small("det_data");
    const auto train = "train --data " + dir("det_data") + " " + kQuick + " --seed 5 --out ";
    REQUIRE(run(train + dir("det_a")).code == 0);
    REQUIRE(run(train + dir("det_b")).code == 0);
    CHECK(slurp(kRoot / "det_a" / "model.qam") == slurp(kRoot / "det_b" / "model.qam"));
    CHECK(slurp(kRoot / "det_a" / "report.jsonl") == slurp(kRoot / "det_b" / "report.jsonl"));

    auto r = run("train --replay " + dir("det_a") + "/manifest.json --out " + dir("det_replay"));
    CHECK_MESSAGE(r.code == 0, r.out);
    CHECK(r.out.find("replay reproduced") != std::string::npos);

    r = run("generate --replay " + dir("det_data") + "/manifest.json --out " + dir("det_data_replay"));
    CHECK_MESSAGE(r.code == 0, r.out);
    CHECK(slurp(kRoot / "det_data" / "train.jsonl") == slurp(kRoot / "det_data_replay" / "train.jsonl"));

    std::ofstream(kRoot / "det_data" / "validation.jsonl", std::ios::app) << "\n";
    r = run("train --replay " + dir("det_a") + "/manifest.json --out " + dir("det_replay2"));
    CHECK(r.code == 3);
  }

  TEST_CASE("existing outputs are kept unless forced") {
    generate_small("force");
    CHECK(run("generate " + kSmall + " --out " + dir("force")).code == 2);
    CHECK(run("generate " + kSmall + " --out " + dir("force") + " --force").code == 0);
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("train --set no_such_key=1 --print-config").code == 2);
    CHECK(run("train --set beta=2 --data " + dir("data") + " --out " + dir("bad_beta")).code == 2);
    CHECK(run("train --ablate everything --print-config").code == 2);
    CHECK(run("generate --preset nonexistent --print-config").code == 2);
  }

  TEST_CASE("data errors exit 3") {
    CHECK(run("eval --model " + dir("data") + "/train.jsonl --data " + dir("data") + "/test.jsonl").code == 3);
    CHECK(run("train --train " + dir("missing") + "/train.jsonl --out " + dir("missing_out")).code == 3);
    fs::create_directories(kRoot / "corrupt");
    std::ofstream(kRoot / "corrupt" / "train.jsonl") << "{\"format\":\"qamatch-dataset\"}\n";
    CHECK(run("train --train " + dir("corrupt") + "/train.jsonl " + kQuick + " --out " + dir("corrupt_out")).code == 3);
  }

  TEST_CASE("divergence exits 4 and leaves a snapshot") {
    const auto r = run("train --data " + dir("data") + " " + kQuick + " --set learning_rate=1e200 --out " + dir("diverged"));
    CHECK(r.code == 4);
    REQUIRE(fs::exists(kRoot / "diverged" / "divergence.json"));
    const auto snap = json::parse(slurp(kRoot / "diverged" / "divergence.json"));
    CHECK(snap.contains("iteration"));
    CHECK(snap.contains("lambda"));
  }

  TEST_CASE("settings precedence: config file, then --set, then flags") {
    std::ofstream(kRoot / "prec.conf") << "beta = 0.9\ntemperature = 0.25\nseed = 1\n";
    const auto r = run("train --config " + (kRoot / "prec.conf").string() +
                       " --set beta=0.5 --seed 9 --ablate softmix --supervised-only --print-config");
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(r.out.find("beta = 0.5\n") != std::string::npos);
    CHECK(r.out.find("temperature = 0.25\n") != std::string::npos);
    CHECK(r.out.find("seed = 9\n") != std::string::npos);
    CHECK(r.out.find("softmix = false\n") != std::string::npos);
    CHECK(r.out.find("use_unlabeled = false\n") != std::string::npos);
    CHECK(r.out.find("alpha = 0.75\n") != std::string::npos);
  }

  TEST_CASE("presets resolve and explicit settings win") {
    auto r = run("generate --preset longtail-3 --print-config");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("n_max_labeled = 43\n") != std::string::npos);
    CHECK(r.out.find("n_max_unlabeled = 1413\n") != std::string::npos);
    r = run("generate --preset longtail-3 --set dim=8 --print-config");
    CHECK(r.out.find("dim = 8\n") != std::string::npos);
  }

  TEST_CASE("shipped acceptance config loads") {
    const auto r = run(std::string("train --config ") + QAMATCH_CONFIG_DIR "/longtail-3.train.conf --print-config");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("normalize_weights = true\n") != std::string::npos);
  }

  TEST_CASE("cleanup") { fs::remove_all(kRoot); }
}
