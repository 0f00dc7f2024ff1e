#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "wtraffic_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(WTRAFFIC_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& name) { return (kDir / name).string(); }

std::string data(const std::string& name) { return (fs::path(WTRAFFIC_DATA_DIR) / name).string(); }

bool same_bytes(const std::string& a, const std::string& b) {
  return fs::exists(a) && fs::exists(b) && oracle::file_bytes(a) == oracle::file_bytes(b);
}

}  // namespace

TEST_CASE("CLI commands are deterministic end to end") {
  fs::remove_all(kDir);
  fs::create_directories(kDir);
  const std::string scenario = data("default_scenario.json");

  REQUIRE(run("generate --scenario " + scenario + " --seed 5 --out " + p("g1")) == 0);
  REQUIRE(run("generate --scenario " + scenario + " --seed 5 --out " + p("g2")) == 0);
  CHECK(same_bytes(p("g1/trace_000.csi"), p("g2/trace_000.csi")));
  CHECK(same_bytes(p("g1/trace_000.labels.jsonl"), p("g2/trace_000.labels.jsonl")));
  REQUIRE(run("generate --scenario " + scenario + " --seed 6 --out " + p("g3")) == 0);
  CHECK_FALSE(same_bytes(p("g1/trace_000.csi"), p("g3/trace_000.csi")));

  const std::string detect = "detect --trace " + p("g1/trace_000.csi") + " --labels " + p("g1/trace_000.labels.jsonl");
  REQUIRE(run(detect + " --out " + p("e1/trace_000.jsonl")) == 0);
  REQUIRE(run(detect + " --out " + p("e2/trace_000.jsonl")) == 0);
  CHECK(same_bytes(p("e1/trace_000.jsonl"), p("e2/trace_000.jsonl")));
  CHECK(same_bytes(p("e1/trace_000.jsonl.bin"), p("e2/trace_000.jsonl.bin")));

  const std::string train = "train --events " + p("e1") + " --epochs 2 --seed 3 --out ";
  REQUIRE(run(train + p("m1.wtcn")) == 0);
  REQUIRE(run(train + p("m2.wtcn")) == 0);
  CHECK(same_bytes(p("m1.wtcn"), p("m2.wtcn")));
  // One trace holds too few lane-1 events per class for a stratified split.
  CHECK(run("train --events " + p("e1") + " --lane 1 --epochs 1 --out " + p("lane1.wtcn")) == 2);
  REQUIRE(run("generate --scenario " + scenario + " --seed 5 --count 3 --out " + p("g4")) == 0);
  for (const std::string t : {"trace_000", "trace_001", "trace_002"}) {
    REQUIRE(run("detect --trace " + p("g4/" + t + ".csi") + " --labels " + p("g4/" + t + ".labels.jsonl") + " --out " + p("e4/" + t + ".jsonl")) == 0);
  }
  REQUIRE(run("train --events " + p("e4") + " --lane 1 --epochs 1 --out " + p("lane1.wtcn")) == 0);

  const std::string classify = "classify --events " + p("e1") + " --model " + p("m1.wtcn") + " --out ";
  REQUIRE(run(classify + p("c1.jsonl")) == 0);
  REQUIRE(run(classify + p("c2.jsonl")) == 0);
  CHECK(same_bytes(p("c1.jsonl"), p("c2.jsonl")));
  REQUIRE(run(classify + p("fused.jsonl") + " --model2 " + p("lane1.wtcn") + " --fuse max-prob") == 0);
  REQUIRE(run("classify --events " + p("e1") + " --knn-train " + p("e1") + " --k 1 --out " + p("knn.jsonl")) == 0);

  for (const std::string scheme : {"five", "sml", "car_truck"}) {
    const std::string eval = "evaluate --pred " + p("c1.jsonl") + " --truth " + p("g1") + " --scheme " + scheme + " --repeat 20 --report ";
    REQUIRE(run(eval + p("r1_" + scheme + ".json")) == 0);
    REQUIRE(run(eval + p("r2_" + scheme + ".json")) == 0);
    CHECK(same_bytes(p("r1_" + scheme + ".json"), p("r2_" + scheme + ".json")));
  }
  REQUIRE(run("evaluate --pred " + p("knn.jsonl") + " --truth " + p("g1/trace_000.labels.jsonl") + " --report " + p("knn.json")) == 0);
  CHECK(oracle::file_bytes(p("knn.json")).find("\"classification_accuracy\": 1.0") != std::string::npos);

  REQUIRE(run("preprocess --trace " + p("g1/trace_000.csi") + " --pca-k 2 --out " + p("s.csv")) == 0);
  REQUIRE(run("plot --series " + p("s.csv") + " --out " + p("s.svg")) == 0);
  CHECK(oracle::file_bytes(p("s.svg")).starts_with("<svg"));
  CHECK(oracle::file_bytes(p("s.csv")).starts_with("time_s,pair0_pc1,pair0_pc2,pair1_pc1"));
}

TEST_CASE("CLI exit codes") {
  fs::create_directories(kDir);
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("generate --out " + p("x")) == 1);
  CHECK(run("evaluate --pred " + p("none.jsonl") + " --truth " + p("none") + " --report " + p("r.json")) == 1);

  { std::ofstream(p("bad.csi")) << "XXXX not a trace"; }
  CHECK(run("detect --trace " + p("bad.csi") + " --out " + p("bad.jsonl")) == 2);

  REQUIRE(run("generate --scenario " + data("default_scenario.json") + " --seed 9 --out " + p("gd")) == 0);
  REQUIRE(run("detect --trace " + p("gd/trace_000.csi") + " --labels " + p("gd/trace_000.labels.jsonl") + " --out " + p("ed/t.jsonl")) == 0);
  CHECK(run("train --events " + p("ed") + " --epochs 4 --lr 1e300 --out " + p("div.wtcn")) == 3);
}
