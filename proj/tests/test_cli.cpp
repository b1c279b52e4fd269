#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::path(TEMPO_META_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + TEMPO_META_CLI + "\" " + args + " > \"" +
                          (kWork / "last_stdout.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string last_output() { return slurp(kWork / "last_stdout.txt"); }

std::string p(const std::string& rel) { return "\"" + (kWork / rel).string() + "\""; }

// Small dataset and config shared by the cases below; built once.
struct Fixture {
  Fixture() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    REQUIRE(run("synth --entities 30 --relations 3 --groups 3 --timestamps 12 "
                "--facts-per-snapshot 25 --seed 7 --out " + p("data")) == 0);
    std::ofstream cfg(kWork / "small.cfg");
    cfg << "alpha = 0.5\nbeta = 0.2\ndim = 6\nepochs = 2\ntest_steps = 1\n";
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("synth writes a parseable file and a rules sidecar") {
  fixture();
  std::ifstream in(kWork / "data" / "data.txt");
  const auto parsed = tempo_meta::parse_quadruples(in, 1);
  const auto kg = tempo_meta::build_temporal_kg(parsed.quads);
  CHECK(kg.num_timestamps() == 12);
  const json rules = json::parse(slurp(kWork / "data" / "rules.json"));
  CHECK(rules.at("changepoint") == 10);
  CHECK(rules.at("regime_a").is_array());

  REQUIRE(run("synth --entities 30 --relations 3 --groups 3 --timestamps 12 "
              "--facts-per-snapshot 25 --seed 7 --out " + p("data_again")) == 0);
  CHECK(slurp(kWork / "data" / "data.txt") == slurp(kWork / "data_again" / "data.txt"));
  CHECK(slurp(kWork / "data" / "rules.json") == slurp(kWork / "data_again" / "rules.json"));
}

TEST_CASE("train writes the run directory and eval reads it back") {
  fixture();
  REQUIRE(run("train --data " + p("data/data.txt") + " --config " + p("small.cfg") + " --out " +
              p("run")) == 0);
  for (const char* f : {"manifest.json", "config.cfg", "theta.ckpt", "theta_prev.ckpt",
                        "gates.bin", "loss_log.csv"}) {
    CHECK_MESSAGE(fs::exists(kWork / "run" / f), f);
  }
  const json manifest = json::parse(slurp(kWork / "run" / "manifest.json"));
  CHECK(manifest.at("mode") == "meta");
  CHECK(manifest.at("seed") == 0);
  CHECK(manifest.at("dataset").contains("fingerprint"));

  REQUIRE(run("eval --run " + p("run") + " --test-steps 3 --buckets period history --periods 2") ==
          0);
  const json report = json::parse(slurp(kWork / "run" / "eval_meta" / "report.json"));
  CHECK(report.at("test_steps") == 3);
  CHECK(report.at("periods").size() == 2);
  CHECK(report.at("history").size() == 4);
  CHECK(report.at("overall").at("mrr").get<double>() > 0.0);
  const std::string ranks = slurp(kWork / "run" / "eval_meta" / "ranks.csv");
  CHECK(ranks.rfind("t,subject,relation,direction,gold,rank\n", 0) == 0);
}

TEST_CASE("train and eval are byte-for-byte deterministic") {
  fixture();
  const std::string train = "train --data " + p("data/data.txt") + " --config " +
                            p("small.cfg") + " --out " + p("det");
  const std::string eval = "eval --run " + p("det") + " --buckets period history --periods 2";
  const char* files[] = {"det/theta.ckpt", "det/theta_prev.ckpt", "det/gates.bin",
                         "det/loss_log.csv", "det/manifest.json", "det/eval_meta/ranks.csv",
                         "det/eval_meta/report.json", "det/eval_meta/manifest.json"};
  REQUIRE(run(train) == 0);
  REQUIRE(run(eval) == 0);
  std::vector<std::string> first;
  for (const char* f : files) first.push_back(slurp(kWork / f));
  REQUIRE(run(train) == 0);
  REQUIRE(run(eval) == 0);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK_MESSAGE(slurp(kWork / files[i]) == first[i], files[i]);
    CHECK(!first[i].empty());
  }
}

TEST_CASE("plain runs and cross-mode evaluation") {
  fixture();
  REQUIRE(run("train --mode plain --data " + p("data/data.txt") + " --config " + p("small.cfg") +
              " --out " + p("plain")) == 0);
  CHECK_FALSE(fs::exists(kWork / "plain" / "gates.bin"));
  REQUIRE(run("eval --run " + p("plain")) == 0);
  CHECK(json::parse(slurp(kWork / "plain" / "eval_plain" / "report.json")).at("mode") == "plain");
  REQUIRE(run("eval --run " + p("plain") + " --mode finetune --test-steps 2") == 0);
  CHECK(fs::exists(kWork / "plain" / "eval_finetune" / "ranks.csv"));
  // A plain run has no gates, so meta evaluation must refuse.
  CHECK(run("eval --run " + p("plain") + " --mode meta") != 0);
  CHECK(last_output().find("error:") != std::string::npos);
}

TEST_CASE("ablate reports three variants") {
  fixture();
  REQUIRE(run("ablate --data " + p("data/data.txt") + " --config " + p("small.cfg") +
              " --seeds 0,1 --out " + p("abl")) == 0);
  const json table = json::parse(slurp(kWork / "abl" / "ablation.json"));
  REQUIRE(table.at("rows").size() == 3);
  CHECK(table.at("rows")[0].at("variant") == "MetaTKG");
  CHECK(table.at("rows")[1].at("variant") == "MetaTKG-G");
  CHECK(table.at("rows")[2].at("variant") == "MetaTKG-C");
  for (const auto& row : table.at("rows")) {
    for (const char* m : {"mrr", "hits1", "hits3", "hits10"}) CHECK(row.contains(m));
  }
  // No-gate keeps its gates at zero; shared-gate logs one value for all three.
  std::istringstream nog(slurp(kWork / "abl" / "loss_log_no-gate_seed0.csv"));
  std::istringstream shared(slurp(kWork / "abl" / "loss_log_shared-gate_seed0.csv"));
  std::string line;
  std::getline(nog, line);
  std::getline(shared, line);
  int rows = 0;
  while (std::getline(nog, line)) {
    CHECK(line.substr(line.rfind(',', line.rfind(',', line.rfind(',') - 1) - 1)) == ",0,0,0");
    ++rows;
  }
  CHECK(rows > 0);
  while (std::getline(shared, line)) {
    std::vector<std::string> cols;
    std::stringstream s(line);
    for (std::string c; std::getline(s, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 7);
    CHECK(cols[4] == cols[5]);
    CHECK(cols[5] == cols[6]);
  }
}

TEST_CASE("gradcheck passes") {
  fixture();
  CHECK(run("gradcheck --seed 0") == 0);
  CHECK(last_output().find("PASS") != std::string::npos);
}

TEST_CASE("bad inputs fail cleanly without output") {
  fixture();
  CHECK(run("train --data " + p("missing.txt") + " --out " + p("never")) != 0);
  CHECK(last_output().find("error:") != std::string::npos);
  CHECK_FALSE(fs::exists(kWork / "never"));

  {
    std::ofstream bad(kWork / "bad.txt");
    bad << "0 0 1 0\n0 0 oops 1\n";
  }
  CHECK(run("train --data " + p("bad.txt") + " --out " + p("never")) != 0);
  CHECK(last_output().find("line 2") != std::string::npos);
  CHECK_FALSE(fs::exists(kWork / "never"));

  {
    std::ofstream cfg(kWork / "bad.cfg");
    cfg << "alpha = 0.1\nmystery = 3\n";
  }
  CHECK(run("train --data " + p("data/data.txt") + " --config " + p("bad.cfg") + " --out " +
            p("never")) != 0);
  CHECK_FALSE(fs::exists(kWork / "never"));
  CHECK(run("eval --run " + p("never")) != 0);
}
