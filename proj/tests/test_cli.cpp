#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::vector<json> records;
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = std::string(REFINECSP_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty() && line[0] == '{') r.records.push_back(json::parse(line));
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("refinecsp_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kModel =
    " --layers 1 --heads 2 --d-model 8 --domain 10 --p 0.3 --ape 1d --dropout 0";

std::vector<json> of_kind(const Run& r, const std::string& kind) {
  std::vector<json> out;
  for (const auto& j : r.records)
    if (j.value("record", "") == kind) out.push_back(j);
  return out;
}

}  // namespace

TEST_CASE("generate writes datasets and validates arguments") {
  const fs::path dir = scratch("generate");
  const Run g = run("generate --problem coloring --n 20 --count 25 --seed 7 --out " +
                    (dir / "col").string());
  CHECK(g.code == 0);
  REQUIRE(g.records.size() == 1);
  CHECK(g.records[0]["count"] == 25);
  CHECK(g.records[0]["seed"] == 7);
  CHECK(g.records[0].contains("config_hash"));
  for (const auto& [k, v] : g.records[0]["k_histogram"].items()) {
    const int kk = std::stoi(k);
    CHECK((kk >= 3 && kk <= 10));
  }
  CHECK(fs::exists(dir / "col" / "manifest.txt"));

  const Run again = run("generate --problem coloring --n 20 --count 25 --seed 7 --out " +
                        (dir / "col2").string());
  CHECK(slurp(dir / "col" / "instances.txt") == slurp(dir / "col2" / "instances.txt"));

  CHECK(run("generate --problem sudoku --count 0 --seed 1 --out " + (dir / "empty").string())
            .code == 0);
  CHECK(slurp(dir / "empty" / "manifest.txt").find("count=0") != std::string::npos);

  CHECK(run("generate --count 3 --out " + (dir / "x").string()).code == 2);
  CHECK(run("generate --problem bogus --count 3 --out " + (dir / "x").string()).code == 2);
  CHECK(run("generate --problem coloring --count 3 --k-rule clamped --target-k 2 --out " +
            (dir / "x").string())
            .code == 2);
  CHECK(run("frobnicate").code == 2);
}

TEST_CASE("generate uses the data directory environment variable") {
  const fs::path dir = scratch("env");
  const std::string cmd = "env REFINECSP_DATA_DIR=" + dir.string() + " " +
                          std::string(REFINECSP_CLI) +
                          " generate --problem maxcut --n 8 --count 2 --seed 1 >/dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "maxcut" / "manifest.txt"));
}

TEST_CASE("train is deterministic and resumable") {
  const fs::path dir = scratch("train");
  const std::string data = (dir / "d").string();
  REQUIRE(run("generate --problem coloring --n 10 --count 8 --seed 2 --k-rule greedy --out " +
              data)
              .code == 0);
  const std::string common =
      "train --data " + data + kModel + " --epochs 2 --batch 4 --lr 1e-3 --seed 5";
  const Run a = run(common + " --out " + (dir / "a.bin").string());
  const Run b = run(common + " --out " + (dir / "b.bin").string());
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  const auto epochs = of_kind(a, "epoch");
  REQUIRE(epochs.size() == 2);
  for (const auto& e : epochs) {
    CHECK(e["seed"] == 5);
    CHECK(e.contains("config_hash"));
    CHECK(e["loss"].get<double>() >= 0.0);
  }

  const Run one = run("train --data " + data + kModel +
                      " --epochs 1 --batch 4 --seed 5 --out " + (dir / "one.bin").string());
  CHECK(one.code == 0);
  CHECK(of_kind(one, "epoch").size() == 1);
  CHECK(fs::exists(dir / "one.bin"));

  const Run resumed = run("train --data " + data + " --epochs 1 --batch 4 --lr 1e-3 --seed 5 --resume " +
                          (dir / "one.bin").string() + " --out " + (dir / "r.bin").string());
  REQUIRE(resumed.code == 0);
  const auto re = of_kind(resumed, "epoch");
  REQUIRE(re.size() == 1);
  CHECK(re[0]["epoch"] == 2);
  const auto fin = of_kind(resumed, "train");
  REQUIRE(fin.size() == 1);
  CHECK(fin[0]["optimizer_steps"] == 4);

  CHECK(run("train --data " + (dir / "missing").string() + kModel + " --epochs 1 --out " +
            (dir / "m.bin").string())
            .code == 3);
  CHECK(run("train --data " + data + kModel + " --epochs 1 --lr -1 --out " +
            (dir / "m.bin").string())
            .code == 2);
  CHECK(run("train" + kModel + " --epochs 1").code == 2);
}

TEST_CASE("solve reports, summary arithmetic and pool agreement") {
  const fs::path dir = scratch("solve");
  const std::string data = (dir / "d").string();
  REQUIRE(run("generate --problem coloring --n 10 --count 6 --seed 4 --k-rule greedy --out " +
              data)
              .code == 0);
  const std::string w = (dir / "w.bin").string();
  REQUIRE(run("train --data " + data + kModel + " --epochs 1 --batch 6 --seed 1 --out " + w)
              .code == 0);

  const std::string base = "solve --data " + data + " --weights " + w + " --iters 200 --seed 9";
  const Run d = run(base);
  const Run p1 = run(base + " --pool 1");
  REQUIRE(d.code == 0);
  REQUIRE(p1.code == 0);
  const auto di = of_kind(d, "instance"), pi = of_kind(p1, "instance");
  REQUIRE(di.size() == 6);
  REQUIRE(pi.size() == 6);
  int solved = 0;
  for (std::size_t i = 0; i < di.size(); ++i) {
    CHECK(di[i]["feasible"] == pi[i]["feasible"]);
    CHECK(di[i]["iters"] == pi[i]["iters"]);
    CHECK(di[i]["base_seed"] == 9);
    CHECK(di[i]["seed"] == pi[i]["seed"]);
    CHECK(di[i].contains("config_hash"));
    solved += di[i]["feasible"].get<bool>() ? 1 : 0;
  }
  const auto summary = of_kind(d, "summary");
  REQUIRE(summary.size() == 1);
  CHECK(summary[0]["solved_pct"].get<double>() ==
        doctest::Approx(std::round(10000.0 * solved / 6.0) / 100.0));

  CHECK(run(base + " --pool 3 --workers 2").code == 0);

  const std::string sud = (dir / "solved.txt").string();
  std::ofstream(sud) << "534678912672195348198342567859761423426853791713924856961537284287419635"
                        "345286179\n";
  const Run csv = run("solve --sudoku-file " + sud + " --weights " + w + " --format csv");
  CHECK(csv.code == 0);
  CHECK(csv.out.find("instance") != std::string::npos);
  const Run solved_in = run("solve --sudoku-file " + sud + " --weights " + w);
  REQUIRE(solved_in.code == 0);
  const auto si = of_kind(solved_in, "instance");
  REQUIRE(si.size() == 1);
  CHECK(si[0]["iters"] == 0);
  CHECK(si[0]["feasible"] == true);

  CHECK(run("solve --data " + data + " --weights " + (dir / "nope.bin").string()).code == 3);
  std::ofstream(dir / "junk.bin") << "not a checkpoint";
  CHECK(run("solve --data " + data + " --weights " + (dir / "junk.bin").string()).code == 3);
}

TEST_CASE("baselines and gradient check") {
  const fs::path dir = scratch("baseline");
  const std::string data = (dir / "d").string();
  REQUIRE(run("generate --problem coloring --n 15 --count 3 --seed 4 --out " + data).code == 0);
  const Run g = run("baseline --method greedy --data " + data);
  REQUIRE(g.code == 0);
  const auto recs = of_kind(g, "instance");
  REQUIRE(recs.size() == 3);
  for (const auto& r : recs) CHECK(r.contains("kprime"));

  const std::string sud = (dir / "full.txt").string();
  std::ofstream(sud) << "534678912672195348198342567859761423426853791713924856961537284287419635"
                        "345286179\n";
  const Run s = run("baseline --method sgd --steps 10 --sudoku-file " + sud);
  REQUIRE(s.code == 0);
  const auto sr = of_kind(s, "instance");
  REQUIRE(sr.size() == 1);
  CHECK(sr[0]["satisfied"] == 27);

  const Run gc = run("gradcheck --seed 1");
  CHECK(gc.code == 0);
  CHECK(of_kind(gc, "gradcheck").size() > 20);
  CHECK(run("gradcheck --tol 1e-30").code == 4);
}
