#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <queue>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "refinecsp/csp.hpp"
#include "refinecsp/data.hpp"
#include "refinecsp/error.hpp"
#include "refinecsp/model.hpp"
#include "refinecsp/solve.hpp"
#include "refinecsp/train.hpp"

using namespace refinecsp;
namespace fs = std::filesystem;

namespace {

bool connected(const WeightedGraph& g) {
  const auto adj = g.adjacency();
  std::vector<bool> seen(g.vertex_count(), false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
  }
  return count == g.vertex_count();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::invalid_argument;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("refinecsp_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.domain_size = 5;
  return cfg;
}

}  // namespace

TEST_CASE("Erdos-Renyi extremes and density") {
  Rng rng(1);
  CHECK(gen_erdos_renyi(10, 1.0, rng).edge_count() == 45);
  CHECK(gen_erdos_renyi(10, 0.0, rng).edge_count() == 0);
  double density = 0.0;
  for (int t = 0; t < 1000; ++t) density += gen_erdos_renyi(12, 0.2, rng).edge_count() / 66.0;
  CHECK(std::fabs(density / 1000.0 - 0.2) < 0.02);
}

TEST_CASE("Barabasi-Albert growth") {
  Rng rng(2);
  for (std::size_t m = 1; m <= 5; ++m)
    for (std::size_t n : {m + 1, m + 4, std::size_t{30}}) {
      const WeightedGraph g = gen_barabasi_albert(n, m, rng);
      CHECK(g.edge_count() == m * (m - 1) / 2 + (n - m) * m);
      CHECK(connected(g));
      if (n == m + 1) CHECK(g.edge_count() == n * (n - 1) / 2);
    }
  CHECK(kind_of([&] { gen_barabasi_albert(3, 3, rng); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { gen_barabasi_albert(3, 0, rng); }) == ErrorKind::invalid_argument);
}

TEST_CASE("geometric extremes") {
  Rng rng(3);
  CHECK(gen_geometric(15, 0.0, rng).edge_count() == 0);
  CHECK(gen_geometric(15, std::sqrt(2.0), rng).edge_count() == 105);
}

TEST_CASE("generators are deterministic per seed") {
  Rng a(4), b(4);
  CHECK(gen_barabasi_albert(40, 3, a) == gen_barabasi_albert(40, 3, b));
  CHECK(gen_geometric(40, 0.2, a) == gen_geometric(40, 0.2, b));
}

TEST_CASE("color count rule") {
  CHECK(colors_from_greedy(6) == 5);
  CHECK(colors_from_greedy(12) == 10);
  CHECK(colors_from_greedy(3) == 3);
  for (int k = 1; k < 30; ++k) {
    const int c = colors_from_greedy(k);
    CHECK((c >= 3 && c <= 10));
  }
}

TEST_CASE("coloring dataset manifest and satisfiability at k = k'") {
  ColoringGenParams params;
  params.vertices = 20;
  const Dataset ds = gen_coloring_dataset(30, params, 5);
  CHECK(ds.size() == 30);
  CHECK(ds.manifest.count == 30);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    CHECK((r.colors >= 3 && r.colors <= 10));
    CHECK(r.colors == colors_from_greedy(r.greedy_colors));
    CHECK(ds.manifest.colors[i] == r.colors);
    CHECK(r.greedy_colors == greedy_coloring(*r.graph).colors_used);
  }

  params.colors_equal_greedy = true;
  const Dataset eq = gen_coloring_dataset(20, params, 6);
  for (const auto& r : eq.records) {
    CHECK(r.colors == r.greedy_colors);
    CHECK(is_feasible(r.instance, greedy_coloring(*r.graph).colors));
  }

  params.colors_equal_greedy = false;
  params.target_colors = 4;
  for (const auto& r : gen_coloring_dataset(10, params, 7).records) CHECK(r.colors == 4);
  params.target_colors = 2;
  CHECK(kind_of([&] { gen_coloring_dataset(1, params, 7); }) == ErrorKind::invalid_argument);

  const Dataset again = gen_coloring_dataset(30, ColoringGenParams{20}, 5);
  CHECK(format_manifest(again.manifest) == format_manifest(ds.manifest));
}

TEST_CASE("nurse dataset") {
  CHECK(gen_nurse_dataset(0, 3, 3, 3, 10, 1).size() == 0);
  const Dataset ds = gen_nurse_dataset(5, 4, 3, 2, 8, 2);
  for (const auto& r : ds.records) {
    CHECK(r.nurse == std::array<int, 4>{4, 3, 2, 8});
    CHECK(r.instance.fixed_count() == 0);
    REQUIRE(r.initial.has_value());
    CHECK_NOTHROW(validate_assignment(r.instance, *r.initial));
    std::vector<bool> works(8, false);
    for (int v : *r.initial) works[v] = true;
    for (bool b : works) CHECK(b);
  }
}

TEST_CASE("generated Sudoku solutions and puzzles") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto sol = gen_sudoku_solution(rng);
    CHECK(oracle::sudoku_grid_valid(std::vector<int>(sol.begin(), sol.end())));
    const auto puzzle = make_sudoku_puzzle(sol, 33, rng);
    int blanks = 0;
    for (int c = 0; c < 81; ++c) {
      if (puzzle[c])
        CHECK(*puzzle[c] == sol[c]);
      else
        ++blanks;
    }
    CHECK(blanks == 33);
  }
}

TEST_CASE("Sudoku text parsing") {
  const auto fives = parse_sudoku_text(std::string(81, '5') + "\n");
  REQUIRE(fives.size() == 1);
  CHECK(build_sudoku(fives[0]).fixed_count() == 81);
  CHECK(*fives[0][0] == 4);
  const auto blanks = parse_sudoku_text(std::string(81, '0') + "\n" + std::string(81, '.'));
  REQUIRE(blanks.size() == 2);
  CHECK(build_sudoku(blanks[0]).fixed_count() == 0);
  CHECK(build_sudoku(blanks[1]).fixed_count() == 0);
  CHECK(sudoku_line(fives[0]) == std::string(81, '5'));

  try {
    parse_sudoku_text(std::string(81, '1') + "\n" + std::string(80, '1') + "\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(kind_of([] { parse_sudoku_text(std::string(80, '1') + "x"); }) == ErrorKind::format);
}

TEST_CASE("GSET parsing and round trip") {
  const WeightedGraph g = parse_gset("3 2\n1 2 1\n2 3 1\n");
  CHECK(g.vertex_count() == 3);
  CHECK(g.edge_count() == 2);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 2));
  CHECK_FALSE(g.has_edge(0, 2));
  CHECK(kind_of([] { parse_gset("3 3\n1 2 1\n2 3 1\n"); }) == ErrorKind::format);
  CHECK(kind_of([] { parse_gset("3 1\n1 4 1\n"); }) == ErrorKind::format);

  const std::string text = "5 4\n1 2 1\n1 3 -1\n2 5 3\n4 5 1\n";
  const WeightedGraph w = parse_gset(text);
  CHECK(format_gset(w) == text);
  const fs::path dir = scratch("gset");
  save_gset(w, dir / "g.txt");
  CHECK(read_file(dir / "g.txt") == text);
  CHECK(load_gset(dir / "g.txt") == w);
}

TEST_CASE("dataset files round trip") {
  const fs::path dir = scratch("datasets");
  ColoringGenParams params;
  params.vertices = 15;
  const Dataset col = gen_coloring_dataset(8, params, 3);
  save_dataset(col, dir / "col");
  const Dataset back = load_dataset(dir / "col");
  REQUIRE(back.size() == col.size());
  for (std::size_t i = 0; i < col.size(); ++i) {
    CHECK(*back.records[i].graph == *col.records[i].graph);
    CHECK(back.records[i].colors == col.records[i].colors);
    CHECK(back.records[i].greedy_colors == col.records[i].greedy_colors);
  }
  CHECK(format_manifest(back.manifest) == format_manifest(col.manifest));

  const Dataset nurse = gen_nurse_dataset(3, 2, 3, 2, 6, 4);
  save_dataset(nurse, dir / "nurse");
  const Dataset nb = load_dataset(dir / "nurse");
  for (std::size_t i = 0; i < 3; ++i) CHECK(*nb.records[i].initial == *nurse.records[i].initial);

  const Dataset sud = gen_sudoku_dataset(4, 30, 5);
  save_dataset(sud, dir / "sudoku");
  const Dataset sb = load_dataset(dir / "sudoku");
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t v = 0; v < 81; ++v)
      CHECK(sb.records[i].instance.fixed(v) == sud.records[i].instance.fixed(v));

  const Dataset empty = gen_maxcut_dataset(0, 10, 0.3, 1);
  save_dataset(empty, dir / "empty");
  CHECK(load_dataset(dir / "empty").size() == 0);

  CHECK(kind_of([&] { load_dataset(dir / "missing"); }) == ErrorKind::io);
}

TEST_CASE("checkpoint round trip and corruption") {
  Rng rng(9);
  Checkpoint ck{init_weights(small_model(), rng), std::nullopt, 3};
  OptimizerState st = init_optimizer(ck.weights);
  st.step = 17;
  st.first_moment[0][0] = 0.125;
  ck.optimizer = st;
  const std::string bytes = serialize_checkpoint(ck);
  CHECK(std::string(bytes.data(), 8) == std::string(kWeightsMagic, 8));

  const Checkpoint back = deserialize_checkpoint(bytes, small_model());
  CHECK(back.epochs_done == 3);
  CHECK(back.weights.config == ck.weights.config);
  const auto pa = ck.weights.parameters(), pb = back.weights.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(std::memcmp(pa[i].tensor.values().data(), pb[i].tensor.values().data(),
                      pa[i].tensor.size() * sizeof(double)) == 0);
  }
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step == 17);
  CHECK(back.optimizer->first_moment[0][0] == 0.125);
  CHECK(serialize_checkpoint(back) == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of([&] { deserialize_checkpoint(bad); }) == ErrorKind::format);
  std::string version = bytes;
  version[8] = 9;
  CHECK(kind_of([&] { deserialize_checkpoint(version); }) == ErrorKind::incompatible);
  CHECK(kind_of([&] { deserialize_checkpoint(bytes.substr(0, bytes.size() - 5)); }) ==
        ErrorKind::format);
  CHECK(kind_of([&] { deserialize_checkpoint(bytes + "x"); }) == ErrorKind::format);
  ModelConfig other = small_model();
  other.layers = 3;
  CHECK(kind_of([&] { deserialize_checkpoint(bytes, other); }) == ErrorKind::incompatible);

  const fs::path dir = scratch("weights");
  save_weights(ck, dir / "w.bin");
  CHECK(read_file(dir / "w.bin") == bytes);
  CHECK(load_weights(dir / "w.bin").epochs_done == 3);
  CHECK(kind_of([&] { load_weights(dir / "none.bin"); }) == ErrorKind::io);
}
