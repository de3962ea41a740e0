#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "refinecsp.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("refinecsp_test_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

rcsp_model_config toy_config(int domain) {
  rcsp_model_config cfg;
  rcsp_model_config_default(&cfg);
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.domain_size = domain;
  cfg.selection_p = 0.5;
  cfg.ape = RCSP_APE_1D;
  cfg.dropout = 0.0;
  return cfg;
}

rcsp_graph* triangle() {
  rcsp_graph* g = nullptr;
  REQUIRE(rcsp_graph_create(3, &g) == RCSP_OK);
  REQUIRE(rcsp_graph_add_edge(g, 0, 1, 1.0) == RCSP_OK);
  REQUIRE(rcsp_graph_add_edge(g, 1, 2, 1.0) == RCSP_OK);
  REQUIRE(rcsp_graph_add_edge(g, 0, 2, 1.0) == RCSP_OK);
  return g;
}

struct EpochLog {
  std::vector<int> epochs;
  std::vector<double> losses;
};

void log_epoch(int epoch, double loss, double, void* user) {
  auto* log = static_cast<EpochLog*>(user);
  log->epochs.push_back(epoch);
  log->losses.push_back(loss);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("version, status names and error reporting") {
  CHECK(std::string(rcsp_version()).size() > 0);
  CHECK(std::string(rcsp_status_name(RCSP_ERR_FORMAT)).size() > 0);
  rcsp_graph* g = nullptr;
  REQUIRE(rcsp_graph_create(2, &g) == RCSP_OK);
  CHECK(rcsp_graph_add_edge(g, 1, 1, 1.0) != RCSP_OK);
  CHECK(std::string(rcsp_last_error()).size() > 0);
  CHECK(rcsp_graph_add_edge(g, 0, 5, 1.0) != RCSP_OK);
  CHECK(rcsp_graph_add_edge(g, 0, 1, 2.5) == RCSP_OK);
  CHECK(std::string(rcsp_last_error()).empty());
  size_t u = 9, v = 9;
  double w = 0;
  CHECK(rcsp_graph_edge(g, 0, &u, &v, &w) == RCSP_OK);
  CHECK(u == 0);
  CHECK(v == 1);
  CHECK(w == 2.5);
  CHECK(rcsp_graph_edge(g, 1, &u, &v, &w) == RCSP_ERR_OUT_OF_RANGE);
  CHECK(rcsp_graph_create(2, nullptr) == RCSP_ERR_INVALID_ARGUMENT);
  rcsp_graph_free(g);
  rcsp_graph_free(nullptr);
  CHECK(rcsp_derive_seed(1, 2) == rcsp_derive_seed(1, 2));
  CHECK(rcsp_derive_seed(1, 2) != rcsp_derive_seed(1, 3));
}

TEST_CASE("instances and evaluation") {
  std::vector<int> givens(81, -1);
  givens[0] = 3;
  rcsp_instance* s = nullptr;
  REQUIRE(rcsp_instance_sudoku(givens.data(), &s) == RCSP_OK);
  CHECK(rcsp_instance_variable_count(s) == 81);
  CHECK(rcsp_instance_constraint_count(s) == 27);
  CHECK(rcsp_instance_fixed_count(s) == 1);
  CHECK(rcsp_instance_domain_size(s) == 9);
  givens[1] = 9;
  rcsp_instance* bad = nullptr;
  CHECK(rcsp_instance_sudoku(givens.data(), &bad) != RCSP_OK);
  CHECK(bad == nullptr);
  rcsp_instance_free(s);

  rcsp_graph* g = triangle();
  rcsp_instance* k2 = nullptr;
  REQUIRE(rcsp_instance_coloring(g, 2, &k2) == RCSP_OK);
  int feasible = 0;
  for (int mask = 0; mask < 8; ++mask) {
    const int a[3] = {mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
    rcsp_evaluation ev;
    REQUIRE(rcsp_instance_evaluate(k2, a, 3, &ev) == RCSP_OK);
    feasible += ev.feasible;
    CHECK(ev.constraints == 3);
  }
  CHECK(feasible == 0);
  const int wrong[2] = {0, 1};
  rcsp_evaluation ev;
  CHECK(rcsp_instance_evaluate(k2, wrong, 2, &ev) == RCSP_ERR_SHAPE);
  rcsp_instance_free(k2);

  rcsp_instance* mc = nullptr;
  REQUIRE(rcsp_instance_maxcut(g, &mc) == RCSP_OK);
  CHECK(rcsp_instance_is_maximization(mc) == 1);
  const int part[3] = {0, 1, 1};
  double cut = 0;
  CHECK(rcsp_graph_cut_value(g, part, 3, &cut) == RCSP_OK);
  CHECK(cut == 2.0);
  rcsp_instance_free(mc);

  rcsp_instance* nurse = nullptr;
  REQUIRE(rcsp_instance_nurse(10, 3, 3, 10, &nurse) == RCSP_OK);
  CHECK(rcsp_instance_variable_count(nurse) == 90);
  CHECK(rcsp_instance_constraint_count(nurse) == 91);
  rcsp_instance_free(nurse);

  int colors[3], used = 0;
  CHECK(rcsp_graph_greedy_coloring(g, colors, &used) == RCSP_OK);
  CHECK(used == 3);
  rcsp_graph_free(g);
}

TEST_CASE("graph generators and GSET files") {
  rcsp_graph* g = nullptr;
  REQUIRE(rcsp_graph_barabasi_albert(20, 3, 5, &g) == RCSP_OK);
  CHECK(rcsp_graph_edge_count(g) == 3 + 17 * 3);
  const fs::path dir = scratch("gset");
  const std::string path = (dir / "g.txt").string();
  REQUIRE(rcsp_graph_save_gset(g, path.c_str()) == RCSP_OK);
  rcsp_graph* back = nullptr;
  REQUIRE(rcsp_graph_load_gset(path.c_str(), &back) == RCSP_OK);
  CHECK(rcsp_graph_edge_count(back) == rcsp_graph_edge_count(g));
  rcsp_graph_free(back);
  rcsp_graph_free(g);
  CHECK(rcsp_graph_load_gset((dir / "missing.txt").string().c_str(), &back) == RCSP_ERR_IO);
  std::ofstream(dir / "bad.txt") << "3 2\n1 2 1\n";
  CHECK(rcsp_graph_load_gset((dir / "bad.txt").string().c_str(), &back) == RCSP_ERR_FORMAT);
  CHECK(rcsp_graph_erdos_renyi(5, 1.5, 1, &g) == RCSP_ERR_INVALID_ARGUMENT);
}

TEST_CASE("datasets") {
  rcsp_coloring_params params;
  rcsp_coloring_params_default(&params);
  params.vertices = 12;
  params.colors_equal_greedy = 1;
  rcsp_dataset* ds = nullptr;
  REQUIRE(rcsp_dataset_generate_coloring(10, &params, 3, &ds) == RCSP_OK);
  CHECK(rcsp_dataset_size(ds) == 10);
  CHECK(rcsp_dataset_problem(ds) == RCSP_PROBLEM_COLORING);
  CHECK(rcsp_dataset_seed(ds) == 3);
  rcsp_record_info info;
  REQUIRE(rcsp_dataset_record(ds, 4, &info) == RCSP_OK);
  CHECK(info.colors == info.greedy_colors);
  CHECK(info.has_graph == 1);
  CHECK(rcsp_dataset_record(ds, 10, &info) == RCSP_ERR_OUT_OF_RANGE);

  const fs::path dir = scratch("ds");
  REQUIRE(rcsp_dataset_save(ds, dir.string().c_str()) == RCSP_OK);
  rcsp_dataset* back = nullptr;
  REQUIRE(rcsp_dataset_load(dir.string().c_str(), &back) == RCSP_OK);
  CHECK(rcsp_dataset_size(back) == 10);
  rcsp_dataset* part = nullptr;
  REQUIRE(rcsp_dataset_slice(back, 2, 5, &part) == RCSP_OK);
  CHECK(rcsp_dataset_size(part) == 3);
  CHECK(rcsp_dataset_slice(back, 5, 11, &part) == RCSP_ERR_OUT_OF_RANGE);
  rcsp_dataset_free(part);
  rcsp_dataset_free(back);
  rcsp_dataset_free(ds);
  CHECK(rcsp_dataset_load((dir / "none").string().c_str(), &back) == RCSP_ERR_IO);

  std::ofstream(dir / "p.txt") << std::string(81, '0') << "\n" << std::string(81, '5') << "\n";
  REQUIRE(rcsp_dataset_load_sudoku((dir / "p.txt").string().c_str(), &ds) == RCSP_OK);
  rcsp_instance* inst = nullptr;
  REQUIRE(rcsp_dataset_instance(ds, 1, &inst) == RCSP_OK);
  CHECK(rcsp_instance_fixed_count(inst) == 81);
  rcsp_instance_free(inst);
  rcsp_dataset_free(ds);
}

TEST_CASE("model lifecycle, training and checkpoints") {
  rcsp_coloring_params params;
  rcsp_coloring_params_default(&params);
  params.vertices = 8;
  params.colors_equal_greedy = 1;
  params.families = RCSP_FAMILY_ERDOS_RENYI;
  rcsp_dataset* ds = nullptr;
  REQUIRE(rcsp_dataset_generate_coloring(6, &params, 1, &ds) == RCSP_OK);

  const rcsp_model_config cfg = toy_config(10);
  rcsp_model* m = nullptr;
  REQUIRE(rcsp_model_create(&cfg, 5, &m) == RCSP_OK);
  CHECK(rcsp_model_epochs_done(m) == 0);
  CHECK(rcsp_model_parameter_count(m) > 0);

  rcsp_train_config tc;
  rcsp_train_config_default(&tc);
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.learning_rate = 1e-3;
  tc.seed = 7;
  EpochLog log;
  rcsp_model* best = nullptr;
  REQUIRE(rcsp_model_train(m, ds, &tc, log_epoch, &log, &best) == RCSP_OK);
  CHECK(log.epochs == std::vector<int>{0, 1, 2});
  CHECK(rcsp_model_epochs_done(m) == 3);
  CHECK(rcsp_model_optimizer_steps(m) == 6);
  REQUIRE(best != nullptr);
  rcsp_model_free(best);

  const fs::path dir = scratch("model");
  const std::string path = (dir / "w.bin").string();
  REQUIRE(rcsp_model_save(m, path.c_str()) == RCSP_OK);
  rcsp_model* loaded = nullptr;
  REQUIRE(rcsp_model_load(path.c_str(), &cfg, &loaded) == RCSP_OK);
  CHECK(rcsp_model_epochs_done(loaded) == 3);
  rcsp_model_config got;
  rcsp_model_get_config(loaded, &got);
  CHECK(got.d_model == 8);

  log = {};
  REQUIRE(rcsp_model_train(loaded, ds, &tc, log_epoch, &log, nullptr) == RCSP_OK);
  CHECK(log.epochs == std::vector<int>{3, 4, 5});
  CHECK(rcsp_model_optimizer_steps(loaded) == 12);

  rcsp_model_config other = cfg;
  other.layers = 2;
  rcsp_model* fail = nullptr;
  CHECK(rcsp_model_load(path.c_str(), &other, &fail) == RCSP_ERR_INCOMPATIBLE);
  std::string bytes = slurp(path);
  bytes[0] = 'Z';
  std::ofstream(dir / "bad.bin", std::ios::binary) << bytes;
  CHECK(rcsp_model_load((dir / "bad.bin").string().c_str(), nullptr, &fail) == RCSP_ERR_FORMAT);
  CHECK(fail == nullptr);

  rcsp_model_config invalid = cfg;
  invalid.heads = 3;
  CHECK(rcsp_model_create(&invalid, 1, &fail) == RCSP_ERR_INVALID_ARGUMENT);
  rcsp_model_free(loaded);
  rcsp_model_free(m);
  rcsp_dataset_free(ds);
}

TEST_CASE("solving through the C interface") {
  const rcsp_model_config cfg = toy_config(3);
  rcsp_model* m = nullptr;
  REQUIRE(rcsp_model_create(&cfg, 2, &m) == RCSP_OK);
  rcsp_graph* g = nullptr;
  REQUIRE(rcsp_graph_create(4, &g) == RCSP_OK);
  rcsp_graph_add_edge(g, 0, 1, 1.0);
  rcsp_graph_add_edge(g, 1, 2, 1.0);
  rcsp_graph_add_edge(g, 2, 3, 1.0);
  rcsp_instance* inst = nullptr;
  REQUIRE(rcsp_instance_coloring(g, 3, &inst) == RCSP_OK);

  rcsp_solve_options opts;
  rcsp_solve_options_default(&opts);
  opts.max_iterations = 200;
  opts.seed = 11;
  rcsp_solve_report a, b;
  int best_a[4], best_b[4];
  REQUIRE(rcsp_solve(m, inst, &opts, &a, best_a, 4) == RCSP_OK);
  opts.pool = 1;
  REQUIRE(rcsp_solve(m, inst, &opts, &b, best_b, 4) == RCSP_OK);
  CHECK(a.iterations == b.iterations);
  CHECK(std::equal(best_a, best_a + 4, best_b));
  if (a.feasible) {
    rcsp_evaluation ev;
    REQUIRE(rcsp_instance_evaluate(inst, best_a, 4, &ev) == RCSP_OK);
    CHECK(ev.feasible == 1);
  }

  opts.pool = 4;
  opts.workers = 2;
  CHECK(rcsp_solve(m, inst, &opts, &a, nullptr, 0) == RCSP_OK);
  opts.pool = 0;
  CHECK(rcsp_solve(m, inst, &opts, &a, nullptr, 0) == RCSP_ERR_INVALID_ARGUMENT);

  const int solved[4] = {0, 1, 0, 1};
  opts.pool = 1;
  REQUIRE(rcsp_solve_from(m, inst, solved, 4, &opts, &a, nullptr) == RCSP_OK);
  CHECK(a.feasible == 1);
  CHECK(a.iterations == 0);

  rcsp_instance* big = nullptr;
  std::vector<int> givens(81, -1);
  REQUIRE(rcsp_instance_sudoku(givens.data(), &big) == RCSP_OK);
  CHECK(rcsp_solve(m, big, &opts, &a, nullptr, 0) == RCSP_ERR_INCOMPATIBLE);
  rcsp_instance_free(big);

  rcsp_instance_free(inst);
  rcsp_graph_free(g);
  rcsp_model_free(m);
}

TEST_CASE("baselines and gradient check") {
  std::vector<int> givens(81);
  for (int c = 0; c < 81; ++c) givens[c] = (c / 9 * 3 + c / 27 + c % 9) % 9;
  rcsp_instance* inst = nullptr;
  REQUIRE(rcsp_instance_sudoku(givens.data(), &inst) == RCSP_OK);
  rcsp_sgd_result r;
  REQUIRE(rcsp_direct_sgd(inst, 10, 0.1, 1, &r) == RCSP_OK);
  CHECK(r.satisfied == 27);
  CHECK(r.constraints == 27);
  rcsp_instance_free(inst);

  int failures = -1, cases = 0;
  REQUIRE(rcsp_gradcheck(
              3, 1e-4,
              [](const char*, size_t, double, int, void* user) { ++*static_cast<int*>(user); },
              &cases, &failures) == RCSP_OK);
  CHECK(failures == 0);
  CHECK(cases > 20);
}
