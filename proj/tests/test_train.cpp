#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <optional>
#include <vector>

#include "refinecsp/csp.hpp"
#include "refinecsp/error.hpp"
#include "refinecsp/model.hpp"
#include "refinecsp/penalty.hpp"
#include "refinecsp/train.hpp"

using namespace refinecsp;
using nd::Tensor;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.domain_size = 4;
  cfg.selection_p = 0.5;
  cfg.ape = ApeMode::one_dim;
  cfg.sampler = Sampler::gumbel;
  cfg.temperature = 0.5;
  cfg.dropout = 0.1;
  return cfg;
}

CspInstance toy(std::vector<std::optional<int>> fixed = std::vector<std::optional<int>>(4)) {
  return CspInstance(4, {{0}, {1}, {2}, {3}}, std::move(fixed), {AllDifferentExact{{0, 1, 2, 3}}});
}

std::vector<double> flatten(const ModelWeights& w) {
  std::vector<double> out;
  for (const auto& p : w.parameters()) out.insert(out.end(), p.tensor.values().begin(),
                                                 p.tensor.values().end());
  return out;
}

void set_grad(ModelWeights& w, double g) {
  for (auto& p : w.parameters()) {
    auto& grad = p.tensor.node()->ensure_grad();
    std::fill(grad.begin(), grad.end(), g);
  }
}

}  // namespace

TEST_CASE("random assignment respects domain and givens") {
  Rng rng(1);
  std::vector<std::optional<int>> g(81);
  g[0] = 4;
  g[80] = 7;
  const CspInstance sudoku = build_sudoku(g);
  for (int t = 0; t < 20; ++t) {
    const Assignment a = random_assignment(sudoku, rng);
    for (int v : a) CHECK((v >= 0 && v < 9));
    CHECK(a[0] == 4);
    CHECK(a[80] == 7);
  }
  const CspInstance unary(1, {{0}, {1}}, std::vector<std::optional<int>>(2), {});
  CHECK(random_assignment(unary, rng) == Assignment{0, 0});
}

TEST_CASE("random assignment is uniform per value") {
  Rng rng(2);
  const CspInstance inst = toy();
  std::vector<double> freq(4, 0.0);
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) freq[random_assignment(inst, rng)[0]] += 1.0;
  for (double f : freq) CHECK(std::fabs(f / draws - 0.25) < 0.01);
}

TEST_CASE("assemble_relaxed mixes soft selected rows with one-hot rows") {
  const Assignment a{0, 1, 2, 3};
  const Tensor pure = assemble_relaxed(a, {}, Tensor(), 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(pure.at(i, j) == (static_cast<int>(j) == a[i]));
  CHECK(total_loss(toy(), pure, LossConfig{}).item() == 0.0);

  const std::vector<std::size_t> s{2};
  const Tensor soft = assemble_relaxed(a, s, Tensor::from({1, 4}, {0.1, 0.2, 0.3, 0.4}), 4);
  CHECK(soft.at(2, 3) == 0.4);
  CHECK(soft.at(1, 1) == 1.0);
  CHECK(soft.at(3, 3) == 1.0);
}

TEST_CASE("adamw with zero gradient") {
  Rng rng(3);
  ModelWeights w = init_weights(tiny_model(), rng);
  const auto before = flatten(w);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.0;
  OptimizerState st;
  set_grad(w, 0.0);
  adamw_step(w, st, cfg);
  CHECK(flatten(w) == before);

  cfg.weight_decay = 0.5;
  adamw_step(w, st, cfg);
  const auto after = flatten(w);
  std::size_t k = 0;
  for (const auto& p : w.parameters())
    for (std::size_t i = 0; i < p.tensor.size(); ++i, ++k) {
      const double expect = p.decay ? before[k] * (1.0 - 0.01 * 0.5) : before[k];
      CHECK(after[k] == doctest::Approx(expect).epsilon(1e-15));
    }
  CHECK(st.step == 2);
}

TEST_CASE("adamw with a constant gradient moves by lr times the sign") {
  Rng rng(4);
  ModelWeights w = init_weights(tiny_model(), rng);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.weight_decay = 0.0;
  for (double g : {0.37, -2.5}) {
    OptimizerState st;
    for (int t = 0; t < 200; ++t) {
      const auto before = flatten(w);
      set_grad(w, g);
      adamw_step(w, st, cfg);
      if (t == 199) {
        const auto after = flatten(w);
        for (std::size_t i = 0; i < after.size(); ++i)
          CHECK(before[i] - after[i] == doctest::Approx(std::copysign(1e-3, g)).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("adamw rejects a non-finite gradient and names the parameter") {
  Rng rng(5);
  ModelWeights w = init_weights(tiny_model(), rng);
  set_grad(w, 0.0);
  w.alpha.node()->ensure_grad()[0] = std::nan("");
  OptimizerState st;
  try {
    adamw_step(w, st, TrainConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric_failure);
    CHECK(std::string(e.what()).find("alpha") != std::string::npos);
  }
}

TEST_CASE("gradients reach the input encoding parameters") {
  Rng rng(6);
  ModelConfig mc = tiny_model();
  mc.dropout = 0.0;
  const ModelWeights w = init_weights(mc, rng);
  const CspInstance inst = toy();
  const InstanceContext ctx(mc, inst);
  nd::Tape tape;
  nd::TapeScope scope(tape);
  const Assignment a{0, 0, 1, 1};
  const std::vector<std::size_t> s{0, 2};
  nd::backward(step_loss(w, ctx, a, s, rng, Phase::train, LossConfig{}));
  for (const Tensor* t : {&w.selected_marker, &w.alpha, &w.beta, &w.gamma, &w.value_embedding}) {
    REQUIRE(t->has_grad());
    double norm = 0;
    for (double g : t->grad()) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("train with zero epochs returns the initialization") {
  const std::vector<CspInstance> data = {toy()};
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  const TrainResult r = train(data, tiny_model(), cfg);
  CHECK(r.loss_history.empty());
  Rng rng(derive_seed(9, 0xfeed));
  CHECK(flatten(r.weights) == flatten(init_weights(tiny_model(), rng)));
}

TEST_CASE("training is deterministic and records one loss per epoch") {
  std::vector<CspInstance> data;
  for (int i = 0; i < 6; ++i) data.push_back(toy());
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.seed = 11;
  int calls = 0;
  const TrainResult a = train(data, tiny_model(), cfg, [&](int, double, double) { ++calls; });
  const TrainResult b = train(data, tiny_model(), cfg);
  CHECK(calls == 5);
  CHECK(a.loss_history.size() == 5);
  CHECK(a.loss_history == b.loss_history);
  CHECK(flatten(a.weights) == flatten(b.weights));
  CHECK(a.optimizer.step == 10);
  for (double l : a.loss_history) CHECK(l >= 0.0);

  cfg.seed = 12;
  const TrainResult c = train(data, tiny_model(), cfg);
  CHECK(flatten(c.weights) != flatten(a.weights));
}

TEST_CASE("resuming continues where an uninterrupted run would be") {
  std::vector<CspInstance> data = {toy(), toy(), toy()};
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-3;
  cfg.seed = 13;
  cfg.epochs = 4;
  const TrainResult full = train(data, tiny_model(), cfg);
  cfg.epochs = 2;
  const TrainResult first = train(data, tiny_model(), cfg);
  const TrainResult second =
      train(data, tiny_model(), cfg, {}, first.weights.clone(), first.optimizer, 2);
  CHECK(second.optimizer.step == full.optimizer.step);
  CHECK(flatten(second.weights) == flatten(full.weights));
}

TEST_CASE("fully fixed instances give a constant loss") {
  const CspInstance fixed = toy({0, 1, 2, 3});
  const std::vector<CspInstance> data = {fixed};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 1;
  cfg.seed = 14;
  const TrainResult r = train(data, tiny_model(), cfg);
  for (double l : r.loss_history) CHECK(l == 0.0);
}

TEST_CASE("training config validation") {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  const std::vector<CspInstance> none;
  CHECK_THROWS_AS(train(none, tiny_model(), TrainConfig{}), Error);
}
