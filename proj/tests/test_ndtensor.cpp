#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "refinecsp/error.hpp"
#include "refinecsp/tensor.hpp"

using namespace refinecsp;
using nd::Tensor;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -2.0,
                                  double hi = 2.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("abs value and gradient on a negative input") {
  nd::Tape tape;
  nd::TapeScope scope(tape);
  Tensor x = Tensor::parameter({1}, {-1.1});
  Tensor y = nd::abs(x);
  CHECK(y.item() == doctest::Approx(1.1).epsilon(1e-15));
  nd::backward(y);
  CHECK(x.grad()[0] == -1.0);
}

TEST_CASE("relu on both sides of zero") {
  CHECK(nd::relu(Tensor::scalar(0.3)).item() == 0.3);
  CHECK(nd::relu(Tensor::scalar(-0.3)).item() == 0.0);
}

TEST_CASE("gelu gradient matches central differences at 100 points") {
  const auto x0 = random_values(100, 11, -3.0, 3.0);
  const auto cmp = oracle::compare_gradient(
      [](const Tensor& x) { return nd::sum_all(nd::gelu(x)); }, x0, {100});
  CHECK(cmp.max_rel < 1e-4);
}

TEST_CASE("matmul identity and hand example") {
  const auto m = random_values(9, 3);
  const Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor out = nd::matmul(eye, Tensor::from({3, 3}, m));
  for (std::size_t i = 0; i < 9; ++i) CHECK(out.values()[i] == m[i]);

  const Tensor r = nd::matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 1}, {1, 1}));
  CHECK(r.shape() == nd::Shape{2, 1});
  CHECK(r.values()[0] == 3.0);
  CHECK(r.values()[1] == 7.0);
}

TEST_CASE("gradient of sum(A B) with respect to A is ones times B transpose") {
  const auto bv = random_values(12, 5);
  const Tensor b = Tensor::from({3, 4}, bv);
  const auto cmp = oracle::compare_gradient(
      [&](const Tensor& a) { return nd::sum_all(nd::matmul(a, b)); }, random_values(6, 6),
      {2, 3});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double row_sum = 0;
      for (std::size_t j = 0; j < 4; ++j) row_sum += bv[k * 4 + j];
      CHECK(cmp.analytic[i * 3 + k] == doctest::Approx(row_sum).epsilon(1e-12));
    }
  CHECK(cmp.max_rel < 1e-4);
}

TEST_CASE("matmul inner dimension mismatch is a shape error") {
  try {
    nd::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape_mismatch);
  }
}

TEST_CASE("softmax of equal logits is uniform") {
  const Tensor s = nd::softmax(Tensor::from({1, 3}, {0, 0, 0}), 1);
  for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax treats -inf as a hard mask") {
  const double inf = std::numeric_limits<double>::infinity();
  const Tensor s = nd::softmax(Tensor::from({1, 2}, {0.7, -inf}), 1);
  CHECK(s.values()[0] == 1.0);
  CHECK(s.values()[1] == 0.0);
  try {
    nd::softmax(Tensor::from({1, 2}, {-inf, -inf}), 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric_failure);
  }
}

TEST_CASE("softmax gradient matches central differences") {
  const auto w = random_values(12, 8);
  const Tensor proj = Tensor::from({3, 4}, w);
  for (std::size_t axis : {0u, 1u}) {
    const auto cmp = oracle::compare_gradient(
        [&](const Tensor& x) { return nd::sum_all(nd::mul(nd::softmax(x, axis), proj)); },
        random_values(12, 9 + axis), {3, 4});
    CHECK(cmp.max_rel < 1e-4);
  }
}

TEST_CASE("reductions, concat and gather") {
  CHECK(nd::sum_all(Tensor::full({2, 3}, 1.0)).item() == 6.0);
  const Tensor r = nd::reduce_sum(Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}), 0);
  CHECK(r.shape() == nd::Shape{3});
  CHECK(r.values()[2] == 9.0);

  const Tensor c = nd::concat({Tensor::zeros({5}), Tensor::zeros({5})}, 0);
  CHECK(c.shape() == nd::Shape{10});

  nd::Tape tape;
  nd::TapeScope scope(tape);
  Tensor table = Tensor::parameter({2, 2}, {1, 2, 3, 4});
  const std::vector<std::size_t> idx{0, 0};
  Tensor g = nd::gather_rows(table, idx);
  CHECK(g.values()[0] == 1.0);
  CHECK(g.values()[2] == 1.0);
  CHECK(g.values()[3] == 2.0);
  nd::backward(nd::sum_all(g));
  CHECK(table.grad()[0] == 2.0);
  CHECK(table.grad()[1] == 2.0);
  CHECK(table.grad()[2] == 0.0);
}

TEST_CASE("gather with an out-of-range index fails") {
  const std::vector<std::size_t> idx{2};
  CHECK_THROWS_AS(nd::gather_rows(Tensor::zeros({2, 2}), idx), Error);
}

TEST_CASE("backward of sum of squares") {
  nd::Tape tape;
  nd::TapeScope scope(tape);
  Tensor x = Tensor::parameter({2}, {1, 2});
  Tensor w = Tensor::parameter({2}, {5, 5});
  (void)w;
  nd::backward(nd::sum_all(nd::mul(x, x)));
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("no-grad scope records nothing") {
  nd::Tape tape;
  nd::TapeScope scope(tape);
  Tensor x = Tensor::parameter({2}, {1, 2});
  {
    nd::NoGradScope ng;
    (void)nd::mul(x, x);
  }
  CHECK(tape.size() == 0);
  (void)nd::mul(x, x);
  CHECK(tape.size() == 1);
}

TEST_CASE("layer norm, transpose and composite ops pass central differences") {
  const Tensor gain = Tensor::from({4}, random_values(4, 21, 0.5, 1.5));
  const Tensor shift = Tensor::from({4}, random_values(4, 22));
  const Tensor proj = Tensor::from({4, 3}, random_values(12, 23));
  const auto cmp = oracle::compare_gradient(
      [&](const Tensor& x) {
        const Tensor h = nd::layer_norm(x, gain, shift);
        const Tensor t = nd::transpose(nd::softplus(h));
        return nd::sum_all(nd::mul(t, proj));
      },
      random_values(12, 24), {3, 4});
  CHECK(cmp.max_rel < 1e-4);
}

TEST_CASE("library grad_check agrees with a linear function exactly") {
  const auto rep = nd::grad_check([](const Tensor& x) { return nd::sum_all(x); },
                                  Tensor::from({5}, random_values(5, 31)));
  CHECK(rep.passed);
  CHECK(rep.max_relative_error < 1e-9);
}

TEST_CASE("library grad_check flags a relu kink") {
  // At exactly zero the one-sided derivative differs from the central one.
  const auto rep = nd::grad_check([](const Tensor& x) { return nd::sum_all(nd::relu(x)); },
                                  Tensor::from({2}, {0.0, 1.0}));
  CHECK_FALSE(rep.passed);
  REQUIRE(rep.failures.size() == 1);
  CHECK(rep.failures[0] == 0);
}

TEST_CASE("dropout is the identity outside training") {
  Rng rng(1);
  const Tensor x = Tensor::from({4}, {1, 2, 3, 4});
  const Tensor y = nd::dropout(x, 0.5, rng, false);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.values()[i] == x.values()[i]);
}
