#pragma once

// Reference computations used as expected values in the test suites. They
// share no code with the library beyond the tensor container.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "refinecsp/tensor.hpp"

namespace oracle {

using refinecsp::nd::Tensor;

struct GradComparison {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel = 0.0;
};

/// Reverse-mode gradient of scalar f at x next to central differences.
inline GradComparison compare_gradient(const std::function<Tensor(const Tensor&)>& f,
                                       const std::vector<double>& x0,
                                       const refinecsp::nd::Shape& shape, double eps = 1e-5,
                                       double floor = 1e-3) {
  namespace nd = refinecsp::nd;
  GradComparison out;
  {
    nd::Tape tape;
    nd::TapeScope scope(tape);
    Tensor x = Tensor::parameter(shape, x0);
    Tensor y = f(x);
    tape.backward(y);
    out.analytic.assign(x0.size(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), out.analytic.begin());
  }
  nd::NoGradScope no_grad;
  out.numeric.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    auto xp = x0, xm = x0;
    xp[i] += eps;
    xm[i] -= eps;
    const double fp = f(Tensor::from(shape, xp)).item();
    const double fm = f(Tensor::from(shape, xm)).item();
    out.numeric[i] = (fp - fm) / (2 * eps);
    const double a = out.analytic[i], n = out.numeric[i];
    const double rel = std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), floor});
    out.max_rel = std::max(out.max_rel, rel);
  }
  return out;
}

/// Calls visit on every vector in [0, m)^n.
inline void for_each_assignment(std::size_t n, int m,
                                const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> a(n, 0);
  while (true) {
    visit(a);
    std::size_t i = 0;
    while (i < n && ++a[i] == m) a[i++] = 0;
    if (i == n) return;
  }
}

/// n x m one-hot rows of a.
inline Tensor one_hot_rows(const std::vector<int>& a, int m) {
  std::vector<double> v(a.size() * static_cast<std::size_t>(m), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) v[i * m + a[i]] = 1.0;
  return Tensor::from({a.size(), static_cast<std::size_t>(m)}, v);
}

/// Row, column and box checking of a completed 9x9 grid with values 0..8.
inline bool sudoku_grid_valid(const std::vector<int>& g) {
  for (int u = 0; u < 9; ++u) {
    std::set<int> row, col, box;
    for (int t = 0; t < 9; ++t) {
      row.insert(g[u * 9 + t]);
      col.insert(g[t * 9 + u]);
      box.insert(g[(u / 3 * 3 + t / 3) * 9 + u % 3 * 3 + t % 3]);
    }
    if (row.size() != 9 || col.size() != 9 || box.size() != 9) return false;
  }
  return true;
}

/// Cells sharing a row, column or box with cell c, excluding c.
inline std::set<int> sudoku_peers(int c) {
  std::set<int> peers;
  const int r = c / 9, col = c % 9;
  for (int o = 0; o < 81; ++o) {
    const int orow = o / 9, ocol = o % 9;
    const bool same_box = orow / 3 == r / 3 && ocol / 3 == col / 3;
    if (o != c && (orow == r || ocol == col || same_box)) peers.insert(o);
  }
  return peers;
}

/// Maximum weighted cut by trying every bipartition.
inline double brute_max_cut(std::size_t n,
                            const std::vector<std::array<double, 3>>& edges) {
  double best = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double cut = 0.0;
    for (const auto& e : edges) {
      const auto u = static_cast<std::size_t>(e[0]), v = static_cast<std::size_t>(e[1]);
      if (((mask >> u) & 1) != ((mask >> v) & 1)) cut += e[2];
    }
    best = std::max(best, cut);
  }
  return best;
}

}  // namespace oracle
