#pragma once

// Finite-difference verification of every differentiable piece of the
// library: tensor ops, constraint penalties and loss-through-model.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace refinecsp {

struct GradCheckCase {
  std::string name;
  std::size_t points = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Runs the full suite at random non-kink points drawn from `seed`.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, double tol = 1e-4);

}  // namespace refinecsp
