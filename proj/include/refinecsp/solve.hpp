#pragma once

// Test-time deployment of a trained refiner and the non-neural baselines.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "refinecsp/csp.hpp"
#include "refinecsp/graph.hpp"
#include "refinecsp/model.hpp"

namespace refinecsp {

struct Budget {
  std::optional<std::int64_t> max_iterations;
  std::optional<double> time_limit_ms;

  void validate() const;
  static Budget iterations(std::int64_t n) { return Budget{n, std::nullopt}; }
};

struct SolveReport {
  bool feasible = false;
  std::int64_t iterations = 0;
  double elapsed_ms = 0.0;
  Assignment final_assignment;
  Assignment best_assignment;
  /// Total violation degree of the best assignment.
  int best_violation = 0;
  /// Weighted cut of the best assignment (maximization instances only).
  double objective = 0.0;
  /// Candidate that produced the reported assignments.
  int winner = 0;
  int resamples = 0;
  /// Total violation degree after each iteration (index 0 = initial state);
  /// filled only when tracing.
  std::vector<int> violation_trace;
  /// Best cut after each iteration (maximization, tracing only).
  std::vector<double> objective_trace;
};

/// Weighted cut of a binary assignment: sum of w_e over edges whose ends differ.
double cut_value(const WeightedGraph& graph, const Assignment& a);
/// Same quantity read off a maximization instance's NotEqual constraints.
double cut_value(const CspInstance& inst, const Assignment& a);

/// Seed of candidate `index` in a pool built from `base`.
std::uint64_t candidate_seed(std::uint64_t base, int index);

/// Repeated select -> forward(eval) -> update from `init`. Satisfaction
/// instances stop at the first feasible iterate; maximization instances run
/// the whole budget tracking the best cut.
SolveReport iterate(const ModelWeights& w, const CspInstance& inst, const Assignment& init,
                    const Budget& budget, Rng& rng, bool trace = false);

/// `pool` candidates from random initial assignments, advanced in lockstep
/// rounds. Candidate c draws from Rng(candidate_seed(seed, c)); the lowest
/// feasible index at the earliest round wins. Up to `workers` threads step
/// candidates within a round; the result does not depend on `workers`.
SolveReport multi_start(const ModelWeights& w, const CspInstance& inst, int pool,
                        const Budget& budget, std::uint64_t seed, bool trace = false,
                        int workers = 1);

/// Single-start solve from a random initial assignment drawn from candidate
/// 0's stream; identical to multi_start with pool == 1.
SolveReport solve_from_random(const ModelWeights& w, const CspInstance& inst,
                              const Budget& budget, std::uint64_t seed, bool trace = false);

struct GreedyColoring {
  std::vector<int> colors;
  int colors_used = 0;
};

/// First-fit coloring in ascending vertex order.
GreedyColoring greedy_coloring(const WeightedGraph& graph);

/// Re-draws every selected variable uniformly at random; the non-learned
/// reference for one refinement step.
Assignment random_update_step(const CspInstance& inst, const Assignment& a, double p, Rng& rng);

struct DirectSgdResult {
  std::size_t satisfied = 0;
  double final_loss = 0.0;
  Assignment assignment;
};

/// Optimizes free variables directly as softmax logits under the quadratic
/// penalty loss with plain gradient descent, then rounds by argmax.
DirectSgdResult direct_sgd_baseline(const CspInstance& inst, int steps, double lr, Rng& rng);

}  // namespace refinecsp
