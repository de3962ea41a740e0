#pragma once

// Discrete constraint satisfaction model: instances, constraints, checking,
// violation degrees and the binary constraint graph.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "refinecsp/graph.hpp"

namespace refinecsp {

/// Exactly `count` variables of `scope` take `value`.
struct Cardinality {
  int value = 0;
  int count = 0;
  std::vector<std::size_t> scope;
};

/// AllDifferent whose scope size equals the domain size.
struct AllDifferentExact {
  std::vector<std::size_t> scope;
};

/// AllDifferent over fewer variables than domain values.
struct AllDifferentAtMostOnce {
  std::vector<std::size_t> scope;
};

struct NotEqual {
  std::size_t i = 0;
  std::size_t k = 0;
  double weight = 1.0;
};

using Constraint = std::variant<Cardinality, AllDifferentExact, AllDifferentAtMostOnce, NotEqual>;

enum class Mode { satisfaction, maximization };

/// One integer value in [0, m) per variable.
using Assignment = std::vector<int>;

/// Picks the exact or at-most-once variant from |scope| against m.
Constraint make_all_different(std::vector<std::size_t> scope, int domain_size);

std::vector<std::size_t> constraint_scope(const Constraint& c);

class CspInstance {
 public:
  CspInstance(int domain_size, std::vector<std::vector<int>> index_tuples,
              std::vector<std::optional<int>> fixed, std::vector<Constraint> constraints,
              Mode mode = Mode::satisfaction);

  std::size_t variable_count() const { return index_tuples_.size(); }
  int domain_size() const { return domain_size_; }
  std::size_t index_dims() const { return index_tuples_.empty() ? 1 : index_tuples_[0].size(); }
  const std::vector<int>& index_tuple(std::size_t var) const { return index_tuples_[var]; }
  const std::optional<int>& fixed(std::size_t var) const { return fixed_[var]; }
  std::size_t fixed_count() const;
  const std::vector<Constraint>& constraints() const { return constraints_; }
  Mode mode() const { return mode_; }

 private:
  int domain_size_;
  std::vector<std::vector<int>> index_tuples_;
  std::vector<std::optional<int>> fixed_;
  std::vector<Constraint> constraints_;
  Mode mode_;
};

/// Throws when a value is outside [0, m) or contradicts a fixed variable.
void validate_assignment(const CspInstance& inst, const Assignment& a);

bool check_constraint(const Constraint& c, const Assignment& a);
int violation_degree(const Constraint& c, const Assignment& a);
bool is_feasible(const CspInstance& inst, const Assignment& a);
/// Sum of violation degrees over every constraint.
int total_violation(const CspInstance& inst, const Assignment& a);
std::size_t satisfied_count(const CspInstance& inst, const Assignment& a);

class ConstraintGraph {
 public:
  ConstraintGraph(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t vertex_count() const { return n_; }
  /// Unordered pairs stored as (low, high), sorted.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return adj_[v]; }
  std::size_t degree(std::size_t v) const { return adj_[v].size(); }
  bool has_edge(std::size_t i, std::size_t j) const;

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> adj_;
};

ConstraintGraph constraint_graph(const CspInstance& inst);

/// 81 cells, row-major; digits already shifted to 0..8, nullopt for blanks.
CspInstance build_sudoku(std::span<const std::optional<int>> givens);
CspInstance build_graph_coloring(const WeightedGraph& graph, int colors);
CspInstance build_nurse_rostering(int days, int shifts, int per_shift, int nurses);
CspInstance build_maxcut(const WeightedGraph& graph);

/// Variable index of slot `slot` of shift `shift` on day `day`.
inline std::size_t nurse_variable(int day, int shift, int slot, int shifts, int per_shift) {
  return static_cast<std::size_t>((day * shifts + shift) * per_shift + slot);
}

}  // namespace refinecsp
