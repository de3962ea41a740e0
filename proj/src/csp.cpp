#include "refinecsp/csp.hpp"

#include <algorithm>
#include <string>

#include "refinecsp/error.hpp"

namespace refinecsp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_scope(const std::vector<std::size_t>& scope, std::size_t n) {
  for (auto v : scope)
    if (v >= n)
      fail(ErrorKind::out_of_range, "constraint scope references variable " + std::to_string(v) +
                                        " but the assignment has " + std::to_string(n));
}

std::vector<int> value_counts(const std::vector<std::size_t>& scope, const Assignment& a) {
  int top = 0;
  for (auto v : scope) top = std::max(top, a[v] + 1);
  std::vector<int> counts(static_cast<std::size_t>(top), 0);
  for (auto v : scope) ++counts[static_cast<std::size_t>(a[v])];
  return counts;
}

int alldiff_degree(const std::vector<std::size_t>& scope, const Assignment& a) {
  int degree = 0;
  for (int c : value_counts(scope, a)) degree += std::max(0, c - 1);
  return degree;
}

}  // namespace

Constraint make_all_different(std::vector<std::size_t> scope, int domain_size) {
  const auto size = static_cast<int>(scope.size());
  if (size > domain_size)
    fail(ErrorKind::invalid_argument, "AllDifferent over " + std::to_string(size) +
                                          " variables cannot fit a domain of " +
                                          std::to_string(domain_size));
  if (size == domain_size) return AllDifferentExact{std::move(scope)};
  return AllDifferentAtMostOnce{std::move(scope)};
}

std::vector<std::size_t> constraint_scope(const Constraint& c) {
  return std::visit(overloaded{
                        [](const NotEqual& ne) { return std::vector<std::size_t>{ne.i, ne.k}; },
                        [](const auto& other) { return other.scope; },
                    },
                    c);
}

CspInstance::CspInstance(int domain_size, std::vector<std::vector<int>> index_tuples,
                         std::vector<std::optional<int>> fixed,
                         std::vector<Constraint> constraints, Mode mode)
    : domain_size_(domain_size),
      index_tuples_(std::move(index_tuples)),
      fixed_(std::move(fixed)),
      constraints_(std::move(constraints)),
      mode_(mode) {
  if (domain_size_ < 1) fail(ErrorKind::invalid_argument, "domain size must be at least 1");
  const std::size_t n = index_tuples_.size();
  if (fixed_.empty()) fixed_.resize(n);
  if (fixed_.size() != n)
    fail(ErrorKind::invalid_argument, "fixed-value list length differs from variable count");
  const std::size_t dims = index_dims();
  for (const auto& t : index_tuples_) {
    if (t.empty() || t.size() != dims)
      fail(ErrorKind::invalid_argument, "index tuples must share one dimensionality >= 1");
    for (int x : t)
      if (x < 0) fail(ErrorKind::invalid_argument, "index tuple entries must be non-negative");
  }
  for (const auto& f : fixed_)
    if (f && (*f < 0 || *f >= domain_size_))
      fail(ErrorKind::out_of_range, "fixed value " + std::to_string(*f) + " outside domain");
  for (const auto& c : constraints_) {
    check_scope(constraint_scope(c), n);
    std::visit(overloaded{
                   [&](const Cardinality& card) {
                     if (card.value < 0 || card.value >= domain_size_)
                       fail(ErrorKind::out_of_range, "cardinality value outside domain");
                     if (card.count < 0 || card.count > static_cast<int>(card.scope.size()))
                       fail(ErrorKind::invalid_argument, "cardinality count outside [0, |scope|]");
                   },
                   [&](const AllDifferentExact& ad) {
                     if (static_cast<int>(ad.scope.size()) != domain_size_)
                       fail(ErrorKind::invalid_argument,
                            "exact AllDifferent needs |scope| equal to the domain size");
                   },
                   [&](const AllDifferentAtMostOnce& ad) {
                     if (static_cast<int>(ad.scope.size()) >= domain_size_)
                       fail(ErrorKind::invalid_argument,
                            "at-most-once AllDifferent needs |scope| below the domain size");
                   },
                   [&](const NotEqual& ne) {
                     if (ne.i == ne.k)
                       fail(ErrorKind::invalid_argument, "NotEqual needs two distinct variables");
                   },
               },
               c);
  }
}

std::size_t CspInstance::fixed_count() const {
  return static_cast<std::size_t>(
      std::count_if(fixed_.begin(), fixed_.end(), [](const auto& f) { return f.has_value(); }));
}

void validate_assignment(const CspInstance& inst, const Assignment& a) {
  if (a.size() != inst.variable_count())
    fail(ErrorKind::invalid_argument, "assignment has " + std::to_string(a.size()) +
                                          " values for " + std::to_string(inst.variable_count()) +
                                          " variables");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || a[i] >= inst.domain_size())
      fail(ErrorKind::out_of_range, "value " + std::to_string(a[i]) + " of variable " +
                                        std::to_string(i) + " outside the domain");
    if (inst.fixed(i) && *inst.fixed(i) != a[i])
      fail(ErrorKind::invalid_argument,
           "variable " + std::to_string(i) + " must keep its fixed value");
  }
}

int violation_degree(const Constraint& c, const Assignment& a) {
  check_scope(constraint_scope(c), a.size());
  for (auto v : constraint_scope(c))
    if (a[v] < 0) fail(ErrorKind::out_of_range, "negative value in assignment");
  return std::visit(overloaded{
                        [&](const Cardinality& card) {
                          int hits = 0;
                          for (auto v : card.scope) hits += a[v] == card.value ? 1 : 0;
                          return std::abs(card.count - hits);
                        },
                        [&](const AllDifferentExact& ad) { return alldiff_degree(ad.scope, a); },
                        [&](const AllDifferentAtMostOnce& ad) {
                          return alldiff_degree(ad.scope, a);
                        },
                        [&](const NotEqual& ne) { return a[ne.i] == a[ne.k] ? 1 : 0; },
                    },
                    c);
}

bool check_constraint(const Constraint& c, const Assignment& a) {
  check_scope(constraint_scope(c), a.size());
  return std::visit(overloaded{
                        [&](const Cardinality& card) {
                          const auto hits = std::count_if(
                              card.scope.begin(), card.scope.end(),
                              [&](std::size_t v) { return a[v] == card.value; });
                          return hits == card.count;
                        },
                        [&](const NotEqual& ne) { return a[ne.i] != a[ne.k]; },
                        [&](const auto& ad) {
                          std::vector<int> seen(ad.scope.begin(), ad.scope.end());
                          for (std::size_t i = 0; i < seen.size(); ++i)
                            seen[i] = a[ad.scope[i]];
                          std::sort(seen.begin(), seen.end());
                          return std::adjacent_find(seen.begin(), seen.end()) == seen.end();
                        },
                    },
                    c);
}

bool is_feasible(const CspInstance& inst, const Assignment& a) {
  return std::all_of(inst.constraints().begin(), inst.constraints().end(),
                     [&](const Constraint& c) { return check_constraint(c, a); });
}

int total_violation(const CspInstance& inst, const Assignment& a) {
  int total = 0;
  for (const auto& c : inst.constraints()) total += violation_degree(c, a);
  return total;
}

std::size_t satisfied_count(const CspInstance& inst, const Assignment& a) {
  return static_cast<std::size_t>(
      std::count_if(inst.constraints().begin(), inst.constraints().end(),
                    [&](const Constraint& c) { return check_constraint(c, a); }));
}

ConstraintGraph::ConstraintGraph(std::size_t n,
                                 std::vector<std::pair<std::size_t, std::size_t>> edges)
    : n_(n), adj_(n) {
  for (auto& [i, j] : edges) {
    if (i >= n || j >= n) fail(ErrorKind::out_of_range, "constraint graph edge out of range");
    if (i == j) fail(ErrorKind::invalid_argument, "constraint graph has no self-loops");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);
  for (const auto& [i, j] : edges_) {
    adj_[i].push_back(j);
    adj_[j].push_back(i);
  }
  for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

bool ConstraintGraph::has_edge(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) return false;
  return std::binary_search(adj_[i].begin(), adj_[i].end(), j);
}

ConstraintGraph constraint_graph(const CspInstance& inst) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& c : inst.constraints()) {
    const auto scope = constraint_scope(c);
    for (std::size_t a = 0; a < scope.size(); ++a)
      for (std::size_t b = a + 1; b < scope.size(); ++b)
        if (scope[a] != scope[b]) edges.emplace_back(scope[a], scope[b]);
  }
  return ConstraintGraph(inst.variable_count(), std::move(edges));
}

CspInstance build_sudoku(std::span<const std::optional<int>> givens) {
  if (givens.size() != 81)
    fail(ErrorKind::invalid_argument,
         "sudoku needs 81 cells, got " + std::to_string(givens.size()));
  std::vector<std::vector<int>> tuples;
  std::vector<std::optional<int>> fixed(givens.begin(), givens.end());
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) tuples.push_back({r, c});
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (fixed[i] && (*fixed[i] < 0 || *fixed[i] > 8))
      fail(ErrorKind::out_of_range, "sudoku cell " + std::to_string(i) + " holds digit " +
                                        std::to_string(*fixed[i]) + " outside 0..8");
  std::vector<Constraint> cons;
  const auto cell = [](int r, int c) { return static_cast<std::size_t>(r * 9 + c); };
  for (int r = 0; r < 9; ++r) {
    std::vector<std::size_t> scope;
    for (int c = 0; c < 9; ++c) scope.push_back(cell(r, c));
    cons.push_back(AllDifferentExact{scope});
  }
  for (int c = 0; c < 9; ++c) {
    std::vector<std::size_t> scope;
    for (int r = 0; r < 9; ++r) scope.push_back(cell(r, c));
    cons.push_back(AllDifferentExact{scope});
  }
  for (int b = 0; b < 9; ++b) {
    std::vector<std::size_t> scope;
    for (int i = 0; i < 9; ++i) scope.push_back(cell(3 * (b / 3) + i / 3, 3 * (b % 3) + i % 3));
    cons.push_back(AllDifferentExact{scope});
  }
  return CspInstance(9, std::move(tuples), std::move(fixed), std::move(cons));
}

CspInstance build_graph_coloring(const WeightedGraph& graph, int colors) {
  if (colors < 1) fail(ErrorKind::invalid_argument, "graph coloring needs at least one color");
  std::vector<std::vector<int>> tuples;
  for (std::size_t v = 0; v < graph.vertex_count(); ++v) tuples.push_back({static_cast<int>(v)});
  std::vector<Constraint> cons;
  for (const auto& e : graph.edges()) cons.push_back(NotEqual{e.u, e.v, 1.0});
  return CspInstance(colors, std::move(tuples), {}, std::move(cons));
}

CspInstance build_nurse_rostering(int days, int shifts, int per_shift, int nurses) {
  if (days < 1 || shifts < 1 || per_shift < 1 || nurses < 1)
    fail(ErrorKind::invalid_argument, "nurse rostering parameters must be positive");
  if (shifts * per_shift > nurses)
    fail(ErrorKind::invalid_argument,
         "nurse rostering needs shifts * per_shift <= nurses to staff a day");
  std::vector<std::vector<int>> tuples;
  for (int d = 0; d < days; ++d)
    for (int s = 0; s < shifts; ++s)
      for (int k = 0; k < per_shift; ++k) tuples.push_back({d, s, k});
  std::vector<Constraint> cons;
  for (int d = 0; d < days; ++d) {
    std::vector<std::size_t> scope;
    for (int s = 0; s < shifts; ++s)
      for (int k = 0; k < per_shift; ++k)
        scope.push_back(nurse_variable(d, s, k, shifts, per_shift));
    cons.push_back(make_all_different(std::move(scope), nurses));
  }
  for (int d = 0; d + 1 < days; ++d)
    for (int a = 0; a < per_shift; ++a)
      for (int b = 0; b < per_shift; ++b)
        cons.push_back(NotEqual{nurse_variable(d, shifts - 1, a, shifts, per_shift),
                                nurse_variable(d + 1, 0, b, shifts, per_shift), 1.0});
  return CspInstance(nurses, std::move(tuples), {}, std::move(cons));
}

CspInstance build_maxcut(const WeightedGraph& graph) {
  std::vector<std::vector<int>> tuples;
  for (std::size_t v = 0; v < graph.vertex_count(); ++v) tuples.push_back({static_cast<int>(v)});
  std::vector<Constraint> cons;
  for (const auto& e : graph.edges()) cons.push_back(NotEqual{e.u, e.v, e.weight});
  return CspInstance(2, std::move(tuples), {}, std::move(cons), Mode::maximization);
}

}  // namespace refinecsp
