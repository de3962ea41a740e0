#pragma once

#include <cstddef>
#include <cstdint>
#include <unordered_set>
#include <vector>

namespace refinecsp {

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 1.0;

  bool operator==(const WeightedEdge&) const = default;
};

/// Simple undirected graph. Edges are stored with u < v, without duplicates.
class WeightedGraph {
 public:
  WeightedGraph() = default;
  explicit WeightedGraph(std::size_t vertex_count) : n_(vertex_count) {}
  /// Validates and normalizes orientation (u < v); throws on self-loops,
  /// duplicates or out-of-range endpoints.
  WeightedGraph(std::size_t vertex_count, std::vector<WeightedEdge> edges);

  void add_edge(std::size_t u, std::size_t v, double weight = 1.0);

  std::size_t vertex_count() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<WeightedEdge>& edges() const { return edges_; }
  std::vector<std::vector<std::size_t>> adjacency() const;

  bool operator==(const WeightedGraph& o) const { return n_ == o.n_ && edges_ == o.edges_; }
  bool has_edge(std::size_t u, std::size_t v) const;

 private:
  std::size_t n_ = 0;
  std::vector<WeightedEdge> edges_;
  std::unordered_set<std::uint64_t> keys_;
};

}  // namespace refinecsp
