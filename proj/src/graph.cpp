#include "refinecsp/graph.hpp"

#include <string>
#include <utility>

#include "refinecsp/error.hpp"

namespace refinecsp {

namespace {

std::uint64_t edge_key(std::size_t u, std::size_t v) {
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
}

}  // namespace

WeightedGraph::WeightedGraph(std::size_t vertex_count, std::vector<WeightedEdge> edges)
    : n_(vertex_count) {
  edges_.reserve(edges.size());
  for (const auto& e : edges) add_edge(e.u, e.v, e.weight);
}

void WeightedGraph::add_edge(std::size_t u, std::size_t v, double weight) {
  if (u >= n_ || v >= n_)
    fail(ErrorKind::out_of_range, "edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                      ") outside vertex range " + std::to_string(n_));
  if (u == v) fail(ErrorKind::invalid_argument, "self-loop on vertex " + std::to_string(u));
  if (u > v) std::swap(u, v);
  if (!keys_.insert(edge_key(u, v)).second)
    fail(ErrorKind::invalid_argument,
         "duplicate edge (" + std::to_string(u) + ", " + std::to_string(v) + ")");
  edges_.push_back({u, v, weight});
}

bool WeightedGraph::has_edge(std::size_t u, std::size_t v) const {
  if (u > v) std::swap(u, v);
  return keys_.count(edge_key(u, v)) > 0;
}

std::vector<std::vector<std::size_t>> WeightedGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(n_);
  for (const auto& e : edges_) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  return adj;
}

}  // namespace refinecsp
