#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cgm/sets.hpp"

namespace cgm {

// A mixed graph with directed and undirected edges and per-vertex level
// counts, validated on construction: positive integer labels, levels >= 2,
// each vertex pair carries at most one edge, and no semi-directed cycle
// (a cycle that follows undirected edges either way and directed edges
// forward, using at least one directed edge).
class ChainGraph {
 public:
  ChainGraph(VertexSet vertices, std::map<Vertex, int> levels,
             std::vector<std::pair<Vertex, Vertex>> directed,
             std::vector<std::pair<Vertex, Vertex>> undirected);

  // Text format, one declaration per line:
  //   states 1=2 2=3 ...   (optional; vertices default to 2 levels)
  //   1 -> 3               (directed edge)
  //   3 -- 4               (undirected edge)
  // '#' starts a comment; blank lines and extra whitespace are ignored.
  static ChainGraph parse(const std::string& text);
  static ChainGraph load(const std::string& path);

  const VertexSet& vertices() const { return vertices_; }
  int level(Vertex v) const;
  std::vector<int> levels_of(const VertexSet& s) const;
  const std::vector<std::pair<Vertex, Vertex>>& directed_edges() const { return directed_; }
  const std::vector<std::pair<Vertex, Vertex>>& undirected_edges() const { return undirected_; }

  bool has_vertex(Vertex v) const { return contains(vertices_, v); }
  bool has_directed(Vertex v, Vertex w) const;    // v -> w
  bool has_undirected(Vertex v, Vertex w) const;  // v -- w

  const VertexSet& parents(Vertex v) const;    // pa(v)
  const VertexSet& neighbors(Vertex v) const;  // nb(v)

  // Set versions subtract sigma itself: pa(sigma), nb(sigma), Nb(sigma).
  VertexSet parent_set(const VertexSet& sigma) const;
  VertexSet neighbor_set(const VertexSet& sigma) const;
  VertexSet closed_neighbor_set(const VertexSet& sigma) const;

 private:
  void check_vertex(Vertex v) const;

  VertexSet vertices_;
  std::map<Vertex, int> levels_;
  std::vector<std::pair<Vertex, Vertex>> directed_;
  std::vector<std::pair<Vertex, Vertex>> undirected_;
  std::map<Vertex, VertexSet> parents_;
  std::map<Vertex, VertexSet> neighbors_;
};

struct Neighborhoods {
  VertexSet pa, nb, closed_nb;
};
Neighborhoods neighborhoods(const ChainGraph& g, const VertexSet& sigma);

// Chain components (equivalence classes under undirected connectivity) and
// the acyclic digraph they induce. Components are sorted by smallest member;
// edges use component indices.
class ComponentDag {
 public:
  ComponentDag(std::vector<VertexSet> components, std::vector<std::pair<int, int>> edges,
               std::vector<int> topological_order, std::map<Vertex, int> component_of);

  const std::vector<VertexSet>& components() const { return components_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& topological_order() const { return topological_order_; }

  int component_of(Vertex v) const;
  int index_of(const VertexSet& tau) const;  // error if tau is not a component

  VertexSet parents(int t) const;          // union of parent components
  VertexSet non_descendants(int t) const;  // union of components not reachable from t

 private:
  std::vector<VertexSet> components_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> topological_order_;
  std::map<Vertex, int> component_of_;
  std::vector<std::vector<int>> children_;  // adjacency by component index
};

ComponentDag chain_components(const ChainGraph& g);

struct DagRelations {
  VertexSet pa, nd;
};
DagRelations dag_relations(const ComponentDag& d, const VertexSet& tau);

// All nonempty connected subsets of tau (in the undirected induced subgraph),
// ordered by size then lexicographically. |tau| > cap is an error.
std::vector<VertexSet> connected_sets(const ChainGraph& g, const VertexSet& tau, int cap = 16);

// Connected components of the induced undirected subgraph on delta; delta
// must be a nonempty subset of a single chain component.
std::vector<VertexSet> maximal_connected_partition(const ChainGraph& g, const VertexSet& delta);

}  // namespace cgm
