#include "cgm/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "cgm/error.hpp"

namespace cgm {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& msg) {
  throw DomainError("graph_core", code, msg);
}

std::string edge_to_string(Vertex a, Vertex b, bool directed) {
  return std::to_string(a) + (directed ? " -> " : " -- ") + std::to_string(b);
}

// Undirected path a..b inside one chain component, for cycle reporting.
std::vector<Vertex> undirected_path(const std::map<Vertex, VertexSet>& nb, Vertex a, Vertex b) {
  std::map<Vertex, Vertex> prev;
  std::deque<Vertex> queue{a};
  prev[a] = a;
  while (!queue.empty()) {
    Vertex v = queue.front();
    queue.pop_front();
    if (v == b) break;
    auto it = nb.find(v);
    if (it == nb.end()) continue;
    for (Vertex w : it->second)
      if (!prev.count(w)) {
        prev[w] = v;
        queue.push_back(w);
      }
  }
  std::vector<Vertex> path{b};
  while (path.back() != a) path.push_back(prev.at(path.back()));
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

ChainGraph::ChainGraph(VertexSet vertices, std::map<Vertex, int> levels,
                       std::vector<std::pair<Vertex, Vertex>> directed,
                       std::vector<std::pair<Vertex, Vertex>> undirected)
    : vertices_(std::move(vertices)),
      levels_(std::move(levels)),
      directed_(std::move(directed)),
      undirected_(std::move(undirected)) {
  for (Vertex v : vertices_) {
    if (v <= 0) fail("bad_vertex", "vertex labels must be positive integers, got " + std::to_string(v));
    if (!levels_.count(v)) levels_[v] = 2;
  }
  for (const auto& [v, d] : levels_) {
    if (!has_vertex(v))
      fail("unknown_vertex", "level declared for unknown vertex " + std::to_string(v));
    if (d < 2)
      fail("bad_level", "vertex " + std::to_string(v) + " must have at least 2 levels, got " + std::to_string(d));
  }

  std::map<std::pair<Vertex, Vertex>, bool> seen;  // unordered pair -> directed?
  auto check_pair = [&](Vertex a, Vertex b, bool dir) {
    if (!has_vertex(a) || !has_vertex(b))
      fail("unknown_vertex", "edge " + edge_to_string(a, b, dir) + " uses an undeclared vertex");
    if (a == b) fail("self_loop", "self loop at vertex " + std::to_string(a));
    auto key = std::minmax(a, b);
    auto [it, fresh] = seen.emplace(key, dir);
    if (!fresh) {
      const char* what = (it->second == dir) ? "duplicate_edge" : "conflicting_edge";
      fail(what, "vertex pair {" + std::to_string(key.first) + "," + std::to_string(key.second) +
                     "} declared more than once");
    }
  };
  for (auto& [v, w] : directed_) check_pair(v, w, true);
  for (auto& [v, w] : undirected_) check_pair(v, w, false);

  for (Vertex v : vertices_) {
    parents_[v];
    neighbors_[v];
  }
  for (auto& [v, w] : directed_) parents_[w].push_back(v);
  for (auto& [v, w] : undirected_) {
    neighbors_[v].push_back(w);
    neighbors_[w].push_back(v);
  }
  for (auto& [v, s] : parents_) s = make_set(std::move(s));
  for (auto& [v, s] : neighbors_) s = make_set(std::move(s));

  // Semi-directed cycle check: contract undirected components; a directed
  // edge inside a component, or a directed cycle among components, is
  // exactly a semi-directed cycle.
  std::map<Vertex, int> comp;
  std::vector<std::vector<Vertex>> members;
  for (Vertex v : vertices_) {
    if (comp.count(v)) continue;
    int id = static_cast<int>(members.size());
    members.emplace_back();
    std::deque<Vertex> queue{v};
    comp[v] = id;
    while (!queue.empty()) {
      Vertex x = queue.front();
      queue.pop_front();
      members[id].push_back(x);
      for (Vertex y : neighbors_[x])
        if (!comp.count(y)) {
          comp[y] = id;
          queue.push_back(y);
        }
    }
  }

  auto report_cycle = [&](const std::vector<Vertex>& verts, const std::vector<bool>& dir) {
    std::string s;
    for (std::size_t i = 0; i < verts.size(); ++i) {
      s += std::to_string(verts[i]);
      s += dir[i] ? " -> " : " -- ";
    }
    s += std::to_string(verts[0]);
    fail("semi_directed_cycle", "semi-directed cycle: " + s);
  };

  for (auto& [v, w] : directed_) {
    if (comp[v] != comp[w]) continue;
    auto path = undirected_path(neighbors_, w, v);  // w -- ... -- v, then v -> w closes
    std::vector<Vertex> verts{v};
    std::vector<bool> dir{true};
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      verts.push_back(path[i]);
      dir.push_back(false);
    }
    report_cycle(verts, dir);
  }

  int ncomp = static_cast<int>(members.size());
  std::vector<std::vector<int>> succ(ncomp);
  // One representative directed edge per component pair, for reporting.
  std::map<std::pair<int, int>, std::pair<Vertex, Vertex>> witness;
  for (auto& [v, w] : directed_) {
    int a = comp[v], b = comp[w];
    succ[a].push_back(b);
    witness.emplace(std::make_pair(a, b), std::make_pair(v, w));
  }

  // DFS for a directed cycle among components.
  std::vector<int> state(ncomp, 0);  // 0 new, 1 on stack, 2 done
  std::vector<int> stack, pos(ncomp, -1);
  auto dfs = [&](auto&& self, int c) -> std::vector<int> {
    state[c] = 1;
    pos[c] = static_cast<int>(stack.size());
    stack.push_back(c);
    for (int d : succ[c]) {
      if (state[d] == 1)
        return std::vector<int>(stack.begin() + pos[d], stack.end());
      if (state[d] == 0) {
        auto cyc = self(self, d);
        if (!cyc.empty()) return cyc;
      }
    }
    stack.pop_back();
    state[c] = 2;
    return {};
  };
  for (int c = 0; c < ncomp; ++c) {
    if (state[c] != 0) continue;
    auto cyc = dfs(dfs, c);
    if (cyc.empty()) continue;
    // Stitch the component cycle into a vertex cycle: cross with the witness
    // directed edge, then walk undirected edges to the next departure point.
    std::vector<Vertex> verts;
    std::vector<bool> dir;
    int k = static_cast<int>(cyc.size());
    std::vector<std::pair<Vertex, Vertex>> cross(k);
    for (int i = 0; i < k; ++i) cross[i] = witness.at({cyc[i], cyc[(i + 1) % k]});
    for (int i = 0; i < k; ++i) {
      Vertex arrive = cross[(i + k - 1) % k].second;  // entry into cyc[i]
      Vertex depart = cross[i].first;                 // exit from cyc[i]
      auto path = undirected_path(neighbors_, arrive, depart);
      for (std::size_t j = 0; j + 1 < path.size(); ++j) {
        verts.push_back(path[j]);
        dir.push_back(false);
      }
      verts.push_back(depart);
      dir.push_back(true);
    }
    report_cycle(verts, dir);
  }
}

ChainGraph ChainGraph::parse(const std::string& text) {
  VertexSet vertices;
  std::map<Vertex, int> levels;
  std::vector<std::pair<Vertex, Vertex>> directed, undirected;

  auto parse_vertex = [](const std::string& tok, int line) -> Vertex {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      fail("syntax", "line " + std::to_string(line) + ": expected a vertex label, got '" + tok + "'");
    }
    if (pos != tok.size() || v <= 0)
      fail("syntax", "line " + std::to_string(line) + ": vertex labels are positive integers, got '" + tok + "'");
    return v;
  };

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;

    if (tokens[0] == "states") {
      if (tokens.size() == 1)
        fail("syntax", "line " + std::to_string(lineno) + ": states line needs v=d entries");
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        auto eq = tokens[i].find('=');
        if (eq == std::string::npos)
          fail("syntax", "line " + std::to_string(lineno) + ": expected v=d, got '" + tokens[i] + "'");
        Vertex v = parse_vertex(tokens[i].substr(0, eq), lineno);
        std::string dstr = tokens[i].substr(eq + 1);
        std::size_t pos = 0;
        int d = 0;
        try {
          d = std::stoi(dstr, &pos);
        } catch (const std::exception&) {
          pos = std::string::npos;
        }
        if (pos != dstr.size())
          fail("syntax", "line " + std::to_string(lineno) + ": bad level count '" + dstr + "'");
        if (levels.count(v))
          fail("duplicate_states", "line " + std::to_string(lineno) + ": levels for vertex " +
                                       std::to_string(v) + " declared twice");
        levels[v] = d;
        vertices.push_back(v);
      }
      continue;
    }

    // Edge line: rejoin tokens so both "1 -> 2" and "1->2" parse.
    std::string flat;
    for (const auto& t : tokens) flat += t;
    bool dir = true;
    auto at = flat.find("->");
    if (at == std::string::npos) {
      dir = false;
      at = flat.find("--");
    }
    if (at == std::string::npos || at == 0 || at + 2 >= flat.size())
      fail("syntax", "line " + std::to_string(lineno) + ": expected 'v -> w', 'v -- w' or 'states ...'");
    Vertex a = parse_vertex(flat.substr(0, at), lineno);
    Vertex b = parse_vertex(flat.substr(at + 2), lineno);
    (dir ? directed : undirected).emplace_back(a, b);
    vertices.push_back(a);
    vertices.push_back(b);
  }

  if (vertices.empty()) fail("empty", "graph has no vertices");
  return ChainGraph(make_set(std::move(vertices)), std::move(levels), std::move(directed),
                    std::move(undirected));
}

ChainGraph ChainGraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open graph file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ChainGraph::check_vertex(Vertex v) const {
  if (!has_vertex(v)) fail("unknown_vertex", "unknown vertex " + std::to_string(v));
}

int ChainGraph::level(Vertex v) const {
  check_vertex(v);
  return levels_.at(v);
}

std::vector<int> ChainGraph::levels_of(const VertexSet& s) const {
  std::vector<int> out;
  out.reserve(s.size());
  for (Vertex v : s) out.push_back(level(v));
  return out;
}

bool ChainGraph::has_directed(Vertex v, Vertex w) const {
  return std::find(directed_.begin(), directed_.end(), std::make_pair(v, w)) != directed_.end();
}

bool ChainGraph::has_undirected(Vertex v, Vertex w) const {
  if (v > w) std::swap(v, w);
  for (auto& [a, b] : undirected_) {
    auto [lo, hi] = std::minmax(a, b);
    if (lo == v && hi == w) return true;
  }
  return false;
}

const VertexSet& ChainGraph::parents(Vertex v) const {
  check_vertex(v);
  return parents_.at(v);
}

const VertexSet& ChainGraph::neighbors(Vertex v) const {
  check_vertex(v);
  return neighbors_.at(v);
}

VertexSet ChainGraph::parent_set(const VertexSet& sigma) const {
  VertexSet out;
  for (Vertex v : sigma) out = set_union(out, parents(v));
  return set_minus(out, sigma);
}

VertexSet ChainGraph::neighbor_set(const VertexSet& sigma) const {
  VertexSet out;
  for (Vertex v : sigma) out = set_union(out, neighbors(v));
  return set_minus(out, sigma);
}

VertexSet ChainGraph::closed_neighbor_set(const VertexSet& sigma) const {
  return set_union(neighbor_set(sigma), sigma);
}

Neighborhoods neighborhoods(const ChainGraph& g, const VertexSet& sigma) {
  for (Vertex v : sigma)
    if (!g.has_vertex(v)) fail("unknown_vertex", "unknown vertex " + std::to_string(v));
  Neighborhoods nh;
  nh.pa = g.parent_set(sigma);
  nh.nb = g.neighbor_set(sigma);
  nh.closed_nb = g.closed_neighbor_set(sigma);
  return nh;
}

ComponentDag::ComponentDag(std::vector<VertexSet> components, std::vector<std::pair<int, int>> edges,
                           std::vector<int> topological_order, std::map<Vertex, int> component_of)
    : components_(std::move(components)),
      edges_(std::move(edges)),
      topological_order_(std::move(topological_order)),
      component_of_(std::move(component_of)),
      children_(components_.size()) {
  for (auto& [a, b] : edges_) children_[a].push_back(b);
}

int ComponentDag::component_of(Vertex v) const {
  auto it = component_of_.find(v);
  if (it == component_of_.end()) fail("unknown_vertex", "unknown vertex " + std::to_string(v));
  return it->second;
}

int ComponentDag::index_of(const VertexSet& tau) const {
  for (std::size_t i = 0; i < components_.size(); ++i)
    if (components_[i] == tau) return static_cast<int>(i);
  fail("unknown_component", set_to_string(tau) + " is not a chain component");
}

VertexSet ComponentDag::parents(int t) const {
  VertexSet out;
  for (auto& [a, b] : edges_)
    if (b == t) out = set_union(out, components_[a]);
  return out;
}

VertexSet ComponentDag::non_descendants(int t) const {
  std::vector<bool> reach(components_.size(), false);
  std::deque<int> queue{t};
  reach[t] = true;
  while (!queue.empty()) {
    int c = queue.front();
    queue.pop_front();
    for (int d : children_[c])
      if (!reach[d]) {
        reach[d] = true;
        queue.push_back(d);
      }
  }
  VertexSet out;
  for (std::size_t i = 0; i < components_.size(); ++i)
    if (!reach[i]) out = set_union(out, components_[i]);
  return out;
}

ComponentDag chain_components(const ChainGraph& g) {
  std::map<Vertex, int> comp;
  std::vector<VertexSet> components;
  for (Vertex v : g.vertices()) {
    if (comp.count(v)) continue;
    VertexSet members;
    std::deque<Vertex> queue{v};
    comp[v] = -1;  // provisional mark
    while (!queue.empty()) {
      Vertex x = queue.front();
      queue.pop_front();
      members.push_back(x);
      for (Vertex y : g.neighbors(x))
        if (!comp.count(y)) {
          comp[y] = -1;
          queue.push_back(y);
        }
    }
    components.push_back(make_set(std::move(members)));
  }
  std::sort(components.begin(), components.end(),
            [](const VertexSet& a, const VertexSet& b) { return a.front() < b.front(); });
  for (std::size_t i = 0; i < components.size(); ++i)
    for (Vertex v : components[i]) comp[v] = static_cast<int>(i);

  std::vector<std::pair<int, int>> edges;
  for (auto& [v, w] : g.directed_edges()) {
    std::pair<int, int> e{comp[v], comp[w]};
    if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
  }
  std::sort(edges.begin(), edges.end());

  // Kahn's algorithm; ties broken by component index for determinism.
  std::vector<int> indeg(components.size(), 0);
  for (auto& [a, b] : edges) ++indeg[b];
  std::vector<int> order;
  std::vector<bool> used(components.size(), false);
  while (order.size() < components.size()) {
    for (std::size_t i = 0; i < components.size(); ++i) {
      if (used[i] || indeg[i] != 0) continue;
      used[i] = true;
      order.push_back(static_cast<int>(i));
      for (auto& [a, b] : edges)
        if (a == static_cast<int>(i)) --indeg[b];
      break;
    }
  }
  return ComponentDag(std::move(components), std::move(edges), std::move(order), std::move(comp));
}

DagRelations dag_relations(const ComponentDag& d, const VertexSet& tau) {
  int t = d.index_of(tau);
  return DagRelations{d.parents(t), d.non_descendants(t)};
}

std::vector<VertexSet> connected_sets(const ChainGraph& g, const VertexSet& tau, int cap) {
  for (Vertex v : tau)
    if (!g.has_vertex(v)) fail("unknown_vertex", "unknown vertex " + std::to_string(v));
  if (static_cast<int>(tau.size()) > cap)
    fail("cap_exceeded", "subset enumeration over " + std::to_string(tau.size()) +
                             " vertices exceeds the cap of " + std::to_string(cap));
  std::vector<VertexSet> out;
  std::size_t n = tau.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    VertexSet sigma;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) sigma.push_back(tau[i]);
    // Connectivity of the induced undirected subgraph.
    std::deque<Vertex> queue{sigma[0]};
    VertexSet seen{sigma[0]};
    while (!queue.empty()) {
      Vertex v = queue.front();
      queue.pop_front();
      for (Vertex w : g.neighbors(v))
        if (contains(sigma, w) && !contains(seen, w)) {
          seen = set_union(seen, {w});
          queue.push_back(w);
        }
    }
    if (seen.size() == sigma.size()) out.push_back(std::move(sigma));
  }
  std::sort(out.begin(), out.end(), [](const VertexSet& a, const VertexSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

std::vector<VertexSet> maximal_connected_partition(const ChainGraph& g, const VertexSet& delta) {
  if (delta.empty()) fail("empty_set", "maximal_connected_partition needs a nonempty set");
  ComponentDag d = chain_components(g);
  int c0 = d.component_of(delta.front());
  for (Vertex v : delta)
    if (d.component_of(v) != c0)
      fail("cross_component", set_to_string(delta) + " spans more than one chain component");

  std::vector<VertexSet> out;
  VertexSet assigned;
  for (Vertex v : delta) {
    if (contains(assigned, v)) continue;
    VertexSet block{v};
    std::deque<Vertex> queue{v};
    while (!queue.empty()) {
      Vertex x = queue.front();
      queue.pop_front();
      for (Vertex y : g.neighbors(x))
        if (contains(delta, y) && !contains(block, y)) {
          block = set_union(block, {y});
          queue.push_back(y);
        }
    }
    assigned = set_union(assigned, block);
    out.push_back(std::move(block));
  }
  std::sort(out.begin(), out.end(),
            [](const VertexSet& a, const VertexSet& b) { return a.front() < b.front(); });
  return out;
}

}  // namespace cgm
