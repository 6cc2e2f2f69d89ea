#pragma once

// Mixed-mark graphs shared by every stage of the pipeline. A single
// representation covers DAGs, CPDAGs, and PAGs: each edge i-j stores one
// endpoint mark per side (tail / arrow / circle). A directed edge i->j is
// tail at i, arrow at j; an undirected edge is tail-tail; circle marks are
// produced only by FCI.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calibench/rng.hpp"

namespace calibench::graphs {

enum class Mark : std::uint8_t { Tail, Arrow, Circle };

inline const char* mark_name(Mark m) {
  switch (m) {
    case Mark::Tail: return "tail";
    case Mark::Arrow: return "arrow";
    case Mark::Circle: return "circle";
  }
  throw std::logic_error("mark_name: bad mark");
}

inline Mark mark_from_name(const std::string& s) {
  if (s == "tail") return Mark::Tail;
  if (s == "arrow") return Mark::Arrow;
  if (s == "circle") return Mark::Circle;
  throw std::invalid_argument("unknown endpoint mark: " + s);
}

class MixedGraph {
 public:
  explicit MixedGraph(int d) : d_(d), marks_(static_cast<std::size_t>(d) * d, kNone) {
    if (d < 0) throw std::invalid_argument("MixedGraph: negative node count");
  }

  int node_count() const { return d_; }

  bool has_edge(int i, int j) const {
    check_pair(i, j);
    return marks_[idx(i, j)] != kNone;
  }

  // Mark at j's end of edge i-j.
  Mark endpoint(int i, int j) const {
    check_pair(i, j);
    std::uint8_t m = marks_[idx(i, j)];
    if (m == kNone) throw std::invalid_argument("endpoint: no edge between nodes");
    return static_cast<Mark>(m);
  }

  void add_edge(int i, int j, Mark at_i, Mark at_j) {
    check_pair(i, j);
    marks_[idx(i, j)] = static_cast<std::uint8_t>(at_j);
    marks_[idx(j, i)] = static_cast<std::uint8_t>(at_i);
  }

  void set_endpoint(int i, int j, Mark at_j) {
    if (!has_edge(i, j)) throw std::invalid_argument("set_endpoint: no edge between nodes");
    marks_[idx(i, j)] = static_cast<std::uint8_t>(at_j);
  }

  void remove_edge(int i, int j) {
    check_pair(i, j);
    marks_[idx(i, j)] = kNone;
    marks_[idx(j, i)] = kNone;
  }

  void add_directed(int i, int j) { add_edge(i, j, Mark::Tail, Mark::Arrow); }
  void add_undirected(int i, int j) { add_edge(i, j, Mark::Tail, Mark::Tail); }

  // Strictly i->j: tail at i, arrow at j.
  bool is_directed(int i, int j) const {
    return has_edge(i, j) && endpoint(j, i) == Mark::Tail && endpoint(i, j) == Mark::Arrow;
  }

  bool is_undirected(int i, int j) const {
    return has_edge(i, j) && endpoint(j, i) == Mark::Tail && endpoint(i, j) == Mark::Tail;
  }

  bool arrow_at(int i, int j) const { return has_edge(i, j) && endpoint(i, j) == Mark::Arrow; }

  std::vector<int> adjacent(int i) const {
    std::vector<int> out;
    for (int j = 0; j < d_; ++j)
      if (j != i && marks_[idx(i, j)] != kNone) out.push_back(j);
    return out;
  }

  int edge_count() const {
    int c = 0;
    for (int i = 0; i < d_; ++i)
      for (int j = i + 1; j < d_; ++j)
        if (marks_[idx(i, j)] != kNone) ++c;
    return c;
  }

  bool all_edges_directed() const {
    for (int i = 0; i < d_; ++i)
      for (int j = i + 1; j < d_; ++j)
        if (marks_[idx(i, j)] != kNone && !is_directed(i, j) && !is_directed(j, i)) return false;
    return true;
  }

  // Directed-path reachability (tail->arrow edges only).
  bool has_directed_path(int from, int to) const {
    std::vector<int> stack{from};
    std::vector<bool> seen(static_cast<std::size_t>(d_), false);
    seen[static_cast<std::size_t>(from)] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == to) return true;
      for (int v = 0; v < d_; ++v) {
        if (!seen[static_cast<std::size_t>(v)] && is_directed(u, v)) {
          seen[static_cast<std::size_t>(v)] = true;
          stack.push_back(v);
        }
      }
    }
    return false;
  }

  bool operator==(const MixedGraph& o) const { return d_ == o.d_ && marks_ == o.marks_; }

 private:
  static constexpr std::uint8_t kNone = 0xff;

  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(d_) + static_cast<std::size_t>(j);
  }

  void check_pair(int i, int j) const {
    if (i < 0 || j < 0 || i >= d_ || j >= d_ || i == j)
      throw std::invalid_argument("MixedGraph: node index out of range or self-loop");
  }

  int d_;
  std::vector<std::uint8_t> marks_;
};

// Throws if any edge is not strictly directed.
inline bool is_acyclic(const MixedGraph& g) {
  int d = g.node_count();
  if (!g.all_edges_directed())
    throw std::invalid_argument("is_acyclic: graph has non-directed edges");
  std::vector<int> indeg(static_cast<std::size_t>(d), 0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && g.is_directed(i, j)) ++indeg[static_cast<std::size_t>(j)];
  std::vector<int> queue;
  for (int i = 0; i < d; ++i)
    if (indeg[static_cast<std::size_t>(i)] == 0) queue.push_back(i);
  int removed = 0;
  while (!queue.empty()) {
    int u = queue.back();
    queue.pop_back();
    ++removed;
    for (int v = 0; v < d; ++v) {
      if (v != u && g.is_directed(u, v) && --indeg[static_cast<std::size_t>(v)] == 0)
        queue.push_back(v);
    }
  }
  return removed == d;
}

inline std::set<std::pair<int, int>> skeleton(const MixedGraph& g) {
  std::set<std::pair<int, int>> out;
  int d = g.node_count();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (g.has_edge(i, j)) out.insert({i, j});
  return out;
}

// Directed acyclic graph with ordered-pair edge list. Always acyclic.
class Dag {
 public:
  explicit Dag(int d) : d_(d) {
    if (d < 0) throw std::invalid_argument("Dag: negative node count");
  }

  Dag(int d, std::vector<std::pair<int, int>> edges) : Dag(d) {
    for (auto [i, j] : edges) add_edge(i, j);
  }

  static Dag from_mixed(const MixedGraph& g) {
    if (!is_acyclic(g)) throw std::invalid_argument("Dag::from_mixed: graph is cyclic");
    Dag out(g.node_count());
    for (int i = 0; i < g.node_count(); ++i)
      for (int j = 0; j < g.node_count(); ++j)
        if (i != j && g.is_directed(i, j)) out.add_edge(i, j);
    return out;
  }

  int node_count() const { return d_; }
  const std::set<std::pair<int, int>>& edges() const { return edges_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  bool has_edge(int i, int j) const { return edges_.contains({i, j}); }
  bool adjacent(int i, int j) const { return has_edge(i, j) || has_edge(j, i); }

  void add_edge(int i, int j) {
    if (i < 0 || j < 0 || i >= d_ || j >= d_ || i == j)
      throw std::invalid_argument("Dag: node index out of range or self-loop");
    if (creates_cycle(i, j)) throw std::invalid_argument("Dag: edge would create a cycle");
    edges_.insert({i, j});
  }

  std::vector<int> parents(int j) const {
    std::vector<int> out;
    for (auto [a, b] : edges_)
      if (b == j) out.push_back(a);
    return out;
  }

  std::vector<int> topological_order() const {
    std::vector<int> indeg(static_cast<std::size_t>(d_), 0);
    for (auto [a, b] : edges_) ++indeg[static_cast<std::size_t>(b)];
    std::vector<int> order;
    std::vector<int> ready;
    for (int i = d_ - 1; i >= 0; --i)
      if (indeg[static_cast<std::size_t>(i)] == 0) ready.push_back(i);
    while (!ready.empty()) {
      int u = ready.back();
      ready.pop_back();
      order.push_back(u);
      for (auto [a, b] : edges_)
        if (a == u && --indeg[static_cast<std::size_t>(b)] == 0) ready.push_back(b);
    }
    return order;
  }

  MixedGraph to_mixed() const {
    MixedGraph g(d_);
    for (auto [a, b] : edges_) g.add_directed(a, b);
    return g;
  }

  bool operator==(const Dag& o) const { return d_ == o.d_ && edges_ == o.edges_; }

 private:
  bool creates_cycle(int i, int j) const {
    // Path j ~> i over existing edges?
    std::vector<int> stack{j};
    std::set<int> seen{j};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == i) return true;
      for (auto [a, b] : edges_)
        if (a == u && !seen.contains(b)) {
          seen.insert(b);
          stack.push_back(b);
        }
    }
    return false;
  }

  int d_;
  std::set<std::pair<int, int>> edges_;
};

inline int max_shd(int d) { return d * (d - 1) / 2; }

// Structural Hamming distance: missing + extra + reversed adjacencies.
// A shared adjacency counts as reversed only when the prediction is strictly
// oriented against the true direction (arrow at the true source, tail at the
// true sink); tail-tail and circle-marked edges on a correct adjacency add 0.
inline int shd(const MixedGraph& pred, const Dag& truth) {
  if (pred.node_count() != truth.node_count())
    throw std::invalid_argument("shd: node-count mismatch");
  int d = pred.node_count();
  int dist = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      bool in_pred = pred.has_edge(i, j);
      bool in_truth = truth.adjacent(i, j);
      if (in_truth && !in_pred) {
        ++dist;  // missing
      } else if (!in_truth && in_pred) {
        ++dist;  // extra
      } else if (in_truth && in_pred) {
        int src = truth.has_edge(i, j) ? i : j;
        int snk = src == i ? j : i;
        if (pred.endpoint(snk, src) == Mark::Arrow && pred.endpoint(src, snk) == Mark::Tail)
          ++dist;  // reversed
      }
    }
  }
  return dist;
}

// Erdos-Renyi DAG: draw a random topological order, then include each
// forward pair independently with probability edge_prob.
inline Dag generate_er_dag(int d, double edge_prob, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("generate_er_dag: need d >= 1");
  if (edge_prob < 0.0 || edge_prob > 1.0)
    throw std::invalid_argument("generate_er_dag: edge_prob outside [0,1]");
  rng::Stream rs(seed, "er-dag");
  std::vector<int> order = rs.permutation(d);
  Dag g(d);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      if (rs.uniform() < edge_prob) g.add_edge(order[static_cast<std::size_t>(a)],
                                               order[static_cast<std::size_t>(b)]);
  return g;
}

inline nlohmann::json to_json(const MixedGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  int d = g.node_count();
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      if (!g.has_edge(i, j)) continue;
      edges.push_back({{"from", i},
                       {"to", j},
                       {"mark_from", mark_name(g.endpoint(j, i))},
                       {"mark_to", mark_name(g.endpoint(i, j))}});
    }
  }
  return {{"d", d}, {"edges", edges}};
}

inline MixedGraph graph_from_json(const nlohmann::json& j) {
  MixedGraph g(j.at("d").get<int>());
  for (const auto& e : j.at("edges")) {
    g.add_edge(e.at("from").get<int>(), e.at("to").get<int>(),
               mark_from_name(e.at("mark_from").get<std::string>()),
               mark_from_name(e.at("mark_to").get<std::string>()));
  }
  return g;
}

inline nlohmann::json to_json(const Dag& g) { return to_json(g.to_mixed()); }

inline Dag dag_from_json(const nlohmann::json& j) { return Dag::from_mixed(graph_from_json(j)); }

}  // namespace calibench::graphs
