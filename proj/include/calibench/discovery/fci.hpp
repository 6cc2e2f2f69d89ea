#pragma once

// FCI: the PC skeleton phase reused verbatim, edges reset to circle-circle,
// v-structures stamped as arrowheads, then the first four mark-propagation
// orientation rules to a fixpoint (R4 via discriminating-path search with
// the separating-set decision). Later rules and the possible-d-sep phase are
// out of scope; the output is the correspondingly partial PAG.

#include <map>
#include <set>
#include <utility>
#include <vector>

#include "calibench/discovery/common.hpp"
#include "calibench/graphs.hpp"

namespace calibench::discovery {

namespace detail {

using graphs::Mark;
using graphs::MixedGraph;

// mark at y's end of edge x-y
inline Mark at(const MixedGraph& g, int x, int y) { return g.endpoint(x, y); }

inline bool arrow_into(const MixedGraph& g, int x, int y) {
  return g.has_edge(x, y) && at(g, x, y) == Mark::Arrow;
}

// R1: a *-> b o-* c with a, c nonadjacent  =>  b -> c.
inline bool fci_r1(MixedGraph& g) {
  int d = g.node_count();
  for (int b = 0; b < d; ++b) {
    for (int a : g.adjacent(b)) {
      if (!arrow_into(g, a, b)) continue;
      for (int c : g.adjacent(b)) {
        if (c == a || g.has_edge(a, c)) continue;
        if (at(g, c, b) != Mark::Circle) continue;
        g.set_endpoint(c, b, Mark::Tail);
        g.set_endpoint(b, c, Mark::Arrow);
        return true;
      }
    }
  }
  return false;
}

// R2: a -> b *-> c or a *-> b -> c, with a *-o c  =>  a *-> c.
inline bool fci_r2(MixedGraph& g) {
  int d = g.node_count();
  for (int a = 0; a < d; ++a) {
    for (int c : g.adjacent(a)) {
      if (at(g, a, c) != Mark::Circle) continue;
      for (int b : g.adjacent(a)) {
        if (b == c || !g.has_edge(b, c)) continue;
        bool chain1 = g.is_directed(a, b) && arrow_into(g, b, c);
        bool chain2 = arrow_into(g, a, b) && g.is_directed(b, c);
        if (chain1 || chain2) {
          g.set_endpoint(a, c, Mark::Arrow);
          return true;
        }
      }
    }
  }
  return false;
}

// R3: a *-> b <-* c, a *-o e o-* c, a, c nonadjacent, e *-o b  =>  e *-> b.
inline bool fci_r3(MixedGraph& g) {
  int d = g.node_count();
  for (int b = 0; b < d; ++b) {
    for (int e : g.adjacent(b)) {
      if (at(g, e, b) != Mark::Circle) continue;
      for (int a : g.adjacent(b)) {
        if (a == e || !arrow_into(g, a, b)) continue;
        if (!g.has_edge(a, e) || at(g, a, e) != Mark::Circle) continue;
        for (int c : g.adjacent(b)) {
          if (c == a || c == e || !arrow_into(g, c, b)) continue;
          if (g.has_edge(a, c)) continue;
          if (!g.has_edge(c, e) || at(g, c, e) != Mark::Circle) continue;
          g.set_endpoint(e, b, Mark::Arrow);
          return true;
        }
      }
    }
  }
  return false;
}

// R4: a discriminating path <u, ..., a, b, c> for b (every vertex strictly
// between u and b a collider on the path and a parent of c, u nonadjacent to
// c) with a circle at b on edge b-c. If b separated u from c, the edge
// becomes b -> c; otherwise the triple collides: a <-> b <-> c.
inline bool fci_r4(MixedGraph& g, const SepsetTable& sepsets) {
  int d = g.node_count();
  for (int b = 0; b < d; ++b) {
    for (int c : g.adjacent(b)) {
      if (at(g, c, b) != Mark::Circle) continue;
      for (int a : g.adjacent(b)) {
        if (a == c || !g.has_edge(a, c)) continue;
        if (!g.is_directed(a, c)) continue;  // a must be a parent of c
        // BFS backwards from a for the path start.
        std::map<int, int> prev{{a, b}};
        std::set<int> visited{a, b, c};
        std::vector<int> queue{a};
        while (!queue.empty()) {
          int t = queue.back();
          queue.pop_back();
          int p = prev.at(t);
          for (int u : g.adjacent(t)) {
            if (visited.contains(u)) continue;
            if (!arrow_into(g, u, t) || !arrow_into(g, p, t)) continue;  // collider at t
            prev[u] = t;
            if (!g.has_edge(u, c)) {
              if (sepsets.separates_with(u, c, b)) {
                g.set_endpoint(c, b, Mark::Tail);
                g.set_endpoint(b, c, Mark::Arrow);
              } else {
                g.set_endpoint(b, a, Mark::Arrow);
                g.set_endpoint(a, b, Mark::Arrow);
                g.set_endpoint(c, b, Mark::Arrow);
                g.set_endpoint(b, c, Mark::Arrow);
              }
              return true;
            }
            if (g.is_directed(u, c)) {
              visited.insert(u);
              queue.push_back(u);
            }
          }
        }
      }
    }
  }
  return false;
}

}  // namespace detail

inline graphs::MixedGraph fci(const data::Dataset& ds, double alpha,
                              CiTestKind test = CiTestKind::Auto) {
  SkeletonResult sk = skeleton_search(ds, alpha, test);
  const SepsetTable& sepsets = sk.sepsets;
  int d = sk.graph.node_count();

  graphs::MixedGraph g(d);
  for (auto [i, j] : graphs::skeleton(sk.graph))
    g.add_edge(i, j, graphs::Mark::Circle, graphs::Mark::Circle);

  // V-structures: arrowheads at the collider, circles left at the shields.
  for (int k = 0; k < d; ++k) {
    std::vector<int> nbrs = g.adjacent(k);
    for (std::size_t x = 0; x < nbrs.size(); ++x) {
      for (std::size_t y = x + 1; y < nbrs.size(); ++y) {
        int i = nbrs[x], j = nbrs[y];
        if (g.has_edge(i, j)) continue;
        if (!sepsets.contains_pair(i, j)) continue;
        if (sepsets.separates_with(i, j, k)) continue;
        g.set_endpoint(i, k, graphs::Mark::Arrow);
        g.set_endpoint(j, k, graphs::Mark::Arrow);
      }
    }
  }

  bool changed = true;
  while (changed) {
    changed = detail::fci_r1(g) || detail::fci_r2(g) || detail::fci_r3(g) ||
              detail::fci_r4(g, sepsets);
  }
  return g;
}

}  // namespace calibench::discovery
