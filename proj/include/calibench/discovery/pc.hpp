#pragma once

// PC: level-wise skeleton search, v-structure orientation from separating
// sets, then Meek's four rules to a fixpoint. Output is a pattern (CPDAG):
// directed edges where orientation is compelled, undirected edges across the
// Markov-equivalence class.

#include <utility>
#include <vector>

#include "calibench/discovery/common.hpp"
#include "calibench/graphs.hpp"

namespace calibench::discovery {

namespace detail {

// Orientation guard: refuse a -> b when it would close a directed cycle or
// manufacture an unshielded collider that no separating set licensed.
inline bool can_orient(const graphs::MixedGraph& g, int a, int b) {
  if (g.has_directed_path(b, a)) return false;
  for (int c : g.adjacent(b)) {
    if (c == a) continue;
    if (g.is_directed(c, b) && !g.has_edge(a, c)) return false;
  }
  return true;
}

inline bool orient_if_safe(graphs::MixedGraph& g, int a, int b) {
  if (!g.is_undirected(a, b)) return false;
  if (!can_orient(g, a, b)) return false;
  g.add_directed(a, b);
  return true;
}

}  // namespace detail

// Meek's rules R1-R4, applied to a fixpoint over a pattern of directed and
// undirected edges. Never removes an edge; skips any orientation that would
// introduce a directed cycle or a new v-structure.
inline graphs::MixedGraph meek_orient(graphs::MixedGraph g) {
  int d = g.node_count();
  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < d; ++a) {
      for (int b : g.adjacent(a)) {
        if (!g.is_undirected(a, b)) continue;

        bool oriented = false;
        // R1: c -> a, a - b, c and b nonadjacent  =>  a -> b.
        for (int c : g.adjacent(a)) {
          if (c != b && g.is_directed(c, a) && !g.has_edge(c, b)) {
            oriented = detail::orient_if_safe(g, a, b);
            if (oriented) break;
          }
        }
        // R2: a -> c -> b with a - b  =>  a -> b.
        if (!oriented) {
          for (int c : g.adjacent(a)) {
            if (c != b && g.is_directed(a, c) && g.is_directed(c, b)) {
              oriented = detail::orient_if_safe(g, a, b);
              if (oriented) break;
            }
          }
        }
        // R3: a - c, a - e, c -> b, e -> b, c and e nonadjacent  =>  a -> b.
        if (!oriented) {
          std::vector<int> spokes;
          for (int c : g.adjacent(a))
            if (c != b && g.is_undirected(a, c) && g.is_directed(c, b)) spokes.push_back(c);
          for (std::size_t x = 0; x < spokes.size() && !oriented; ++x)
            for (std::size_t y = x + 1; y < spokes.size() && !oriented; ++y)
              if (!g.has_edge(spokes[x], spokes[y])) oriented = detail::orient_if_safe(g, a, b);
        }
        // R4: a - e, e -> c, c -> b, e and b nonadjacent, a adjacent to c
        //     =>  a -> b (the kite).
        if (!oriented) {
          for (int e : g.adjacent(a)) {
            if (e == b || !g.is_undirected(a, e)) continue;
            for (int c : g.adjacent(e)) {
              if (c == a || c == b) continue;
              if (g.is_directed(e, c) && g.is_directed(c, b) && !g.has_edge(e, b) &&
                  g.has_edge(a, c)) {
                oriented = detail::orient_if_safe(g, a, b);
                if (oriented) break;
              }
            }
            if (oriented) break;
          }
        }
        if (oriented) changed = true;
      }
    }
  }
  return g;
}

struct PcResult {
  graphs::MixedGraph graph;
  SepsetTable sepsets;
};

inline PcResult pc(const data::Dataset& ds, double alpha, CiTestKind test = CiTestKind::Auto) {
  SkeletonResult sk = skeleton_search(ds, alpha, test);
  graphs::MixedGraph g = std::move(sk.graph);
  const SepsetTable& sepsets = sk.sepsets;
  int d = g.node_count();

  // V-structures: unshielded i - k - j with k outside sepset(i, j) becomes
  // i -> k <- j. Arrowheads accumulate; a conflicting earlier arrow at the
  // tail end is left in place.
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
        if (g.endpoint(k, i) != graphs::Mark::Arrow) g.set_endpoint(k, i, graphs::Mark::Tail);
        if (g.endpoint(k, j) != graphs::Mark::Arrow) g.set_endpoint(k, j, graphs::Mark::Tail);
      }
    }
  }

  return {meek_orient(std::move(g)), std::move(sk.sepsets)};
}

}  // namespace calibench::discovery
