#pragma once

// Shared pieces of the constraint-based algorithms: the level-wise skeleton
// search with separating-set bookkeeping (used verbatim by both PC and FCI)
// and the weighted-DAG result type of the score/ICA-based algorithms.

#include <algorithm>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "calibench/citests.hpp"
#include "calibench/dataset.hpp"
#include "calibench/graphs.hpp"

namespace calibench::discovery {

enum class CiTestKind { Auto, FisherZ, GSquare };

inline citests::CiDecision run_ci_test(CiTestKind kind, const data::Dataset& ds, int i, int j,
                                       const std::vector<int>& s, double alpha) {
  switch (kind) {
    case CiTestKind::FisherZ: return citests::ci_test_fisher_z(ds, i, j, s, alpha);
    case CiTestKind::GSquare: return citests::ci_test_gsquare(ds, i, j, s, alpha);
    case CiTestKind::Auto: return citests::ci_test_auto(ds, i, j, s, alpha);
  }
  throw std::logic_error("run_ci_test: bad test kind");
}

// Separating sets recorded for exactly the pairs removed during the skeleton
// search, keyed with the smaller node first.
class SepsetTable {
 public:
  void record(int i, int j, std::vector<int> s) { table_[key(i, j)] = std::move(s); }
  bool contains_pair(int i, int j) const { return table_.contains(key(i, j)); }

  const std::vector<int>& at(int i, int j) const {
    auto it = table_.find(key(i, j));
    if (it == table_.end()) throw std::invalid_argument("SepsetTable: pair was never separated");
    return it->second;
  }

  bool separates_with(int i, int j, int k) const {
    auto it = table_.find(key(i, j));
    if (it == table_.end()) return false;
    return std::find(it->second.begin(), it->second.end(), k) != it->second.end();
  }

  std::size_t size() const { return table_.size(); }

 private:
  static std::pair<int, int> key(int i, int j) { return {std::min(i, j), std::max(i, j)}; }
  std::map<std::pair<int, int>, std::vector<int>> table_;
};

namespace detail {

// Lexicographic size-k subsets of a candidate pool, visited in order.
template <typename Fn>
bool for_each_subset(const std::vector<int>& pool, int k, Fn&& fn) {
  if (k > static_cast<int>(pool.size())) return false;
  std::vector<int> pick(static_cast<std::size_t>(k));
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) idx[static_cast<std::size_t>(t)] = t;
  while (true) {
    for (int t = 0; t < k; ++t) pick[static_cast<std::size_t>(t)] = pool[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])];
    if (fn(pick)) return true;
    int t = k - 1;
    while (t >= 0 && idx[static_cast<std::size_t>(t)] == static_cast<int>(pool.size()) - k + t) --t;
    if (t < 0) return false;
    ++idx[static_cast<std::size_t>(t)];
    for (int u = t + 1; u < k; ++u) idx[static_cast<std::size_t>(u)] = idx[static_cast<std::size_t>(u - 1)] + 1;
  }
}

}  // namespace detail

struct SkeletonResult {
  graphs::MixedGraph graph;
  SepsetTable sepsets;
};

// Level-wise skeleton search: starting from the complete undirected graph,
// at level l remove i-j when some S of size l drawn from adj(i)\{j} or
// adj(j)\{i} tests independent, recording S. Stops when no adjacency offers
// a conditioning set of the current size.
inline SkeletonResult skeleton_search(const data::Dataset& ds, double alpha, CiTestKind test) {
  int d = ds.cols();
  graphs::MixedGraph g(d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) g.add_undirected(i, j);
  SepsetTable sepsets;

  for (int level = 0;; ++level) {
    bool any_candidate = false;
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        if (!g.has_edge(i, j)) continue;
        bool removed = false;
        for (int side = 0; side < 2 && !removed; ++side) {
          int a = side == 0 ? i : j;
          int b = side == 0 ? j : i;
          std::vector<int> pool = g.adjacent(a);
          std::erase(pool, b);
          if (static_cast<int>(pool.size()) < level) continue;
          any_candidate = true;
          if (side == 1 && level == 0) continue;  // empty set already tested
          removed = detail::for_each_subset(pool, level, [&](const std::vector<int>& s) {
            if (side == 1) {
              // The i-side already tested this exact set when it is shared.
              std::vector<int> other = g.adjacent(i);
              std::erase(other, j);
              bool subset_of_other = std::all_of(s.begin(), s.end(), [&](int v) {
                return std::find(other.begin(), other.end(), v) != other.end();
              });
              if (subset_of_other) return false;
            }
            citests::CiDecision dec = run_ci_test(test, ds, i, j, s, alpha);
            if (dec.independent) {
              g.remove_edge(i, j);
              sepsets.record(i, j, s);
              return true;
            }
            return false;
          });
        }
      }
    }
    if (!any_candidate) break;
  }
  return {std::move(g), std::move(sepsets)};
}

// Weighted adjacency result of LiNGAM / continuous-optimization algorithms.
// w(i, j) is the coefficient of edge i -> j; entries at or below
// threshold_used have been zeroed, and the surviving support is acyclic.
struct WeightedDag {
  Eigen::MatrixXd w;
  double threshold_used = 0.0;

  graphs::MixedGraph support() const {
    int d = static_cast<int>(w.rows());
    graphs::MixedGraph g(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j && w(i, j) != 0.0) g.add_directed(i, j);
    return g;
  }
};

}  // namespace calibench::discovery
