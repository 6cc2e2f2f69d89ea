#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <queue>
#include <set>

#include "calibench/graphs.hpp"
#include "calibench/rng.hpp"

using namespace calibench;
using graphs::Dag;
using graphs::Mark;
using graphs::MixedGraph;

namespace {

// Oracle: breadth-first search over DAG space where one move adds, deletes,
// or reverses a single edge (staying acyclic). Ground truth for shd on fully
// directed predictions, computed with none of the library's edge logic.
using EdgeSet = std::set<std::pair<int, int>>;

bool oracle_acyclic(int d, const EdgeSet& edges) {
  std::vector<int> indeg(size_t(d), 0);
  for (auto& [a, b] : edges) ++indeg[size_t(b)];
  std::queue<int> q;
  for (int i = 0; i < d; ++i)
    if (indeg[size_t(i)] == 0) q.push(i);
  int seen = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    ++seen;
    for (auto& [a, b] : edges)
      if (a == u && --indeg[size_t(b)] == 0) q.push(b);
  }
  return seen == d;
}

int edit_distance_oracle(int d, const EdgeSet& from, const EdgeSet& to) {
  std::map<EdgeSet, int> dist{{from, 0}};
  std::queue<EdgeSet> q;
  q.push(from);
  while (!q.empty()) {
    EdgeSet cur = q.front();
    q.pop();
    if (cur == to) return dist[cur];
    int base = dist[cur];
    std::vector<EdgeSet> nexts;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        EdgeSet n = cur;
        if (cur.count({i, j})) {
          n.erase({i, j});
          nexts.push_back(n);  // delete
          EdgeSet r = n;
          r.insert({j, i});
          if (oracle_acyclic(d, r)) nexts.push_back(r);  // reverse
        } else if (!cur.count({j, i})) {
          n.insert({i, j});
          if (oracle_acyclic(d, n)) nexts.push_back(n);  // add
        }
      }
    }
    for (auto& n : nexts)
      if (!dist.count(n)) {
        dist[n] = base + 1;
        q.push(n);
      }
  }
  throw std::logic_error("edit_distance_oracle: target unreachable");
}

std::vector<EdgeSet> all_dags(int d) {
  std::vector<std::pair<int, int>> slots;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) slots.push_back({i, j});
  std::vector<EdgeSet> out;
  for (unsigned mask = 0; mask < (1u << slots.size()); ++mask) {
    EdgeSet es;
    bool both = false;
    for (size_t k = 0; k < slots.size(); ++k)
      if (mask >> k & 1) {
        auto [a, b] = slots[k];
        if (es.count({b, a})) both = true;
        es.insert({a, b});
      }
    if (!both && oracle_acyclic(d, es)) out.push_back(es);
  }
  return out;
}

MixedGraph directed_mixed(int d, const EdgeSet& es) {
  MixedGraph g(d);
  for (auto& [a, b] : es) g.add_directed(a, b);
  return g;
}

}  // namespace

TEST_CASE("shd equals the BFS edit-distance oracle on all 3-node DAG pairs", "[graphs]") {
  auto dags = all_dags(3);
  REQUIRE(dags.size() == 25);
  for (auto& pred : dags) {
    for (auto& truth : dags) {
      Dag t(3);
      for (auto& [a, b] : truth) t.add_edge(a, b);
      int got = graphs::shd(directed_mixed(3, pred), t);
      int want = edit_distance_oracle(3, pred, truth);
      INFO("pred " << pred.size() << " edges, truth " << truth.size() << " edges");
      CHECK(got == want);
    }
  }
}

TEST_CASE("shd counts missing, extra, and strictly reversed edges", "[graphs]") {
  Dag truth(4, {{0, 1}, {1, 2}, {2, 3}});
  MixedGraph pred(4);
  pred.add_directed(0, 1);       // correct
  pred.add_directed(2, 1);       // reversed
  pred.add_directed(0, 3);       // extra
  CHECK(graphs::shd(pred, truth) == 3);  // reversed + extra + missing 2->3

  // Undirected and circle marks on a true adjacency cost nothing.
  MixedGraph soft(4);
  soft.add_undirected(0, 1);
  soft.add_edge(1, 2, Mark::Circle, Mark::Circle);
  soft.add_edge(2, 3, Mark::Circle, Mark::Arrow);
  CHECK(graphs::shd(soft, truth) == 0);

  // Arrow into the true source with a circle (not tail) at the sink is not
  // "strictly" reversed.
  MixedGraph half(4);
  half.add_edge(1, 0, Mark::Circle, Mark::Arrow);
  CHECK(graphs::shd(half, truth) == 2);  // 1->2, 2->3 missing only
  CHECK(graphs::max_shd(4) == 6);
  CHECK(graphs::max_shd(8) == 28);
}

TEST_CASE("mixed graph endpoint bookkeeping", "[graphs]") {
  MixedGraph g(3);
  g.add_edge(0, 1, Mark::Tail, Mark::Arrow);
  CHECK(g.is_directed(0, 1));
  CHECK_FALSE(g.is_directed(1, 0));
  CHECK(g.endpoint(0, 1) == Mark::Arrow);
  CHECK(g.endpoint(1, 0) == Mark::Tail);
  g.set_endpoint(1, 0, Mark::Circle);
  CHECK_FALSE(g.is_directed(0, 1));
  CHECK(g.arrow_at(0, 1));
  g.remove_edge(0, 1);
  CHECK_FALSE(g.has_edge(0, 1));
  CHECK_THROWS_AS(g.endpoint(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.add_edge(0, 0, Mark::Tail, Mark::Tail), std::invalid_argument);
}

TEST_CASE("dag construction rejects cycles", "[graphs]") {
  Dag g(3, {{0, 1}, {1, 2}});
  CHECK_THROWS_AS(g.add_edge(2, 0), std::invalid_argument);
  CHECK(g.topological_order().size() == 3);
  auto order = g.topological_order();
  auto pos = [&](int v) {
    return std::find(order.begin(), order.end(), v) - order.begin();
  };
  CHECK(pos(0) < pos(1));
  CHECK(pos(1) < pos(2));
}

TEST_CASE("er dag generation is acyclic, seeded, and density-correct", "[graphs]") {
  auto g1 = graphs::generate_er_dag(10, 0.3, 42);
  auto g2 = graphs::generate_er_dag(10, 0.3, 42);
  auto g3 = graphs::generate_er_dag(10, 0.3, 43);
  CHECK(g1 == g2);
  CHECK_FALSE(g1 == g3);

  // Empirical edge frequency over many draws approaches edge_prob.
  int d = 8, trials = 400;
  long total = 0;
  for (int t = 0; t < trials; ++t)
    total += graphs::generate_er_dag(d, 0.25, 1000 + std::uint64_t(t)).edge_count();
  double rate = double(total) / (trials * graphs::max_shd(d));
  CHECK(rate == Catch::Approx(0.25).margin(0.02));

  CHECK(graphs::generate_er_dag(5, 0.0, 1).edge_count() == 0);
  CHECK(graphs::generate_er_dag(5, 1.0, 1).edge_count() == graphs::max_shd(5));
}

TEST_CASE("graph json round-trip preserves every mark kind", "[graphs]") {
  MixedGraph g(4);
  g.add_directed(0, 1);
  g.add_undirected(1, 2);
  g.add_edge(2, 3, Mark::Circle, Mark::Arrow);
  auto back = graphs::graph_from_json(graphs::to_json(g));
  CHECK(back == g);

  Dag dag(3, {{0, 2}, {1, 2}});
  CHECK(graphs::dag_from_json(graphs::to_json(dag)) == dag);
}
