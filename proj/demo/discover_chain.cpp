// Recover a five-node chain from simulated data with the PC algorithm and
// report the structural error. Run with no arguments; pass a seed to vary
// the draw.

#include <cstdint>
#include <cstdlib>
#include <iostream>

#include "calibench/discovery/pc.hpp"
#include "calibench/graphs.hpp"
#include "calibench/sampling.hpp"

using namespace calibench;

int main(int argc, char** argv) {
  std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;

  graphs::Dag truth(5);
  for (int i = 0; i + 1 < 5; ++i) truth.add_edge(i, i + 1);

  auto ds = data::sample_linear_gaussian(truth, 5000, 0.5, 2.0, 1.0, seed);
  auto result = discovery::pc(ds, 0.05);

  std::cout << "edges found:";
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      if (result.graph.has_edge(i, j)) std::cout << ' ' << i << '-' << j;
  std::cout << "\nshd vs truth: " << graphs::shd(result.graph, truth) << '\n';
  return 0;
}
