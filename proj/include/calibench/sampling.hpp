#pragma once

// Forward samplers: ancestral sampling of a discrete Bayesian network and
// linear structural equation models (Gaussian or bounded-uniform noise) over
// a DAG with per-edge weights.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "calibench/bif.hpp"
#include "calibench/dataset.hpp"
#include "calibench/graphs.hpp"
#include "calibench/rng.hpp"

namespace calibench::data {

inline Dataset ancestral_sample(const BayesNet& net, int n, std::uint64_t seed) {
  if (n < 1) throw std::domain_error("ancestral_sample: need n >= 1");
  int d = net.node_count();
  std::vector<int> order = net.dag.topological_order();
  rng::Stream rs(seed, "ancestral");
  Eigen::MatrixXd values(n, d);
  std::vector<int> row_vals(static_cast<std::size_t>(d), 0);
  for (int r = 0; r < n; ++r) {
    for (int node : order) {
      const Cpt& cpt = net.cpts[static_cast<std::size_t>(node)];
      std::vector<int> pv;
      pv.reserve(cpt.parents.size());
      for (int p : cpt.parents) pv.push_back(row_vals[static_cast<std::size_t>(p)]);
      int row = cpt.row_index(pv);
      Eigen::RowVectorXd probs = cpt.table.row(row);
      int v = rs.categorical({probs.data(), static_cast<std::size_t>(probs.size())});
      row_vals[static_cast<std::size_t>(node)] = v;
      values(r, node) = v;
    }
  }
  std::vector<ColumnInfo> cols;
  for (int c = 0; c < d; ++c)
    cols.push_back({net.names[static_cast<std::size_t>(c)], ColumnKind::Discrete,
                    net.cardinality(c)});
  return Dataset(std::move(values), std::move(cols));
}

enum class NoiseKind { Gaussian, Uniform };

// x_j = sum_i weights(i,j) * x_i + eps_j, columns generated in topological
// order. weights(i,j) is the coefficient of edge i->j and must be zero off
// the DAG's edges. Gaussian noise uses sd = noise_param; uniform noise is
// U[-noise_param, noise_param].
inline Dataset sample_linear_sem(const graphs::Dag& dag, const Eigen::MatrixXd& weights, int n,
                                 NoiseKind noise, double noise_param, std::uint64_t seed) {
  int d = dag.node_count();
  if (weights.rows() != d || weights.cols() != d)
    throw std::invalid_argument("sample_linear_sem: weight matrix shape mismatch");
  if (n < 1) throw std::domain_error("sample_linear_sem: need n >= 1");
  if (noise_param <= 0.0) throw std::domain_error("sample_linear_sem: noise scale must be positive");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (weights(i, j) != 0.0 && !dag.has_edge(i, j))
        throw std::invalid_argument("sample_linear_sem: nonzero weight off the DAG");

  rng::Stream rs(seed, "sem-noise");
  std::vector<int> order = dag.topological_order();
  Eigen::MatrixXd x(n, d);
  for (int r = 0; r < n; ++r) {
    for (int j : order) {
      double v = noise == NoiseKind::Gaussian ? noise_param * rs.normal()
                                              : rs.uniform(-noise_param, noise_param);
      for (int i : dag.parents(j)) v += weights(i, j) * x(r, i);
      x(r, j) = v;
    }
  }
  std::vector<ColumnInfo> cols;
  for (int c = 0; c < d; ++c) cols.push_back({"x" + std::to_string(c + 1), ColumnKind::Continuous, 0});
  return Dataset(std::move(x), std::move(cols));
}

// Per-edge weights with magnitude U[lo, hi] and uniform random sign.
inline Eigen::MatrixXd draw_sem_weights(const graphs::Dag& dag, double lo, double hi,
                                        std::uint64_t seed) {
  if (lo <= 0.0 || hi < lo) throw std::invalid_argument("draw_sem_weights: need 0 < lo <= hi");
  rng::Stream rs(seed, "sem-weights");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dag.node_count(), dag.node_count());
  for (auto [i, j] : dag.edges()) {
    double mag = rs.uniform(lo, hi);
    double sign = rs.uniform() < 0.5 ? -1.0 : 1.0;
    w(i, j) = sign * mag;
  }
  return w;
}

inline Dataset sample_linear_gaussian(const graphs::Dag& dag, int n, double weight_lo,
                                      double weight_hi, double noise_sd, std::uint64_t seed) {
  Eigen::MatrixXd w = draw_sem_weights(dag, weight_lo, weight_hi, seed);
  return sample_linear_sem(dag, w, n, NoiseKind::Gaussian, noise_sd, seed);
}

inline Dataset sample_linear_nongaussian(const graphs::Dag& dag, int n, double noise_half_width,
                                         std::uint64_t seed, double weight_lo = 0.5,
                                         double weight_hi = 2.0) {
  Eigen::MatrixXd w = draw_sem_weights(dag, weight_lo, weight_hi, seed);
  return sample_linear_sem(dag, w, n, NoiseKind::Uniform, noise_half_width, seed);
}

}  // namespace calibench::data
