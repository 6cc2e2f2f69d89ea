#pragma once

// ICA-based LiNGAM. FastICA (tanh contrast, symmetric decorrelation) yields
// an unmixing matrix; rows are permuted to put mass on the diagonal, scaled,
// and B = I - W' is searched for the row/column permutation closest to
// strict lower-triangularity, which is the causal order. Small coefficients
// are pruned afterwards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "calibench/citests.hpp"
#include "calibench/dataset.hpp"
#include "calibench/discovery/common.hpp"
#include "calibench/rng.hpp"

namespace calibench::discovery {

struct FastIcaResult {
  Eigen::MatrixXd unmixing;  // components x variables, original (centered) space
  bool converged = false;
};

namespace detail {

// (M M^T)^{-1/2} M via eigendecomposition of the symmetric product.
inline Eigen::MatrixXd symmetric_decorrelate(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m * m.transpose());
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw citests::SingularityError("fastica: degenerate component matrix");
  Eigen::VectorXd inv_sqrt = ev.array().rsqrt();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * m;
}

}  // namespace detail

// Symmetric FastICA with the tanh contrast. Deterministic given the seed.
// Non-convergence within max_iter is flagged, not thrown.
inline FastIcaResult fastica(const data::Dataset& ds, int n_components, std::uint64_t seed,
                             int max_iter = 200, double tol = 1e-6) {
  int d = ds.cols();
  int n = ds.rows();
  if (n_components < 1 || n_components > d)
    throw std::invalid_argument("fastica: n_components outside [1, d]");
  if (n < 2) throw std::domain_error("fastica: need n >= 2");

  Eigen::MatrixXd x = ds.matrix();
  for (int c = 0; c < d; ++c) x.col(c).array() -= x.col(c).mean();

  // Whitening from the covariance eigendecomposition, top components first.
  Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  if (ev(d - n_components) <= 1e-12 * std::max(ev(d - 1), 1.0))
    throw citests::SingularityError("fastica: rank-deficient data");
  Eigen::MatrixXd k(n_components, d);
  for (int c = 0; c < n_components; ++c) {
    int src = d - 1 - c;
    k.row(c) = es.eigenvectors().col(src).transpose() / std::sqrt(ev(src));
  }
  Eigen::MatrixXd z = x * k.transpose();  // n x c, identity covariance

  rng::Stream rs(seed, "fastica-init");
  Eigen::MatrixXd w(n_components, n_components);
  for (int r = 0; r < n_components; ++r)
    for (int c = 0; c < n_components; ++c) w(r, c) = rs.normal();
  w = detail::symmetric_decorrelate(w);

  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd u = z * w.transpose();          // n x c
    Eigen::MatrixXd g = u.array().tanh().matrix();  // contrast
    Eigen::VectorXd g_prime_mean =
        (1.0 - g.array().square()).colwise().mean().transpose();
    Eigen::MatrixXd w_new =
        g.transpose() * z / static_cast<double>(n) - g_prime_mean.asDiagonal() * w;
    w_new = detail::symmetric_decorrelate(w_new);

    double delta = 0.0;
    for (int r = 0; r < n_components; ++r)
      delta = std::max(delta, 1.0 - std::abs(w_new.row(r).dot(w.row(r))));
    w = w_new;
    if (delta < tol) {
      converged = true;
      break;
    }
  }
  return {w * k, converged};
}

// Row permutation of the unmixing matrix minimizing sum(1/|diag|):
// exhaustive for d <= 8, greedy assignment of the largest remaining
// magnitudes otherwise.
inline std::vector<int> lingam_row_permutation(const Eigen::MatrixXd& w) {
  int d = static_cast<int>(w.rows());
  std::vector<int> best(static_cast<std::size_t>(d));
  if (d <= 8) {
    std::vector<int> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), 0);
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (int c = 0; c < d; ++c) {
        double diag = std::abs(w(perm[static_cast<std::size_t>(c)], c));
        cost += diag > 0.0 ? 1.0 / diag : std::numeric_limits<double>::infinity();
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (!std::isfinite(best_cost))
      throw citests::SingularityError("lingam: no permutation with nonzero diagonal");
    return best;
  }
  std::vector<bool> row_used(static_cast<std::size_t>(d), false);
  std::vector<bool> col_used(static_cast<std::size_t>(d), false);
  for (int step = 0; step < d; ++step) {
    int br = -1, bc = -1;
    double bv = -1.0;
    for (int r = 0; r < d; ++r) {
      if (row_used[static_cast<std::size_t>(r)]) continue;
      for (int c = 0; c < d; ++c) {
        if (col_used[static_cast<std::size_t>(c)]) continue;
        if (std::abs(w(r, c)) > bv) {
          bv = std::abs(w(r, c));
          br = r;
          bc = c;
        }
      }
    }
    if (bv <= 0.0) throw citests::SingularityError("lingam: no permutation with nonzero diagonal");
    best[static_cast<std::size_t>(bc)] = br;
    row_used[static_cast<std::size_t>(br)] = true;
    col_used[static_cast<std::size_t>(bc)] = true;
  }
  return best;
}

// Causal order: permutation pi minimizing the squared mass that would have
// to sit above the diagonal of P B P^T. Exhaustive for d <= 8; otherwise the
// greedy root-peeling heuristic (repeatedly take the row with least squared
// dependence on the remaining variables).
inline std::vector<int> lingam_causal_order(const Eigen::MatrixXd& b) {
  int d = static_cast<int>(b.rows());
  auto upper_cost = [&](const std::vector<int>& pi) {
    double cost = 0.0;
    for (int u = 0; u < d; ++u)
      for (int v = u + 1; v < d; ++v) {
        double e = b(pi[static_cast<std::size_t>(u)], pi[static_cast<std::size_t>(v)]);
        cost += e * e;
      }
    return cost;
  };
  if (d <= 8) {
    std::vector<int> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = upper_cost(perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
      double cost = upper_cost(perm);
      if (cost < best_cost) {
        best_cost = cost;
        best = perm;
      }
    }
    return best;
  }
  std::vector<int> remaining(static_cast<std::size_t>(d));
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<int> order;
  while (!remaining.empty()) {
    int pick = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      double cost = 0.0;
      for (int other : remaining)
        if (other != remaining[k]) {
          double e = b(remaining[k], other);
          cost += e * e;
        }
      if (cost < best_cost) {
        best_cost = cost;
        pick = static_cast<int>(k);
      }
    }
    order.push_back(remaining[static_cast<std::size_t>(pick)]);
    remaining.erase(remaining.begin() + pick);
  }
  return order;
}

// Full ICA-LiNGAM. Data is standardized internally (numeric conditioning);
// edge weights are on that scale. Coefficients with |b| <= prune_threshold
// are dropped.
inline WeightedDag lingam(const data::Dataset& ds, std::uint64_t seed,
                          double prune_threshold = 0.05) {
  int d = ds.cols();
  if (d == 1) return {Eigen::MatrixXd::Zero(1, 1), prune_threshold};

  data::Dataset std_ds = data::standardize(ds);
  FastIcaResult ica = fastica(std_ds, d, seed);

  std::vector<int> row_of = lingam_row_permutation(ica.unmixing);
  Eigen::MatrixXd w_perm(d, d);
  for (int c = 0; c < d; ++c) w_perm.row(c) = ica.unmixing.row(row_of[static_cast<std::size_t>(c)]);
  for (int r = 0; r < d; ++r) w_perm.row(r) /= w_perm(r, r);

  // x = B x + e with B_ij the effect of x_j on x_i.
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(d, d) - w_perm;
  b.diagonal().setZero();

  std::vector<int> order = lingam_causal_order(b);
  std::vector<int> pos(static_cast<std::size_t>(d));
  for (int u = 0; u < d; ++u) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(u)])] = u;

  Eigen::MatrixXd w_out = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      // Edge j -> i survives only when j precedes i in the causal order.
      if (pos[static_cast<std::size_t>(j)] >= pos[static_cast<std::size_t>(i)]) continue;
      if (std::abs(b(i, j)) <= prune_threshold) continue;
      w_out(j, i) = b(i, j);
    }
  }
  return {std::move(w_out), prune_threshold};
}

}  // namespace calibench::discovery
