#pragma once

// Conditional-independence tests. Continuous data: partial correlation with
// the Fisher z transform. Discrete data: the G^2 likelihood-ratio test with
// a chi-square reference. ci_test_auto dispatches on column kinds: all
// columns discrete -> G^2, otherwise Fisher z.

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "calibench/dataset.hpp"
#include "calibench/stats.hpp"

namespace calibench::citests {

class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TestKind { FisherZ, GSquare };

struct CiDecision {
  bool independent;
  double statistic;
  double p_value;
  TestKind kind;
};

inline double chi_square_sf(double x, double df) {
  if (df <= 0.0) throw std::domain_error("chi_square_sf: df must be positive");
  if (x < 0.0) throw std::domain_error("chi_square_sf: x must be nonnegative");
  return stats::gamma_q(df / 2.0, x / 2.0);
}

namespace detail {

inline Eigen::MatrixXd design_matrix(const data::Dataset& ds, const std::vector<int>& s) {
  Eigen::MatrixXd z(ds.rows(), static_cast<int>(s.size()) + 1);
  z.col(0).setOnes();
  for (std::size_t k = 0; k < s.size(); ++k) z.col(static_cast<int>(k) + 1) = ds.matrix().col(s[k]);
  return z;
}

// Residual of y after least-squares projection onto the columns of z.
inline Eigen::VectorXd residualize(const Eigen::MatrixXd& z, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  if (qr.rank() < z.cols()) throw SingularityError("residualize: singular design matrix");
  return y - z * qr.solve(y);
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw SingularityError("pearson: zero-variance residual");
  return a.dot(b) / (na * nb);
}

}  // namespace detail

// Partial correlation of columns i and j given S, by residualizing both on S
// (with intercept) and correlating the residuals.
inline double partial_correlation(const data::Dataset& ds, int i, int j,
                                  const std::vector<int>& s) {
  if (ds.rows() <= static_cast<int>(s.size()) + 3)
    throw std::invalid_argument("partial_correlation: need n > |S| + 3");
  Eigen::MatrixXd z = detail::design_matrix(ds, s);
  Eigen::VectorXd ri = detail::residualize(z, ds.matrix().col(i));
  Eigen::VectorXd rj = detail::residualize(z, ds.matrix().col(j));
  return detail::pearson(ri, rj);
}

// Same quantity through the precision matrix of {i, j} union S:
// rho_ij.S = -P_ij / sqrt(P_ii P_jj). Kept as an independent algebraic route;
// the suite checks the two agree to 1e-8.
inline double partial_correlation_precision(const data::Dataset& ds, int i, int j,
                                            const std::vector<int>& s) {
  std::vector<int> idx{i, j};
  idx.insert(idx.end(), s.begin(), s.end());
  int m = static_cast<int>(idx.size());
  double n = static_cast<double>(ds.rows());
  Eigen::MatrixXd sub(ds.rows(), m);
  for (int k = 0; k < m; ++k) {
    sub.col(k) = ds.matrix().col(idx[static_cast<std::size_t>(k)]);
    sub.col(k).array() -= sub.col(k).mean();
  }
  Eigen::MatrixXd cov = sub.transpose() * sub / n;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  if (!lu.isInvertible()) throw SingularityError("partial_correlation_precision: singular covariance");
  Eigen::MatrixXd prec = lu.inverse();
  return -prec(0, 1) / std::sqrt(prec(0, 0) * prec(1, 1));
}

inline double fisher_z(double rho, int n, int s_size) {
  if (std::abs(rho) >= 1.0) throw std::domain_error("fisher_z: |rho| must be < 1");
  if (n <= s_size + 3) throw std::invalid_argument("fisher_z: need n > |S| + 3");
  return 0.5 * std::log((1.0 + rho) / (1.0 - rho)) *
         std::sqrt(static_cast<double>(n - s_size - 3));
}

inline CiDecision ci_test_fisher_z(const data::Dataset& ds, int i, int j,
                                   const std::vector<int>& s, double alpha) {
  double rho = partial_correlation(ds, i, j, s);
  // Residual correlations can brush |1| at machine precision on degenerate
  // draws; treat that as certain dependence rather than a domain error.
  if (std::abs(rho) >= 1.0) return {false, std::numeric_limits<double>::infinity(), 0.0, TestKind::FisherZ};
  double z = fisher_z(rho, ds.rows(), static_cast<int>(s.size()));
  double p = stats::normal_two_sided_p(z);
  return {p > alpha, z, p, TestKind::FisherZ};
}

// G^2 = 2 sum O ln(O/E) over i x j contingency tables within each stratum of
// S; df = (r_i - 1)(r_j - 1) * prod_{s in S} r_s. Zero observed cells
// contribute nothing.
inline CiDecision ci_test_gsquare(const data::Dataset& ds, int i, int j,
                                  const std::vector<int>& s, double alpha) {
  for (int c : {i, j}) {
    if (ds.column(c).kind != data::ColumnKind::Discrete)
      throw std::invalid_argument("ci_test_gsquare: column " + ds.column(c).name + " is not discrete");
  }
  for (int c : s)
    if (ds.column(c).kind != data::ColumnKind::Discrete)
      throw std::invalid_argument("ci_test_gsquare: conditioning column is not discrete");

  int ri = ds.column(i).cardinality;
  int rj = ds.column(j).cardinality;
  double df = static_cast<double>(ri - 1) * static_cast<double>(rj - 1);
  for (int c : s) df *= ds.column(c).cardinality;
  if (df <= 0.0) throw std::domain_error("ci_test_gsquare: degenerate test (df <= 0)");

  // Stratify rows by the S-configuration (mixed radix).
  std::map<long long, Eigen::MatrixXd> tables;
  for (int r = 0; r < ds.rows(); ++r) {
    long long key = 0;
    for (int c : s) key = key * ds.column(c).cardinality + static_cast<long long>(ds.value(r, c));
    auto [it, inserted] = tables.try_emplace(key, Eigen::MatrixXd::Zero(ri, rj));
    it->second(static_cast<int>(ds.value(r, i)), static_cast<int>(ds.value(r, j))) += 1.0;
  }

  double g2 = 0.0;
  for (const auto& [key, tab] : tables) {
    double total = tab.sum();
    if (total == 0.0) continue;
    Eigen::VectorXd row_sum = tab.rowwise().sum();
    Eigen::VectorXd col_sum = tab.colwise().sum();
    for (int a = 0; a < ri; ++a) {
      for (int b = 0; b < rj; ++b) {
        double o = tab(a, b);
        if (o == 0.0) continue;
        double e = row_sum(a) * col_sum(b) / total;
        g2 += 2.0 * o * std::log(o / e);
      }
    }
  }
  double p = chi_square_sf(g2, df);
  return {p > alpha, g2, p, TestKind::GSquare};
}

inline CiDecision ci_test_auto(const data::Dataset& ds, int i, int j, const std::vector<int>& s,
                               double alpha) {
  bool discrete = ds.column(i).kind == data::ColumnKind::Discrete &&
                  ds.column(j).kind == data::ColumnKind::Discrete;
  for (int c : s) discrete = discrete && ds.column(c).kind == data::ColumnKind::Discrete;
  return discrete ? ci_test_gsquare(ds, i, j, s, alpha) : ci_test_fisher_z(ds, i, j, s, alpha);
}

}  // namespace calibench::citests
