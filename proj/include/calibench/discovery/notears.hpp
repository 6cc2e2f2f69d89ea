#pragma once

// Continuous acyclicity-constrained structure learning. The acyclicity
// measure is h(W) = tr(exp(W o W)) - d with gradient exp(W o W)^T o 2W; the
// matrix exponential is scaling-and-squaring over a truncated Taylor series.
// The augmented Lagrangian
//   1/(2n) ||X - XW||_F^2 + lambda1 ||W||_1 + rho/2 h(W)^2 + alpha h(W)
// is minimized in W by proximal gradient steps with backtracking; after each
// inner solve rho is escalated tenfold while h fails to shrink to a quarter
// of its previous value, otherwise the multiplier is updated. Edges are
// thresholded at the end, raising the threshold just enough to restore
// acyclicity if the cut at w_threshold left a cycle.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "calibench/dataset.hpp"
#include "calibench/discovery/common.hpp"
#include "calibench/graphs.hpp"
#include "calibench/rng.hpp"

namespace calibench::discovery {

namespace detail {

// exp(A) by scaling-and-squaring on the Taylor series, relative error below
// 1e-10 for the nonnegative inputs h(W) produces. Inputs with ||A||_1 > 100
// are rejected: at that magnitude the optimizer has diverged and the
// exponential would overflow.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  int d = static_cast<int>(a.rows());
  double norm1 = 0.0;
  for (int c = 0; c < d; ++c) norm1 = std::max(norm1, a.col(c).cwiseAbs().sum());
  if (!(norm1 <= 100.0)) throw std::domain_error("expm: input norm exceeds divergence bound");

  int squarings = 0;
  double scale = 1.0;
  while (norm1 * scale > 1.0) {
    scale *= 0.5;
    ++squarings;
  }
  Eigen::MatrixXd as = a * scale;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 40; ++k) {
    term = term * as / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-16 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

}  // namespace detail

// h(W) and its gradient. h is zero exactly when the support of W is acyclic.
inline std::pair<double, Eigen::MatrixXd> acyclicity_h(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("acyclicity_h: matrix must be square");
  int d = static_cast<int>(w.rows());
  Eigen::MatrixXd e = detail::expm(w.cwiseProduct(w));
  double h = e.trace() - static_cast<double>(d);
  Eigen::MatrixXd grad = e.transpose().cwiseProduct(2.0 * w);
  return {h, std::move(grad)};
}

struct NotearsIteration {
  double h;
  double rho;
  double alpha;
  double objective;
  bool accepted;
};

struct NotearsTrace {
  std::vector<NotearsIteration> iterations;
  bool reached_tolerance = false;
};

class NotearsDivergence : public std::runtime_error {
 public:
  NotearsDivergence(const std::string& msg, NotearsTrace trace)
      : std::runtime_error(msg), trace(std::move(trace)) {}
  NotearsTrace trace;
};

struct NotearsOptions {
  double lambda1 = 0.1;
  double w_threshold = 0.3;
  double h_tol = 1e-8;
  double rho_max = 1e16;
  int max_outer = 100;
  int max_inner = 500;
  double inner_tol = 1e-6;
};

namespace detail {

struct NotearsProblem {
  Eigen::MatrixXd cov;  // X^T X / n
  double lambda1;

  double smooth_loss(const Eigen::MatrixXd& w, double rho, double alpha, double h) const {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(w.rows(), w.cols()) - w;
    double ls = 0.5 * (r.transpose() * cov * r).trace();
    return ls + 0.5 * rho * h * h + alpha * h;
  }

  double objective(const Eigen::MatrixXd& w, double rho, double alpha, double h) const {
    return smooth_loss(w, rho, alpha, h) + lambda1 * w.cwiseAbs().sum();
  }
};

inline Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& w, double t) {
  return w.unaryExpr([t](double v) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
  });
}

// Proximal gradient with backtracking on the composite objective. The
// diagonal is projected to zero throughout (self-loops carry no meaning and
// only stall the acyclicity penalty).
inline Eigen::MatrixXd solve_subproblem(const NotearsProblem& prob, Eigen::MatrixXd w, double rho,
                                        double alpha, const NotearsOptions& opt,
                                        NotearsTrace& trace) {
  int d = static_cast<int>(w.rows());
  double step = 1.0;
  auto h_pair = acyclicity_h(w);
  double f = prob.smooth_loss(w, rho, alpha, h_pair.first);

  for (int it = 0; it < opt.max_inner; ++it) {
    Eigen::MatrixXd grad =
        prob.cov * (w - Eigen::MatrixXd::Identity(d, d)) + (rho * h_pair.first + alpha) * h_pair.second;
    grad.diagonal().setZero();

    bool moved = false;
    double move_norm = 0.0;
    while (step >= 1e-18) {
      Eigen::MatrixXd w_new = soft_threshold(w - step * grad, step * prob.lambda1);
      w_new.diagonal().setZero();
      Eigen::MatrixXd dw = w_new - w;
      double dw2 = dw.squaredNorm();
      if (dw2 == 0.0) return w;  // prox fixpoint

      // A trial point far enough out to overflow the exponential is just a
      // rejected step; real divergence is an accepted iterate going bad.
      std::pair<double, Eigen::MatrixXd> h_new;
      try {
        h_new = acyclicity_h(w_new);
      } catch (const std::domain_error&) {
        step *= 0.5;
        continue;
      }
      double f_new = prob.smooth_loss(w_new, rho, alpha, h_new.first);
      if (!std::isfinite(f_new))
        throw NotearsDivergence("notears: objective became non-finite", trace);
      // Standard proximal sufficient-decrease condition.
      if (f_new <= f + grad.cwiseProduct(dw).sum() + 0.5 / step * dw2) {
        w = std::move(w_new);
        h_pair = std::move(h_new);
        f = f_new;
        moved = true;
        move_norm = std::sqrt(dw2);
        break;
      }
      step *= 0.5;
    }
    if (!moved || move_norm < opt.inner_tol) break;
    step = std::min(step * 1.5, 1.0);
  }
  return w;
}

}  // namespace detail

struct NotearsResult {
  WeightedDag dag;
  NotearsTrace trace;
};

inline NotearsResult notears(const data::Dataset& ds, std::uint64_t seed,
                             NotearsOptions opt = {}) {
  int d = ds.cols();
  int n = ds.rows();
  if (n < 2) throw std::domain_error("notears: need n >= 2");

  Eigen::MatrixXd x = ds.matrix();
  for (int c = 0; c < d; ++c) x.col(c).array() -= x.col(c).mean();
  detail::NotearsProblem prob{x.transpose() * x / static_cast<double>(n), opt.lambda1};

  // Start at W = 0 plus a seed-keyed jitter: exactly symmetric data makes the
  // zero start a saddle whose symmetry plain gradient steps preserve.
  rng::Stream rs(seed, "notears-init");
  Eigen::MatrixXd w(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) w(r, c) = 1e-3 * rs.normal();
  w.diagonal().setZero();

  NotearsTrace trace;
  double rho = 1.0;
  double alpha = 0.0;
  double h_prev = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    Eigen::MatrixXd w_try;
    double h_try = 0.0;
    while (true) {
      w_try = detail::solve_subproblem(prob, w, rho, alpha, opt, trace);
      h_try = acyclicity_h(w_try).first;
      bool accepted = h_try <= 0.25 * h_prev;
      trace.iterations.push_back(
          {h_try, rho, alpha, prob.objective(w_try, rho, alpha, h_try), accepted});
      if (accepted || rho >= opt.rho_max) break;
      rho *= 10.0;
      if (rho > opt.rho_max) rho = opt.rho_max;
    }
    w = std::move(w_try);
    h_prev = h_try;
    alpha += rho * h_try;
    if (h_try <= opt.h_tol || rho >= opt.rho_max) break;
  }
  trace.reached_tolerance = h_prev <= opt.h_tol;

  // Threshold; if the cut leaves a cycle, raise it to the smallest value
  // restoring acyclicity.
  double threshold = opt.w_threshold;
  Eigen::MatrixXd w_cut;
  while (true) {
    w_cut = w.unaryExpr([threshold](double v) { return std::abs(v) > threshold ? v : 0.0; });
    WeightedDag candidate{w_cut, threshold};
    graphs::MixedGraph support = candidate.support();
    if (graphs::is_acyclic(support)) break;
    double next = std::numeric_limits<double>::infinity();
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        if (w_cut(r, c) != 0.0) next = std::min(next, std::abs(w_cut(r, c)));
    threshold = next;  // removes at least one surviving edge
  }
  return {{std::move(w_cut), threshold}, std::move(trace)};
}

}  // namespace calibench::discovery
