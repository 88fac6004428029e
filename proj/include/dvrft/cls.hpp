#pragma once

/// @file
/// Dense least squares with linear constraints:
///
///   minimize ||A x - b||^2   subject to   G x <= h,  E x = e.
///
/// Two backends share a QR reduction of A (R x = Q^T b):
///   * active_set: Goldfarb-Idnani dual active-set method;
///   * admm: operator splitting with over-relaxation, adaptive penalty and
///     Ruiz equilibration, followed by an active-set polish.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dvrft/errors.hpp"

namespace dvrft::cls {

struct Problem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;

  Eigen::Index variables() const noexcept { return A.cols(); }

  void validate() const {
    const auto p = A.cols();
    if (p == 0) throw DimensionError("cls: problem has no variables");
    if (b.size() != A.rows()) throw DimensionError("cls: b length differs from A rows");
    if (G.rows() > 0 && G.cols() != p) throw DimensionError("cls: G column count differs from A");
    if (h.size() != G.rows()) throw DimensionError("cls: h length differs from G rows");
    if (E.rows() > 0 && E.cols() != p) throw DimensionError("cls: E column count differs from A");
    if (e.size() != E.rows()) throw DimensionError("cls: e length differs from E rows");
    if (!A.allFinite() || !b.allFinite() || !G.allFinite() || !h.allFinite() || !E.allFinite() || !e.allFinite())
      throw PreconditionError("cls: non-finite problem data");
  }

  double objective(const Eigen::VectorXd& x) const { return (A * x - b).squaredNorm(); }
};

enum class Backend { admm, active_set };
enum class Status { solved, infeasible, max_iterations };

inline const char* to_string(Backend b) { return b == Backend::admm ? "admm" : "active_set"; }
inline const char* to_string(Status s) {
  switch (s) {
    case Status::solved: return "solved";
    case Status::infeasible: return "infeasible";
    case Status::max_iterations: return "max_iterations";
  }
  return "?";
}

inline Backend parse_backend(const std::string& s) {
  if (s == "admm") return Backend::admm;
  if (s == "active_set") return Backend::active_set;
  throw PreconditionError("unknown solver backend '" + s + "'");
}

struct Options {
  double tol_feas = 1e-8;
  double tol_kkt = 1e-8;
  int max_iter = 20000;
  Backend backend = Backend::admm;
  /// Remove coordinate equalities (rows with one nonzero) before solving.
  bool eliminate_equalities = false;
  double admm_alpha = 1.6;
  double admm_sigma = 1e-6;
  double admm_rho = 0.1;
  /// ADMM stopping tolerance before the polish step.
  double admm_eps = 1e-6;
  int polish_iter = 500;
};

/// Stationarity is scaled by max(1, ||2A^T A x||, ||2A^T b||, ||G^T lambda||,
/// ||E^T mu||); complementarity is max |lambda_i (G x - h)_i| / max(1, ||lambda||).
/// Other entries are absolute. All norms are infinity norms.
struct KktResiduals {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;

  double max() const { return std::max({stationarity, primal_feasibility, dual_feasibility, complementarity}); }
};

/// `regularization` is the Tikhonov weight of the solved problem
/// ||A x - b||^2 + regularization ||x||^2.
inline KktResiduals kkt_residuals(const Problem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                                  const Eigen::VectorXd& mu, double regularization = 0.0) {
  KktResiduals r;
  const Eigen::VectorXd hx = 2.0 * (p.A.transpose() * (p.A * x) + regularization * x);
  const Eigen::VectorXd hb = 2.0 * (p.A.transpose() * p.b);
  Eigen::VectorXd grad = hx - hb;
  double scale = std::max({1.0, hx.lpNorm<Eigen::Infinity>(), hb.lpNorm<Eigen::Infinity>()});
  if (p.G.rows() > 0) {
    const Eigen::VectorXd gl = p.G.transpose() * lambda;
    grad += gl;
    scale = std::max(scale, gl.lpNorm<Eigen::Infinity>());
    const Eigen::VectorXd slack = p.G * x - p.h;
    r.primal_feasibility = std::max(0.0, slack.maxCoeff());
    r.dual_feasibility = std::max(0.0, -lambda.minCoeff());
    r.complementarity = lambda.cwiseProduct(slack).lpNorm<Eigen::Infinity>() /
                        std::max(1.0, lambda.lpNorm<Eigen::Infinity>());
  }
  if (p.E.rows() > 0) {
    const Eigen::VectorXd em = p.E.transpose() * mu;
    grad += em;
    scale = std::max(scale, em.lpNorm<Eigen::Infinity>());
    r.primal_feasibility = std::max(r.primal_feasibility, (p.E * x - p.e).lpNorm<Eigen::Infinity>());
  }
  r.stationarity = grad.lpNorm<Eigen::Infinity>() / scale;
  return r;
}

/// Outcome of the phase-1 problem
///   minimize ||(G x - h)_+||^2 + mu ||x||^2   subject to   E x = e.
/// When infeasible, `violation` = sum of (G x - h)_+ at the minimizer and
/// `farkas` = (G x - h)_+ is a nonnegative multiplier with G^T farkas close
/// to the range of E^T and h^T farkas < 0.
struct FeasibilityReport {
  bool feasible = false;
  Eigen::VectorXd witness;
  double max_violation = 0.0;
  double violation = 0.0;
  Eigen::VectorXd farkas;
  int iterations = 0;
};

struct Solution {
  Status status = Status::max_iterations;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  ///< inequality multipliers (>= 0)
  Eigen::VectorXd mu;      ///< equality multipliers
  double objective = 0.0;
  KktResiduals kkt;
  int iterations = 0;
  double wall_time = 0.0;       ///< seconds
  double regularization = 0.0;  ///< Tikhonov weight added to A^T A
  std::string backend;
  std::string message;
  std::optional<FeasibilityReport> infeasibility;

  bool ok() const noexcept { return status == Status::solved; }
};

namespace detail {

/// Upper-triangular R and c = Q^T b (first p entries) with
/// ||A x - b||^2 = ||R x - c||^2 + const, optionally regularized.
struct Reduction {
  Eigen::MatrixXd R;
  Eigen::VectorXd c;
  double regularization = 0.0;
};

inline Reduction reduce(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const auto p = A.cols();
  Reduction out;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> piv(A);
  const Eigen::VectorXd diag = piv.matrixR().diagonal().cwiseAbs();
  const double top = diag.size() ? diag.maxCoeff() : 0.0;
  const double bottom = diag.size() ? diag.tail(1)[0] : 0.0;
  const bool deficient = A.rows() < p || top == 0.0 || bottom < 1e-5 * top;
  Eigen::MatrixXd stacked = A;
  Eigen::VectorXd rhs = b;
  if (deficient) {
    const double norm2 = top > 0.0 ? Eigen::JacobiSVD<Eigen::MatrixXd>(piv.matrixR().topRows(std::min(A.rows(), p)))
                                             .singularValues()[0]
                                   : 1.0;
    out.regularization = 1e-10 * norm2 * norm2;
    stacked.conservativeResize(A.rows() + p, p);
    stacked.bottomRows(p) = std::sqrt(out.regularization) * Eigen::MatrixXd::Identity(p, p);
    rhs.conservativeResize(A.rows() + p);
    rhs.tail(p).setZero();
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  out.R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  out.c = (qr.householderQ().transpose() * rhs).head(p);
  return out;
}

/// Goldfarb-Idnani dual method on
///   minimize ||R x - c||^2  s.t.  E x = e,  G x <= h
/// with R upper triangular and nonsingular.
struct DualActiveSet {
  const Eigen::MatrixXd& R;
  const Eigen::VectorXd& c;
  const Eigen::MatrixXd& G;
  const Eigen::VectorXd& h;
  const Eigen::MatrixXd& E;
  const Eigen::VectorXd& e;
  double tol_add;
  int max_iter;

  Eigen::VectorXd x, lambda, mu;
  int iterations = 0;
  bool infeasible = false;
  bool exhausted = false;

  void run() {
    const auto n = R.cols();
    const auto q = G.rows();
    const auto meq = E.rows();
    // H = 2 R^T R = L L^T with L = sqrt2 R^T; J = L^-T.
    const Eigen::MatrixXd L_t = std::sqrt(2.0) * R;
    Eigen::MatrixXd J = L_t.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd Ract = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::Index> active;  // constraint ids: 0..meq-1 equalities, meq + i inequality i
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1);
    double r_norm = 1.0;

    x = R.triangularView<Eigen::Upper>().solve(c);
    lambda = Eigen::VectorXd::Zero(q);
    mu = Eigen::VectorXd::Zero(meq);

    auto normal = [&](Eigen::Index id) -> Eigen::VectorXd {
      if (id < meq) return E.row(id).transpose();
      return -G.row(id - meq).transpose();  // a^T x >= beta form
    };
    auto rhs = [&](Eigen::Index id) { return id < meq ? e[id] : -h[id - meq]; };

    // Called after the new constraint id is appended to `active`.
    auto add_constraint = [&](Eigen::VectorXd& d) -> bool {
      const auto iq = static_cast<Eigen::Index>(active.size()) - 1;
      for (Eigen::Index j = n - 1; j > iq; --j) {
        double cc = d[j - 1], ss = d[j];
        const double hyp = std::hypot(cc, ss);
        if (hyp == 0.0) continue;
        cc /= hyp;
        ss /= hyp;
        d[j - 1] = hyp;
        d[j] = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double t1 = J(k, j - 1), t2 = J(k, j);
          J(k, j - 1) = cc * t1 + ss * t2;
          J(k, j) = -ss * t1 + cc * t2;
        }
      }
      Ract.col(iq).head(iq + 1) = d.head(iq + 1);
      if (std::abs(d[iq]) <= std::numeric_limits<double>::epsilon() * r_norm * 10.0) return false;
      r_norm = std::max(r_norm, std::abs(d[iq]));
      return true;
    };

    auto delete_constraint = [&](Eigen::Index pos) {
      const auto iq = static_cast<Eigen::Index>(active.size());
      for (Eigen::Index k = pos; k + 1 < iq; ++k) {
        active[k] = active[k + 1];
        u[k] = u[k + 1];
        Ract.col(k) = Ract.col(k + 1);
      }
      active.pop_back();
      u[iq - 1] = u[iq];
      u[iq] = 0.0;
      Ract.col(iq - 1).setZero();
      const Eigen::Index nq = iq - 1;
      for (Eigen::Index j = pos; j < nq; ++j) {
        double cc = Ract(j, j), ss = Ract(j + 1, j);
        const double hyp = std::hypot(cc, ss);
        if (hyp == 0.0) continue;
        cc /= hyp;
        ss /= hyp;
        for (Eigen::Index k = j; k < nq; ++k) {
          const double t1 = Ract(j, k), t2 = Ract(j + 1, k);
          Ract(j, k) = cc * t1 + ss * t2;
          Ract(j + 1, k) = -ss * t1 + cc * t2;
        }
        Ract(j + 1, j) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double t1 = J(k, j), t2 = J(k, j + 1);
          J(k, j) = cc * t1 + ss * t2;
          J(k, j + 1) = -ss * t1 + cc * t2;
        }
      }
    };

    auto step_direction = [&](const Eigen::VectorXd& np, Eigen::VectorXd& d, Eigen::VectorXd& z, Eigen::VectorXd& r) {
      const auto iq = static_cast<Eigen::Index>(active.size());
      d = J.transpose() * np;
      z = J.rightCols(n - iq) * d.tail(n - iq);
      r = Ract.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
    };

    Eigen::VectorXd d, z, r;
    for (Eigen::Index i = 0; i < meq; ++i) {
      const Eigen::VectorXd np = normal(i);
      step_direction(np, d, z, r);
      const double denom = z.dot(np);
      if (std::abs(denom) <= 1e-14 * np.norm() * (1.0 + z.norm())) {
        if (std::abs(np.dot(x) - rhs(i)) > tol_add) {
          infeasible = true;
          return;
        }
        continue;  // redundant equality
      }
      const double t2 = (rhs(i) - np.dot(x)) / denom;
      x += t2 * z;
      const auto iq = static_cast<Eigen::Index>(active.size());
      u.head(iq) -= t2 * r;
      u[iq] = t2;
      active.push_back(i);
      if (!add_constraint(d)) {
        active.pop_back();
        infeasible = true;
        return;
      }
    }
    const auto n_eq_active = static_cast<Eigen::Index>(active.size());

    std::vector<char> is_active(static_cast<std::size_t>(q), 0);
    while (true) {
      if (++iterations > max_iter) {
        exhausted = true;
        break;
      }
      // Step 1: most violated inequality, lowest index on ties.
      Eigen::Index p = -1;
      double worst = -tol_add;
      if (q > 0) {
        const Eigen::VectorXd s = h - G * x;  // a^T x - beta
        for (Eigen::Index i = 0; i < q; ++i)
          if (!is_active[i] && s[i] < worst) {
            worst = s[i];
            p = i;
          }
      }
      if (p < 0) break;
      const Eigen::Index id = meq + p;
      const Eigen::VectorXd np = normal(id);
      double u_plus = 0.0;
      double sp = np.dot(x) - rhs(id);

      while (true) {
        step_direction(np, d, z, r);
        const auto iq = static_cast<Eigen::Index>(active.size());
        double t1 = std::numeric_limits<double>::infinity();
        Eigen::Index drop = -1;
        for (Eigen::Index k = n_eq_active; k < iq; ++k)
          if (r[k] > 0.0) {
            const double ratio = u[k] / r[k];
            if (ratio < t1 || (ratio == t1 && drop >= 0 && active[k] < active[drop])) {
              t1 = ratio;
              drop = k;
            }
          }
        const double zn = z.dot(np);
        const double t2 = (z.norm() > 1e-14 * (1.0 + np.norm()) && zn > 0.0) ? -sp / zn
                                                                              : std::numeric_limits<double>::infinity();
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          infeasible = true;
          goto finish;
        }
        if (!std::isfinite(t2)) {
          u.head(iq) -= t * r;
          u_plus += t;
          is_active[active[drop] - meq] = 0;
          delete_constraint(drop);
          if (++iterations > max_iter) {
            exhausted = true;
            goto finish;
          }
          continue;
        }
        x += t * z;
        u.head(iq) -= t * r;
        u_plus += t;
        if (t == t2) {
          u[iq] = u_plus;
          active.push_back(id);
          if (!add_constraint(d)) {
            active.pop_back();
            infeasible = true;
            goto finish;
          }
          is_active[p] = 1;
          break;
        }
        is_active[active[drop] - meq] = 0;
        delete_constraint(drop);
        sp = np.dot(x) - rhs(id);
        if (++iterations > max_iter) {
          exhausted = true;
          goto finish;
        }
      }
    }
  finish:
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Eigen::Index id = active[k];
      if (id < meq)
        mu[id] = -u[static_cast<Eigen::Index>(k)];
      else
        lambda[id - meq] = u[static_cast<Eigen::Index>(k)];
    }
  }
};

/// Equality-constrained least squares on a working set:
///   [2 R^T R   C^T] [x]   [2 R^T c]
///   [C         0  ] [y] = [rhs    ]
/// solved with a small diagonal perturbation and iterative refinement.
inline void solve_working_set(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& C,
                              const Eigen::VectorXd& rhs, Eigen::VectorXd& x, Eigen::VectorXd& y) {
  const auto n = H.rows();
  const auto m = C.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, m) = C.transpose();
  K.bottomLeftCorner(m, n) = C;
  Eigen::VectorXd full(n + m);
  full << g, rhs;
  const double delta = 1e-11 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd Kreg = K;
  Kreg.topLeftCorner(n, n).diagonal().array() += delta;
  Kreg.bottomRightCorner(m, m).diagonal().array() -= delta;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);
  Eigen::VectorXd sol = lu.solve(full);
  for (int it = 0; it < 5; ++it) sol += lu.solve(full - K * sol);
  x = sol.head(n);
  y = sol.tail(m);
}

/// Phase-1 minimization by a damped semismooth Newton iteration.
inline FeasibilityReport phase_one(const Eigen::MatrixXd& G, const Eigen::VectorXd& h, const Eigen::MatrixXd& E,
                                   const Eigen::VectorXd& e, Eigen::Index n, double tol_feas) {
  FeasibilityReport rep;
  const double reg = 1e-12 * std::max(1.0, G.rows() ? G.cwiseAbs2().rowwise().sum().maxCoeff() : 1.0);
  auto phi = [&](const Eigen::VectorXd& x) {
    double v = reg * x.squaredNorm();
    if (G.rows()) v += (G * x - h).cwiseMax(0.0).squaredNorm();
    return v;
  };
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (E.rows()) x = E.completeOrthogonalDecomposition().solve(e);
  for (rep.iterations = 0; rep.iterations < 200; ++rep.iterations) {
    Eigen::VectorXd s = G.rows() ? Eigen::VectorXd(G * x - h) : Eigen::VectorXd();
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s[i] > 0.0) rows.push_back(i);
    Eigen::MatrixXd Gi(static_cast<Eigen::Index>(rows.size()), n);
    Eigen::VectorXd hi(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      Gi.row(static_cast<Eigen::Index>(k)) = G.row(rows[k]);
      hi[static_cast<Eigen::Index>(k)] = h[rows[k]];
    }
    const Eigen::MatrixXd H = 2.0 * (Gi.transpose() * Gi) + 2.0 * reg * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd g = 2.0 * (Gi.transpose() * hi);
    Eigen::VectorXd target, nu;
    solve_working_set(H, g, E, e, target, nu);
    const Eigen::VectorXd dir = target - x;
    if (dir.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
    const double f0 = phi(x);
    double step = 1.0;
    while (step > 1e-12 && phi(x + step * dir) > f0 - 1e-14 * std::abs(f0)) step *= 0.5;
    if (step <= 1e-12) break;
    x += step * dir;
  }
  rep.witness = x;
  const Eigen::VectorXd viol = G.rows() ? Eigen::VectorXd((G * x - h).cwiseMax(0.0)) : Eigen::VectorXd();
  rep.max_violation = viol.size() ? viol.maxCoeff() : 0.0;
  if (E.rows()) rep.max_violation = std::max(rep.max_violation, (E * x - e).lpNorm<Eigen::Infinity>());
  rep.violation = viol.sum();
  rep.feasible = rep.max_violation <= tol_feas;
  if (!rep.feasible) rep.farkas = viol;
  return rep;
}

inline double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

/// Ruiz-equilibrated ADMM on the reduced problem; returns the iterate
/// (x, y) in original units with y over the stacked rows [E; G].
struct Admm {
  const Eigen::MatrixXd& P;  // 2 R^T R
  const Eigen::VectorXd& q;  // -2 R^T c
  const Eigen::MatrixXd& C;  // [E; G]
  const Eigen::VectorXd& lower;
  const Eigen::VectorXd& upper;
  Eigen::Index meq;
  const Options& opt;
  /// Called every `checkpoint_every` iterations with the unscaled iterate;
  /// returning true stops the iteration.
  std::function<bool(const Eigen::VectorXd&, const Eigen::VectorXd&)> checkpoint;
  int checkpoint_every = 200;

  Eigen::VectorXd x, y;
  int iterations = 0;
  bool converged = false;
  bool stopped = false;

  void run() {
    const auto n = P.rows();
    const auto m = C.rows();
    Eigen::VectorXd D = Eigen::VectorXd::Ones(n), Es = Eigen::VectorXd::Ones(m);
    Eigen::MatrixXd Ps = P, Cs = C;
    Eigen::VectorXd qs = q;
    for (int it = 0; it < 15; ++it) {
      Eigen::VectorXd dcol(n), drow(m);
      for (Eigen::Index j = 0; j < n; ++j) {
        double v = Ps.col(j).lpNorm<Eigen::Infinity>();
        if (m) v = std::max(v, Cs.col(j).lpNorm<Eigen::Infinity>());
        dcol[j] = v > 0.0 ? std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4) : 1.0;
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        const double v = Cs.row(i).lpNorm<Eigen::Infinity>();
        drow[i] = v > 0.0 ? std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4) : 1.0;
      }
      Ps = dcol.asDiagonal() * Ps * dcol.asDiagonal();
      Cs = drow.asDiagonal() * Cs * dcol.asDiagonal();
      qs = dcol.asDiagonal() * qs;
      D = D.cwiseProduct(dcol);
      Es = Es.cwiseProduct(drow);
    }
    double cost_scale = 1.0;
    {
      const double mean_col = n ? Ps.colwise().lpNorm<Eigen::Infinity>().mean() : 1.0;
      const double v = std::max(mean_col, qs.lpNorm<Eigen::Infinity>());
      if (v > 0.0) cost_scale = std::clamp(1.0 / v, 1e-4, 1e4);
    }
    Ps *= cost_scale;
    qs *= cost_scale;
    const Eigen::VectorXd ls = Es.cwiseProduct(lower), us = Es.cwiseProduct(upper);

    double rho = opt.admm_rho;
    Eigen::VectorXd rho_vec(m);
    auto set_rho = [&] {
      for (Eigen::Index i = 0; i < m; ++i) rho_vec[i] = i < meq ? 1e3 * rho : rho;
    };
    set_rho();
    Eigen::LLT<Eigen::MatrixXd> llt;
    auto factor = [&] {
      Eigen::MatrixXd K = Ps + Cs.transpose() * rho_vec.asDiagonal() * Cs;
      K.diagonal().array() += opt.admm_sigma;
      llt.compute(K);
      if (llt.info() != Eigen::Success) throw NumericalError("cls admm: KKT factorization failed");
    };
    factor();

    Eigen::VectorXd xs = Eigen::VectorXd::Zero(n), zs = Eigen::VectorXd::Zero(m), ys = Eigen::VectorXd::Zero(m);
    const double alpha = opt.admm_alpha;
    for (iterations = 1; iterations <= opt.max_iter; ++iterations) {
      const Eigen::VectorXd rhs = opt.admm_sigma * xs - qs + Cs.transpose() * (rho_vec.cwiseProduct(zs) - ys);
      const Eigen::VectorXd xt = llt.solve(rhs);
      const Eigen::VectorXd zt = Cs * xt;
      xs = alpha * xt + (1.0 - alpha) * xs;
      const Eigen::VectorXd zr = alpha * zt + (1.0 - alpha) * zs;
      const Eigen::VectorXd znew = (zr + ys.cwiseQuotient(rho_vec)).cwiseMax(ls).cwiseMin(us);
      ys += rho_vec.cwiseProduct(zr - znew);
      zs = znew;

      if (checkpoint && iterations % checkpoint_every == 0 &&
          checkpoint(D.cwiseProduct(xs), Es.cwiseProduct(ys) / cost_scale)) {
        stopped = true;
        break;
      }
      if (iterations % 10 != 0) continue;
      const Eigen::VectorXd cx = Cs * xs;
      const Eigen::VectorXd px = Ps * xs;
      const Eigen::VectorXd cty = Cs.transpose() * ys;
      const double r_prim = m ? (cx - zs).cwiseQuotient(Es).lpNorm<Eigen::Infinity>() : 0.0;
      const double r_dual = (px + qs + cty).cwiseQuotient(D).lpNorm<Eigen::Infinity>() / cost_scale;
      const double n_prim = m ? std::max(cx.cwiseQuotient(Es).lpNorm<Eigen::Infinity>(),
                                         zs.cwiseQuotient(Es).lpNorm<Eigen::Infinity>())
                              : 0.0;
      const double n_dual = std::max({px.cwiseQuotient(D).lpNorm<Eigen::Infinity>(),
                                      cty.cwiseQuotient(D).lpNorm<Eigen::Infinity>(),
                                      qs.cwiseQuotient(D).lpNorm<Eigen::Infinity>()}) /
                            cost_scale;
      if (r_prim <= opt.admm_eps * (1.0 + n_prim) && r_dual <= opt.admm_eps * (1.0 + n_dual)) {
        converged = true;
        break;
      }
      if (iterations % 50 == 0 && m) {
        const double sp = (cx - zs).lpNorm<Eigen::Infinity>() /
                          std::max({cx.lpNorm<Eigen::Infinity>(), zs.lpNorm<Eigen::Infinity>(), 1e-30});
        const double sd = (px + qs + cty).lpNorm<Eigen::Infinity>() /
                          std::max({px.lpNorm<Eigen::Infinity>(), cty.lpNorm<Eigen::Infinity>(),
                                    qs.lpNorm<Eigen::Infinity>(), 1e-30});
        const double proposal = std::clamp(rho * std::sqrt(sp / std::max(sd, 1e-30)), 1e-6, 1e6);
        if (proposal > 5.0 * rho || proposal < 0.2 * rho) {
          rho = proposal;
          set_rho();
          factor();
        }
      }
    }
    x = D.cwiseProduct(xs);
    y = Es.cwiseProduct(ys) / cost_scale;
  }
};

/// Primal active-set refinement from a guessed working set: solve the
/// equality-constrained problem, then drop the most negative multiplier or
/// add the most violated row (lowest index on ties) until optimal.
inline bool polish(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& G,
                   const Eigen::VectorXd& h, const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                   std::vector<char> working, const Options& opt, Eigen::VectorXd& x, Eigen::VectorXd& lambda,
                   Eigen::VectorXd& mu, int& iterations) {
  const auto n = P.rows();
  const auto q_rows = G.rows();
  const auto meq = E.rows();
  const double dual_tol = opt.tol_kkt * std::max(1.0, q.lpNorm<Eigen::Infinity>());
  for (int it = 0; it < opt.polish_iter; ++it) {
    ++iterations;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < q_rows; ++i)
      if (working[i]) rows.push_back(i);
    const auto nw = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd C(meq + nw, n);
    Eigen::VectorXd rhs(meq + nw);
    if (meq) {
      C.topRows(meq) = E;
      rhs.head(meq) = e;
    }
    for (Eigen::Index k = 0; k < nw; ++k) {
      C.row(meq + k) = G.row(rows[k]);
      rhs[meq + k] = h[rows[k]];
    }
    Eigen::VectorXd yw;
    solve_working_set(P, -q, C, rhs, x, yw);
    mu = yw.head(meq);
    lambda = Eigen::VectorXd::Zero(q_rows);
    Eigen::Index neg = -1;
    double most_neg = -dual_tol;
    for (Eigen::Index k = 0; k < nw; ++k) {
      lambda[rows[k]] = yw[meq + k];
      if (yw[meq + k] < most_neg) {
        most_neg = yw[meq + k];
        neg = rows[k];
      }
    }
    Eigen::Index add = -1;
    double most_viol = 0.1 * opt.tol_feas;
    if (q_rows) {
      const Eigen::VectorXd s = G * x - h;
      for (Eigen::Index i = 0; i < q_rows; ++i)
        if (!working[i] && s[i] > most_viol) {
          most_viol = s[i];
          add = i;
        }
    }
    if (neg < 0 && add < 0) {
      lambda = lambda.cwiseMax(0.0);
      return true;
    }
    if (neg >= 0)
      working[neg] = 0;
    else
      working[add] = 1;
  }
  return false;
}

/// Fixes coordinates pinned by equality rows with a single nonzero.
struct Elimination {
  std::vector<Eigen::Index> fixed;  // column indices
  std::vector<Eigen::Index> rows;   // originating equality rows
  std::vector<double> values;
  std::vector<Eigen::Index> kept;

  static Elimination plan(const Problem& p) {
    Elimination el;
    std::vector<char> pinned(static_cast<std::size_t>(p.variables()), 0);
    for (Eigen::Index r = 0; r < p.E.rows(); ++r) {
      Eigen::Index col = -1, count = 0;
      for (Eigen::Index j = 0; j < p.E.cols(); ++j)
        if (p.E(r, j) != 0.0) {
          col = j;
          ++count;
        }
      if (count != 1) throw PreconditionError("cls: only equality rows with a single nonzero can be eliminated");
      if (pinned[col]) throw PreconditionError("cls: a variable is pinned by two equality rows");
      pinned[col] = 1;
      el.fixed.push_back(col);
      el.rows.push_back(r);
      el.values.push_back(p.e[r] / p.E(r, col));
    }
    for (Eigen::Index j = 0; j < p.variables(); ++j)
      if (!pinned[j]) el.kept.push_back(j);
    return el;
  }
};

}  // namespace detail

/// Phase-1 feasibility check (see FeasibilityReport).
inline FeasibilityReport feasibility_check(const Problem& p, double tol_feas = 1e-8) {
  p.validate();
  const auto n = p.variables();
  if (p.G.rows() == 0 && p.E.rows() == 0) {
    FeasibilityReport rep;
    rep.feasible = true;
    rep.witness = Eigen::VectorXd::Zero(n);
    return rep;
  }
  const Eigen::MatrixXd G = p.G.rows() ? p.G : Eigen::MatrixXd(0, n);
  const Eigen::MatrixXd E = p.E.rows() ? p.E : Eigen::MatrixXd(0, n);
  return detail::phase_one(G, p.h, E, p.e, n, tol_feas);
}

inline Solution solve(const Problem& problem, const Options& opt = {});

namespace detail {

inline Solution solve_reduced(const Problem& p, const Options& opt) {
  Solution sol;
  sol.backend = to_string(opt.backend);
  const auto n = p.variables();
  const Eigen::MatrixXd G = p.G.rows() ? p.G : Eigen::MatrixXd(0, n);
  const Eigen::MatrixXd E = p.E.rows() ? p.E : Eigen::MatrixXd(0, n);
  const Reduction red = reduce(p.A, p.b);
  sol.regularization = red.regularization;

  auto finish_infeasible = [&](const std::string& why) {
    sol.status = Status::infeasible;
    sol.message = why;
    sol.infeasibility = phase_one(G, p.h, E, p.e, n, opt.tol_feas);
    sol.x = sol.infeasibility->witness;
    sol.lambda = Eigen::VectorXd::Zero(G.rows());
    sol.mu = Eigen::VectorXd::Zero(E.rows());
  };

  if (opt.backend == Backend::active_set) {
    DualActiveSet gi{red.R, red.c, G, p.h, E, p.e, 1e-2 * opt.tol_feas, opt.max_iter, {}, {}, {}};
    gi.run();
    sol.iterations = gi.iterations;
    if (gi.infeasible) {
      finish_infeasible("dual active-set method found no feasible step");
      return sol;
    }
    sol.x = gi.x;
    sol.lambda = gi.lambda;
    sol.mu = gi.mu;
    sol.status = gi.exhausted ? Status::max_iterations : Status::solved;
    sol.message = gi.exhausted ? "iteration limit reached" : "optimal";
    return sol;
  }

  const FeasibilityReport pre = phase_one(G, p.h, E, p.e, n, opt.tol_feas);
  if (!pre.feasible) {
    sol.status = Status::infeasible;
    sol.message = "phase-1 violation is bounded away from zero";
    sol.infeasibility = pre;
    sol.x = pre.witness;
    sol.lambda = Eigen::VectorXd::Zero(G.rows());
    sol.mu = Eigen::VectorXd::Zero(E.rows());
    return sol;
  }

  const Eigen::MatrixXd P = 2.0 * (red.R.transpose() * red.R);
  const Eigen::VectorXd q = -2.0 * (red.R.transpose() * red.c);
  const auto meq = E.rows();
  const auto m = meq + G.rows();
  Eigen::MatrixXd C(m, n);
  C << E, G;
  Eigen::VectorXd lower(m), upper(m);
  lower << p.e, Eigen::VectorXd::Constant(G.rows(), -std::numeric_limits<double>::infinity());
  upper << p.e, p.h;
  // Polish from the active set suggested by an ADMM iterate (x, y).
  Eigen::VectorXd x, lambda, mu;
  int polish_steps = 0;
  auto try_polish = [&](const Eigen::VectorXd& xk, const Eigen::VectorXd& yk, int budget) {
    std::vector<char> working(static_cast<std::size_t>(G.rows()), 0);
    if (G.rows()) {
      const Eigen::VectorXd s = G * xk - p.h;
      const Eigen::VectorXd yg = yk.tail(G.rows());
      for (Eigen::Index i = 0; i < G.rows(); ++i) working[i] = yg[i] > -s[i] ? 1 : 0;
    }
    Options o = opt;
    o.polish_iter = budget;
    return polish(P, q, G, p.h, E, p.e, std::move(working), o, x, lambda, mu, polish_steps);
  };

  Admm admm{P, q, C, lower, upper, meq, opt, {}, 200, {}, {}};
  admm.checkpoint = [&](const Eigen::VectorXd& xk, const Eigen::VectorXd& yk) { return try_polish(xk, yk, 50); };
  admm.run();
  sol.iterations = admm.iterations;
  bool polished = admm.stopped;
  if (!polished) polished = try_polish(admm.x, admm.y, opt.polish_iter);
  sol.iterations += polish_steps;
  if (polished) {
    sol.x = x;
    sol.lambda = lambda;
    sol.mu = mu;
    sol.status = Status::solved;
    sol.message = admm.converged || admm.stopped ? "optimal (polished)" : "optimal (polished after iteration limit)";
    return sol;
  }
  // Polish failed to identify the active set: finish with the dual method.
  DualActiveSet gi{red.R, red.c, G, p.h, E, p.e, 1e-2 * opt.tol_feas, opt.max_iter, {}, {}, {}};
  gi.run();
  sol.iterations += gi.iterations;
  if (gi.infeasible) {
    finish_infeasible("dual active-set fallback found no feasible step");
    return sol;
  }
  sol.x = gi.x;
  sol.lambda = gi.lambda;
  sol.mu = gi.mu;
  sol.status = gi.exhausted ? Status::max_iterations : Status::solved;
  sol.message = gi.exhausted ? "iteration limit reached in active-set fallback" : "optimal (active-set fallback)";
  return sol;
}

}  // namespace detail

/// Solves the constrained least-squares problem. The returned status is
/// `solved` only if the recomputed KKT residuals meet the tolerances.
inline Solution solve(const Problem& problem, const Options& opt) {
  problem.validate();
  const double start = detail::now_seconds();
  Solution sol;
  if (opt.eliminate_equalities && problem.E.rows() > 0) {
    const auto el = detail::Elimination::plan(problem);
    const auto n = problem.variables();
    Eigen::VectorXd fixed_values = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < el.fixed.size(); ++k) fixed_values[el.fixed[k]] = el.values[k];
    Problem reduced;
    const auto nk = static_cast<Eigen::Index>(el.kept.size());
    reduced.A.resize(problem.A.rows(), nk);
    reduced.G.resize(problem.G.rows(), nk);
    for (Eigen::Index j = 0; j < nk; ++j) {
      reduced.A.col(j) = problem.A.col(el.kept[j]);
      if (problem.G.rows()) reduced.G.col(j) = problem.G.col(el.kept[j]);
    }
    reduced.b = problem.b - problem.A * fixed_values;
    reduced.h = problem.G.rows() ? Eigen::VectorXd(problem.h - problem.G * fixed_values) : problem.h;
    reduced.E.resize(0, nk);
    reduced.e.resize(0);
    Options inner = opt;
    inner.eliminate_equalities = false;
    Solution part = detail::solve_reduced(reduced, inner);
    sol = part;
    sol.x = fixed_values;
    for (Eigen::Index j = 0; j < nk; ++j) sol.x[el.kept[j]] = part.x[j];
    // Multipliers of the pinned coordinates from stationarity.
    Eigen::VectorXd grad =
        2.0 * (problem.A.transpose() * (problem.A * sol.x - problem.b) + part.regularization * sol.x);
    if (problem.G.rows()) grad += problem.G.transpose() * part.lambda;
    sol.mu = Eigen::VectorXd::Zero(problem.E.rows());
    for (std::size_t k = 0; k < el.fixed.size(); ++k)
      sol.mu[el.rows[k]] = -grad[el.fixed[k]] / problem.E(el.rows[k], el.fixed[k]);
    if (part.infeasibility) {
      auto& inf = *sol.infeasibility;
      Eigen::VectorXd w = fixed_values;
      for (Eigen::Index j = 0; j < nk; ++j) w[el.kept[j]] = inf.witness[j];
      inf.witness = w;
    }
  } else {
    sol = detail::solve_reduced(problem, opt);
  }

  sol.objective = problem.objective(sol.x);
  if (sol.status != Status::infeasible) {
    sol.kkt = kkt_residuals(problem, sol.x, sol.lambda, sol.mu, sol.regularization);
    if (sol.status == Status::solved &&
        (sol.kkt.primal_feasibility > opt.tol_feas ||
         std::max({sol.kkt.stationarity, sol.kkt.dual_feasibility, sol.kkt.complementarity}) > opt.tol_kkt)) {
      sol.status = Status::max_iterations;
      sol.message = "KKT residuals above tolerance after " + sol.message;
    }
  }
  sol.wall_time = detail::now_seconds() - start;
  return sol;
}

}  // namespace dvrft::cls
