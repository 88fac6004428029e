#pragma once

// Reference computations used only by the tests. Each one takes a different
// route from the library code it checks.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;

/// Roots of a polynomial (descending coefficients) by Durand-Kerner iteration
/// in long double.
inline std::vector<Complex> durand_kerner(std::vector<double> p) {
  while (!p.empty() && p.front() == 0.0) p.erase(p.begin());
  const int n = static_cast<int>(p.size()) - 1;
  if (n < 1) return {};
  using C = std::complex<long double>;
  std::vector<C> z(n);
  long double bound = 0;
  for (int i = 1; i <= n; ++i) bound = std::max(bound, std::abs(static_cast<long double>(p[i] / p[0])));
  const long double radius = 1 + bound;
  for (int i = 0; i < n; ++i) z[i] = std::polar(radius * 0.9L, 0.4L + 2.0L * 3.14159265358979323846L * i / n);
  auto eval = [&](C x) {
    C acc = 0;
    for (double c : p) acc = acc * x + static_cast<long double>(c / p[0]);
    return acc;
  };
  for (int it = 0; it < 5000; ++it) {
    long double change = 0;
    for (int i = 0; i < n; ++i) {
      C den = 1;
      for (int j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      const C step = eval(z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-30L) break;
  }
  std::vector<Complex> out;
  for (const auto& v : z) out.emplace_back(static_cast<double>(v.real()), static_cast<double>(v.imag()));
  return out;
}

/// Characteristic polynomial det(zI - A) by the Faddeev-LeVerrier recursion.
inline std::vector<double> char_poly(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  std::vector<double> c(n + 1);
  c[0] = 1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c[k - 1] * Eigen::MatrixXd::Identity(n, n);
    c[k] = -(a * m).trace() / static_cast<double>(k);
  }
  return c;
}

inline double max_root_modulus(const std::vector<double>& p) {
  double r = 0.0;
  for (const auto& z : durand_kerner(p)) r = std::max(r, std::abs(z));
  return r;
}

/// exp(M) by a long-double Taylor series with scaling and squaring.
inline Eigen::MatrixXd expm_taylor(const Eigen::MatrixXd& m) {
  using ML = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = m.rows();
  ML x = m.cast<long double>();
  int squarings = 0;
  long double norm = x.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.125L) {
    x /= 2.0L;
    norm /= 2.0L;
    ++squarings;
  }
  ML term = ML::Identity(n, n), sum = ML::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = term * x / static_cast<long double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum.cast<double>();
}

/// ZOH pair (A_d, B_d) through the augmented-matrix exponential.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> zoh(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double ts) {
  const auto n = a.rows(), m = b.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = a * ts;
  aug.topRightCorner(n, m) = b * ts;
  const Eigen::MatrixXd e = expm_taylor(aug);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

/// Output of a discrete SISO system as the convolution of the input with its
/// Markov parameters D, CB, CAB, ...
inline std::vector<double> convolve_markov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                           const Eigen::MatrixXd& c, double d, const std::vector<double>& u) {
  const std::size_t n = u.size();
  std::vector<double> h(n);
  h[0] = d;
  Eigen::VectorXd v = b.col(0);
  for (std::size_t k = 1; k < n; ++k) {
    h[k] = (c.row(0) * v)(0);
    v = a * v;
  }
  std::vector<double> y(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t k = 0; k <= t; ++k) y[t] += h[k] * u[t - k];
  return y;
}

/// Transfer function num(z)/den(z) (descending powers) evaluated directly.
inline Complex rational(const std::vector<double>& num, const std::vector<double>& den, Complex z) {
  Complex n = 0, d = 0;
  for (double c : num) n = n * z + c;
  for (double c : den) d = d * z + c;
  return n / d;
}

/// Direct-form difference equation y = (b/a)(x), coefficients in powers of
/// z^-1 with a[0] = 1.
inline std::vector<double> difference_equation(const std::vector<double>& b, const std::vector<double>& a,
                                               const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < b.size() && k <= t; ++k) acc += b[k] * x[t - k];
    for (std::size_t k = 1; k < a.size() && k <= t; ++k) acc -= a[k] * y[t - k];
    y[t] = acc / a[0];
  }
  return y;
}

struct ClsInstance {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
};

struct OracleResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x;
};

/// Exhaustive active-set enumeration for min ||Ax - b||^2 s.t. Gx <= h,
/// Ex = e with A of full column rank: every subset W of inequality rows is
/// tried as equalities, the KKT system is solved by a dense LU and the
/// candidate is kept if it is primal feasible and has nonnegative
/// multipliers. The best such candidate is the optimum.
inline OracleResult enumerate_active_sets(const ClsInstance& p, double tol = 1e-9) {
  const auto n = p.A.cols();
  const auto q = p.G.rows();
  const auto r = p.E.rows();
  const Eigen::MatrixXd H = 2.0 * p.A.transpose() * p.A;
  const Eigen::VectorXd g = -2.0 * p.A.transpose() * p.b;
  OracleResult best;
  for (std::uint32_t mask = 0; mask < (1u << q); ++mask) {
    std::vector<Eigen::Index> w;
    for (Eigen::Index i = 0; i < q; ++i)
      if (mask & (1u << i)) w.push_back(i);
    const auto k = static_cast<Eigen::Index>(w.size()) + r;
    if (k > n) continue;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    kkt.topLeftCorner(n, n) = H;
    rhs.head(n) = -g;
    for (Eigen::Index i = 0; i < r; ++i) {
      kkt.block(n + i, 0, 1, n) = p.E.row(i);
      kkt.block(0, n + i, n, 1) = p.E.row(i).transpose();
      rhs[n + i] = p.e[i];
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      const auto row = n + r + static_cast<Eigen::Index>(j);
      kkt.block(row, 0, 1, n) = p.G.row(w[j]);
      kkt.block(0, row, n, 1) = p.G.row(w[j]).transpose();
      rhs[row] = p.h[w[j]];
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    bool ok = true;
    for (std::size_t j = 0; j < w.size() && ok; ++j) ok = sol[n + r + static_cast<Eigen::Index>(j)] >= -tol;
    if (q > 0) ok = ok && ((p.G * x - p.h).maxCoeff() <= tol);
    if (r > 0) ok = ok && ((p.E * x - p.e).cwiseAbs().maxCoeff() <= tol);
    if (!ok) continue;
    const double f = (p.A * x - p.b).squaredNorm();
    if (f < best.objective) {
      best.feasible = true;
      best.objective = f;
      best.x = x;
    }
  }
  return best;
}

}  // namespace oracle
