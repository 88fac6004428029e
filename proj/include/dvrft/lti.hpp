#pragma once

/// @file
/// Discrete and continuous LTI systems: transfer functions, state-space
/// models, sampled signals, simulation, discretization, frequency response
/// and closed-loop interconnection.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvrft/errors.hpp"

namespace dvrft {

using Complex = std::complex<double>;

enum class Domain { continuous, discrete };

inline const char* to_string(Domain d) { return d == Domain::continuous ? "continuous" : "discrete"; }

/// Returns a complex value with infinite real and imaginary parts.
inline Complex unbounded() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {inf, inf};
}

inline bool is_unbounded(Complex v) { return !std::isfinite(v.real()) || !std::isfinite(v.imag()); }

// ---------------------------------------------------------------------------
// Polynomials, coefficients in descending powers.
// ---------------------------------------------------------------------------
namespace poly {

using Coeffs = std::vector<double>;

/// Strips leading zeros; the zero polynomial is {0}.
inline Coeffs trim(Coeffs p) {
  auto first = std::find_if(p.begin(), p.end(), [](double c) { return c != 0.0; });
  if (first == p.end()) return {0.0};
  p.erase(p.begin(), first);
  return p;
}

inline bool is_zero(const Coeffs& p) {
  return std::all_of(p.begin(), p.end(), [](double c) { return c == 0.0; });
}

/// Degree of the trimmed polynomial; -1 for the zero polynomial.
inline int degree(const Coeffs& p) {
  if (is_zero(p)) return -1;
  return static_cast<int>(trim(p).size()) - 1;
}

inline Coeffs add(const Coeffs& a, const Coeffs& b) {
  Coeffs out(std::max(a.size(), b.size()), 0.0);
  std::copy_backward(a.begin(), a.end(), out.end());
  for (std::size_t i = 0; i < b.size(); ++i) out[out.size() - b.size() + i] += b[i];
  return trim(out);
}

inline Coeffs scale(Coeffs a, double k) {
  for (double& c : a) c *= k;
  return trim(a);
}

inline Coeffs sub(const Coeffs& a, const Coeffs& b) { return add(a, scale(b, -1.0)); }

inline Coeffs mul(const Coeffs& a, const Coeffs& b) {
  Coeffs out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return trim(out);
}

inline Complex eval(const Coeffs& p, Complex x) {
  Complex acc{0.0, 0.0};
  for (double c : p) acc = acc * x + c;
  return acc;
}

/// Roots through the eigenvalues of the companion matrix.
inline Eigen::VectorXcd roots(const Coeffs& p_in) {
  const Coeffs p = trim(p_in);
  const int n = static_cast<int>(p.size()) - 1;
  if (n <= 0) return Eigen::VectorXcd(0);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) companion(0, j) = -p[j + 1] / p[0];
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  if (es.info() != Eigen::Success) throw NumericalError("polynomial root finding did not converge");
  return es.eigenvalues();
}

/// Monic polynomial with the given roots; imaginary parts of the
/// coefficients are discarded (roots are assumed closed under conjugation).
inline Coeffs from_roots(const Eigen::VectorXcd& r) {
  std::vector<Complex> c{Complex{1.0, 0.0}};
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    std::vector<Complex> next(c.size() + 1, Complex{0.0, 0.0});
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r[k];
    }
    c = std::move(next);
  }
  Coeffs out(c.size());
  std::transform(c.begin(), c.end(), out.begin(), [](Complex v) { return v.real(); });
  return out;
}

}  // namespace poly

// ---------------------------------------------------------------------------
// SignalRecord
// ---------------------------------------------------------------------------

/// Uniformly sampled scalar time series.
class SignalRecord {
 public:
  SignalRecord(std::vector<double> samples, double ts, std::string label = {})
      : samples_(std::move(samples)), ts_(ts), label_(std::move(label)) {
    if (samples_.empty()) throw PreconditionError("SignalRecord: at least one sample is required");
    if (!(ts_ > 0.0) || !std::isfinite(ts_)) throw PreconditionError("SignalRecord: sample period must be positive");
    for (std::size_t i = 0; i < samples_.size(); ++i)
      if (!std::isfinite(samples_[i]))
        throw PreconditionError("SignalRecord: non-finite sample at index " + std::to_string(i));
  }

  const std::vector<double>& samples() const noexcept { return samples_; }
  std::span<const double> view() const noexcept { return samples_; }
  double ts() const noexcept { return ts_; }
  const std::string& label() const noexcept { return label_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double operator[](std::size_t i) const { return samples_[i]; }

  Eigen::Map<const Eigen::VectorXd> vector() const {
    return {samples_.data(), static_cast<Eigen::Index>(samples_.size())};
  }

 private:
  std::vector<double> samples_;
  double ts_;
  std::string label_;
};

inline bool same_period(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

// ---------------------------------------------------------------------------
// TransferFunction
// ---------------------------------------------------------------------------

/// Rational SISO transfer function in descending powers of s or z.
class TransferFunction {
 public:
  static TransferFunction continuous(poly::Coeffs num, poly::Coeffs den) {
    return TransferFunction(std::move(num), std::move(den), Domain::continuous, 0.0);
  }

  static TransferFunction discrete(poly::Coeffs num, poly::Coeffs den, double ts) {
    return TransferFunction(std::move(num), std::move(den), Domain::discrete, ts);
  }

  /// Discrete TF from coefficients in ascending powers of z^-1:
  /// (b0 + b1 z^-1 + ...) / (a0 + a1 z^-1 + ...).
  static TransferFunction discrete_z_inverse(const poly::Coeffs& b, const poly::Coeffs& a, double ts) {
    const std::size_t n = std::max(b.size(), a.size());
    poly::Coeffs num(n, 0.0), den(n, 0.0);
    std::copy(b.begin(), b.end(), num.begin());
    std::copy(a.begin(), a.end(), den.begin());
    return discrete(std::move(num), std::move(den), ts);
  }

  /// FIR filter sum_t taps[t] z^-t.
  static TransferFunction fir(const std::vector<double>& taps, double ts) {
    if (taps.empty()) return gain(0.0, Domain::discrete, ts);
    return discrete_z_inverse(taps, {1.0}, ts);
  }

  static TransferFunction gain(double k, Domain domain, double ts = 0.0) {
    return TransferFunction({k}, {1.0}, domain, ts);
  }

  const poly::Coeffs& num() const noexcept { return num_; }
  const poly::Coeffs& den() const noexcept { return den_; }
  Domain domain() const noexcept { return domain_; }
  bool is_discrete() const noexcept { return domain_ == Domain::discrete; }
  double ts() const noexcept { return ts_; }

  int order() const noexcept { return static_cast<int>(den_.size()) - 1; }
  bool is_zero() const { return poly::is_zero(num_); }

  /// deg(den) - deg(num); zero for the zero transfer function.
  int relative_degree() const { return is_zero() ? 0 : order() - poly::degree(num_); }
  bool is_proper() const { return relative_degree() >= 0; }

  /// Rational evaluation at a point of the complex plane. Poles evaluate to
  /// unbounded().
  Complex evaluate(Complex x) const {
    const Complex d = poly::eval(den_, x);
    const Complex n = poly::eval(num_, x);
    double scale = 0.0;
    const double r = std::max(1.0, std::abs(x));
    double power = 1.0;
    for (auto it = den_.rbegin(); it != den_.rend(); ++it, power *= r) scale += std::abs(*it) * power;
    if (std::abs(d) <= 1e-14 * scale) return unbounded();
    return n / d;
  }

  /// Numerator and denominator as ascending coefficients of z^-1 with a
  /// common length (denominator degree + 1).
  std::pair<poly::Coeffs, poly::Coeffs> z_inverse_coeffs() const {
    poly::Coeffs b(den_.size(), 0.0);
    const int k = order() - static_cast<int>(num_.size()) + 1;
    if (k < 0) throw PreconditionError("improper transfer function has no causal z^-1 form");
    std::copy(num_.begin(), num_.end(), b.begin() + k);
    return {b, den_};
  }

  friend TransferFunction operator*(const TransferFunction& a, const TransferFunction& b) {
    check_compatible(a, b);
    return {poly::mul(a.num_, b.num_), poly::mul(a.den_, b.den_), a.domain_, a.ts_};
  }

  friend TransferFunction operator+(const TransferFunction& a, const TransferFunction& b) {
    check_compatible(a, b);
    if (a.den_ == b.den_) return {poly::add(a.num_, b.num_), a.den_, a.domain_, a.ts_};
    return {poly::add(poly::mul(a.num_, b.den_), poly::mul(b.num_, a.den_)), poly::mul(a.den_, b.den_), a.domain_,
            a.ts_};
  }

  friend TransferFunction operator-(const TransferFunction& a) {
    return {poly::scale(a.num_, -1.0), a.den_, a.domain_, a.ts_};
  }

  friend TransferFunction operator-(const TransferFunction& a, const TransferFunction& b) { return a + (-b); }

  friend TransferFunction operator/(const TransferFunction& a, const TransferFunction& b) {
    check_compatible(a, b);
    if (b.is_zero()) throw PreconditionError("transfer function division by the zero polynomial");
    return {poly::mul(a.num_, b.den_), poly::mul(a.den_, b.num_), a.domain_, a.ts_};
  }

 private:
  TransferFunction(poly::Coeffs num, poly::Coeffs den, Domain domain, double ts)
      : num_(poly::trim(std::move(num))), den_(poly::trim(std::move(den))), domain_(domain), ts_(ts) {
    if (num_.empty()) num_ = {0.0};
    if (poly::is_zero(den_)) throw PreconditionError("TransferFunction: denominator is identically zero");
    for (double c : num_)
      if (!std::isfinite(c)) throw PreconditionError("TransferFunction: non-finite numerator coefficient");
    for (double c : den_)
      if (!std::isfinite(c)) throw PreconditionError("TransferFunction: non-finite denominator coefficient");
    if (domain_ == Domain::discrete && !(ts_ > 0.0))
      throw PreconditionError("TransferFunction: discrete systems need a positive sample period");
    if (domain_ == Domain::continuous) ts_ = 0.0;
    // Normalise so the leading denominator coefficient is one.
    const double lead = den_.front();
    for (double& c : den_) c /= lead;
    for (double& c : num_) c /= lead;
  }

  static void check_compatible(const TransferFunction& a, const TransferFunction& b) {
    if (a.domain_ != b.domain_) throw DomainError("transfer functions live in different domains");
    if (a.is_discrete() && !same_period(a.ts_, b.ts_)) throw DomainError("transfer functions have different Ts");
  }

  poly::Coeffs num_;
  poly::Coeffs den_;
  Domain domain_;
  double ts_;
};

// ---------------------------------------------------------------------------
// StateSpace
// ---------------------------------------------------------------------------

class StateSpace {
 public:
  StateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d, Domain domain,
             double ts = 0.0)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)), domain_(domain), ts_(ts) {
    const auto n = a_.rows();
    if (a_.cols() != n) throw DimensionError("StateSpace: A must be square");
    if (b_.rows() != n) throw DimensionError("StateSpace: B must have as many rows as A");
    if (c_.cols() != n) throw DimensionError("StateSpace: C must have as many columns as A");
    if (d_.rows() != c_.rows() || d_.cols() != b_.cols()) throw DimensionError("StateSpace: D must be p x m");
    if (domain_ == Domain::discrete && !(ts_ > 0.0))
      throw PreconditionError("StateSpace: discrete systems need a positive sample period");
    if (domain_ == Domain::continuous) ts_ = 0.0;
  }

  static StateSpace static_gain(double k, Domain domain, double ts = 0.0) {
    return {Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 1), Eigen::MatrixXd(1, 0), Eigen::MatrixXd::Constant(1, 1, k),
            domain, ts};
  }

  const Eigen::MatrixXd& a() const noexcept { return a_; }
  const Eigen::MatrixXd& b() const noexcept { return b_; }
  const Eigen::MatrixXd& c() const noexcept { return c_; }
  const Eigen::MatrixXd& d() const noexcept { return d_; }
  Domain domain() const noexcept { return domain_; }
  bool is_discrete() const noexcept { return domain_ == Domain::discrete; }
  double ts() const noexcept { return ts_; }
  Eigen::Index n_states() const noexcept { return a_.rows(); }
  Eigen::Index n_inputs() const noexcept { return b_.cols(); }
  Eigen::Index n_outputs() const noexcept { return c_.rows(); }
  bool is_siso() const noexcept { return n_inputs() == 1 && n_outputs() == 1; }

  bool all_finite() const { return a_.allFinite() && b_.allFinite() && c_.allFinite() && d_.allFinite(); }

  /// Keeps one output row and one input column.
  StateSpace channel(Eigen::Index output, Eigen::Index input) const {
    if (output < 0 || output >= n_outputs() || input < 0 || input >= n_inputs())
      throw DimensionError("StateSpace::channel: index out of range");
    return {a_, b_.col(input), c_.row(output), d_.block(output, input, 1, 1), domain_, ts_};
  }

  /// Similarity transform x' = T x.
  StateSpace transformed(const Eigen::MatrixXd& t) const {
    const Eigen::MatrixXd t_inv = t.inverse();
    return {t * a_ * t_inv, t * b_, c_ * t_inv, d_, domain_, ts_};
  }

 private:
  Eigen::MatrixXd a_, b_, c_, d_;
  Domain domain_;
  double ts_;
};

// ---------------------------------------------------------------------------
// Conversions
// ---------------------------------------------------------------------------

/// Controllable canonical realization of a proper transfer function.
inline StateSpace to_state_space(const TransferFunction& tf) {
  if (!tf.is_proper()) throw PreconditionError("to_state_space: transfer function is improper");
  const auto& den = tf.den();  // monic
  const int n = tf.order();
  poly::Coeffs num(n + 1, 0.0);
  std::copy(tf.num().begin(), tf.num().end(), num.end() - static_cast<long>(tf.num().size()));
  const double d = num[0];
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, 1);
  Eigen::MatrixXd c(1, n);
  for (int j = 0; j < n; ++j) {
    a(0, j) = -den[j + 1];
    c(0, j) = num[j + 1] - d * den[j + 1];
  }
  for (int i = 1; i < n; ++i) a(i, i - 1) = 1.0;
  if (n > 0) b(0, 0) = 1.0;
  return {a, b, c, Eigen::MatrixXd::Constant(1, 1, d), tf.domain(), tf.ts()};
}

/// SISO transfer function of one channel, via
/// C (xI - A)^-1 B = det(xI - A + B C) / det(xI - A) - 1.
inline TransferFunction to_transfer_function(const StateSpace& sys, Eigen::Index output = 0, Eigen::Index input = 0) {
  const StateSpace ch = sys.channel(output, input);
  const double d = ch.d()(0, 0);
  auto make = [&](poly::Coeffs num, poly::Coeffs den) {
    return ch.is_discrete() ? TransferFunction::discrete(std::move(num), std::move(den), ch.ts())
                            : TransferFunction::continuous(std::move(num), std::move(den));
  };
  if (ch.n_states() == 0) return make({d}, {1.0});
  Eigen::EigenSolver<Eigen::MatrixXd> open(ch.a(), false);
  Eigen::EigenSolver<Eigen::MatrixXd> closed(ch.a() - ch.b() * ch.c(), false);
  if (open.info() != Eigen::Success || closed.info() != Eigen::Success)
    throw NumericalError("to_transfer_function: eigenvalue iteration did not converge");
  const poly::Coeffs den = poly::from_roots(open.eigenvalues());
  poly::Coeffs num = poly::sub(poly::from_roots(closed.eigenvalues()), den);
  num = poly::add(num, poly::scale(den, d));
  // Cancellation leaves tiny leading terms; drop those far below the rest.
  double mag = 0.0;
  for (double v : num) mag = std::max(mag, std::abs(v));
  while (num.size() > 1 && std::abs(num.front()) <= 1e-13 * mag) num.erase(num.begin());
  return make(std::move(num), den);
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

enum class DiscretizationRule { zoh, bilinear };

/// Zero-order-hold discretization through the exponential of the augmented
/// matrix [[A, B], [0, 0]] Ts.
inline StateSpace zoh_discretize(const StateSpace& sys, double ts) {
  if (sys.is_discrete()) throw DomainError("zoh_discretize: system is already discrete");
  if (!(ts > 0.0) || !std::isfinite(ts)) throw PreconditionError("zoh_discretize: Ts must be positive");
  if (!sys.all_finite()) throw NumericalError("zoh_discretize: non-finite matrix entries");
  const auto n = sys.n_states();
  const auto m = sys.n_inputs();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.a() * ts;
  aug.topRightCorner(n, m) = sys.b() * ts;
  const Eigen::MatrixXd phi = aug.exp();
  if (!phi.allFinite()) throw NumericalError("zoh_discretize: matrix exponential overflowed");
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, m), sys.c(), sys.d(), Domain::discrete, ts};
}

/// Tustin (bilinear) discretization.
inline StateSpace bilinear_discretize(const StateSpace& sys, double ts) {
  if (sys.is_discrete()) throw DomainError("bilinear_discretize: system is already discrete");
  if (!(ts > 0.0) || !std::isfinite(ts)) throw PreconditionError("bilinear_discretize: Ts must be positive");
  if (!sys.all_finite()) throw NumericalError("bilinear_discretize: non-finite matrix entries");
  const auto n = sys.n_states();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(eye - sys.a() * (ts / 2.0));
  const Eigen::MatrixXd ad = lu.solve(eye + sys.a() * (ts / 2.0));
  const Eigen::MatrixXd bd = lu.solve(sys.b()) * ts;
  const Eigen::MatrixXd cd = sys.c() * lu.inverse();
  const Eigen::MatrixXd dd = sys.d() + sys.c() * lu.solve(sys.b()) * (ts / 2.0);
  return {ad, bd, cd, dd, Domain::discrete, ts};
}

inline StateSpace discretize(const StateSpace& sys, double ts, DiscretizationRule rule = DiscretizationRule::zoh) {
  return rule == DiscretizationRule::zoh ? zoh_discretize(sys, ts) : bilinear_discretize(sys, ts);
}

inline TransferFunction discretize(const TransferFunction& tf, double ts,
                                   DiscretizationRule rule = DiscretizationRule::zoh) {
  return to_transfer_function(discretize(to_state_space(tf), ts, rule));
}

// ---------------------------------------------------------------------------
// Frequency response
// ---------------------------------------------------------------------------

/// Point of the complex plane for a frequency: e^{j theta} (discrete,
/// theta in rad/sample) or j omega (continuous, rad/s).
inline Complex frequency_point(Domain domain, double w) {
  return domain == Domain::discrete ? std::polar(1.0, w) : Complex{0.0, w};
}

inline Complex frequency_response(const TransferFunction& tf, double w) {
  if (tf.is_discrete() && (w < -1e-12 || w > std::numbers::pi + 1e-12))
    throw PreconditionError("frequency_response: theta must lie in [0, pi]");
  return tf.evaluate(frequency_point(tf.domain(), w));
}

inline Complex frequency_response(const StateSpace& sys, double w, Eigen::Index output = 0, Eigen::Index input = 0) {
  if (sys.is_discrete() && (w < -1e-12 || w > std::numbers::pi + 1e-12))
    throw PreconditionError("frequency_response: theta must lie in [0, pi]");
  const Complex x = frequency_point(sys.domain(), w);
  const Complex direct = sys.d()(output, input);
  const auto n = sys.n_states();
  if (n == 0) return direct;
  Eigen::MatrixXcd m = -sys.a().cast<Complex>();
  m.diagonal().array() += x;
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
  if (lu.rcond() < 1e-15) return unbounded();
  const Eigen::VectorXcd v = lu.solve(sys.b().col(input).cast<Complex>());
  return (sys.c().row(output).cast<Complex>() * v)(0, 0) + direct;
}

/// Uniform grid of `count` points over [0, pi] (both ends included).
inline std::vector<double> uniform_theta_grid(int count) {
  if (count < 2) throw PreconditionError("uniform_theta_grid: need at least two points");
  std::vector<double> g(count);
  for (int k = 0; k < count; ++k) g[k] = std::numbers::pi * k / (count - 1);
  return g;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Zero-initial-state response; `inputs` is N x m, the result N x p.
inline Eigen::MatrixXd simulate(const StateSpace& sys, const Eigen::MatrixXd& inputs) {
  if (!sys.is_discrete()) throw DomainError("simulate: only discrete systems can be simulated");
  if (inputs.cols() != sys.n_inputs()) throw DimensionError("simulate: input column count differs from B");
  const auto n_samples = inputs.rows();
  Eigen::MatrixXd out(n_samples, sys.n_outputs());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n_states());
  Eigen::VectorXd next(sys.n_states());
  for (Eigen::Index t = 0; t < n_samples; ++t) {
    const auto u = inputs.row(t).transpose();
    out.row(t).noalias() = (sys.c() * x + sys.d() * u).transpose();
    next.noalias() = sys.a() * x;
    next.noalias() += sys.b() * u;
    x.swap(next);
  }
  return out;
}

inline SignalRecord simulate(const StateSpace& sys, const SignalRecord& input) {
  if (!sys.is_siso()) throw DimensionError("simulate: SignalRecord overload needs a SISO system");
  if (!sys.is_discrete()) throw DomainError("simulate: only discrete systems can be simulated");
  if (!same_period(sys.ts(), input.ts())) throw DomainError("simulate: sample period differs from the system's");
  const Eigen::MatrixXd y = simulate(sys, Eigen::MatrixXd(input.vector()));
  return {std::vector<double>(y.data(), y.data() + y.size()), input.ts(), input.label()};
}

/// Zero-initial-condition difference equation of a proper discrete transfer
/// function (direct form II transposed).
inline std::vector<double> filter(const TransferFunction& tf, std::span<const double> x) {
  if (!tf.is_discrete()) throw DomainError("filter: transfer function must be discrete");
  const auto [b, a] = tf.z_inverse_coeffs();  // a[0] == 1
  const std::size_t n = a.size();
  std::vector<double> state(n, 0.0);
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double out = b[0] * x[t] + state[0];
    for (std::size_t i = 1; i < n; ++i) state[i - 1] = b[i] * x[t] - a[i] * out + (i < n - 1 ? state[i] : 0.0);
    if (n == 1) state[0] = 0.0;
    y[t] = out;
  }
  return y;
}

inline SignalRecord filter(const TransferFunction& tf, const SignalRecord& x) {
  if (!tf.is_discrete()) throw DomainError("filter: transfer function must be discrete");
  if (!same_period(tf.ts(), x.ts())) throw DomainError("filter: sample period differs from the transfer function's");
  return {filter(tf, x.view()), x.ts(), x.label()};
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

inline double spectral_radius(const StateSpace& sys) {
  if (sys.n_states() == 0) return 0.0;
  if (!sys.a().allFinite()) throw NumericalError("spectral_radius: non-finite state matrix");
  Eigen::EigenSolver<Eigen::MatrixXd> es(sys.a(), true);
  if (es.info() != Eigen::Success) {
    throw NumericalError("spectral_radius: QR iteration did not converge");
  }
  const Eigen::MatrixXcd v = es.eigenvectors();
  const Eigen::MatrixXcd residual = sys.a().cast<Complex>() * v - v * es.eigenvalues().asDiagonal();
  if (residual.norm() > 1e-6 * std::max(1.0, sys.a().norm()) * std::sqrt(static_cast<double>(sys.n_states())))
    throw NumericalError("spectral_radius: eigen-decomposition residual " + std::to_string(residual.norm()));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool is_stable(const StateSpace& sys) {
  if (!sys.is_discrete()) throw DomainError("is_stable: discrete systems only");
  return spectral_radius(sys) < 1.0;
}

// ---------------------------------------------------------------------------
// Feedback interconnection
// ---------------------------------------------------------------------------

/// Which plant outputs carry the performance signal y and the measurement
/// fed back to the controller. Plant inputs are (u) or (u, d).
struct LoopSignals {
  Eigen::Index performance_output = 0;
  Eigen::Index feedback_output = 0;
};

/// Closed loop with inputs (r, d) and output y.
/// With a prefilter F: u = F(r) - C(y_fb). Without one: u = C(r - y_fb).
inline StateSpace connect_feedback(const StateSpace& plant, const StateSpace& controller,
                                   const std::optional<StateSpace>& prefilter = std::nullopt,
                                   LoopSignals signals = {}) {
  auto check = [&](const StateSpace& s, const char* name) {
    if (s.domain() != plant.domain()) throw DomainError(std::string("connect_feedback: ") + name + " domain differs");
    if (s.is_discrete() && !same_period(s.ts(), plant.ts()))
      throw DomainError(std::string("connect_feedback: ") + name + " sample period differs");
    if (!s.is_siso()) throw DimensionError(std::string("connect_feedback: ") + name + " must be SISO");
  };
  check(controller, "controller");
  if (prefilter) check(*prefilter, "prefilter");
  if (plant.n_inputs() < 1 || plant.n_inputs() > 2) throw DimensionError("connect_feedback: plant inputs are (u) or (u, d)");
  if (signals.performance_output >= plant.n_outputs() || signals.feedback_output >= plant.n_outputs())
    throw DimensionError("connect_feedback: output index out of range");

  const bool two_dof = prefilter.has_value();
  const bool has_d = plant.n_inputs() == 2;
  const auto np = plant.n_states();
  const auto nc = controller.n_states();
  const auto nr = two_dof ? prefilter->n_states() : Eigen::Index{0};
  const auto nt = np + nc + nr;

  const Eigen::MatrixXd bu = plant.b().col(0);
  const Eigen::MatrixXd bd = has_d ? Eigen::MatrixXd(plant.b().col(1)) : Eigen::MatrixXd::Zero(np, 1);
  const Eigen::RowVectorXd cy = plant.c().row(signals.performance_output);
  const Eigen::RowVectorXd cf = plant.c().row(signals.feedback_output);
  const double dyu = plant.d()(signals.performance_output, 0);
  const double dfu = plant.d()(signals.feedback_output, 0);
  const double dyd = has_d ? plant.d()(signals.performance_output, 1) : 0.0;
  const double dfd = has_d ? plant.d()(signals.feedback_output, 1) : 0.0;
  const double dc = controller.d()(0, 0);

  const double k = 1.0 + dc * dfu;
  if (std::abs(k) < 1e-12) throw IllPosedLoopError("connect_feedback: 1 + D_plant D_controller vanishes");

  // u = u_state * [x; xc; xr] + u_in * [r; d]
  Eigen::RowVectorXd u_state = Eigen::RowVectorXd::Zero(nt);
  Eigen::RowVector2d u_in = Eigen::RowVector2d::Zero();
  u_state.segment(0, np) = -dc * cf;
  u_in(1) = -dc * dfd;
  if (two_dof) {
    u_state.segment(np, nc) = -controller.c().row(0);
    u_state.segment(np + nc, nr) = prefilter->c().row(0);
    u_in(0) = prefilter->d()(0, 0);
  } else {
    u_state.segment(np, nc) = controller.c().row(0);
    u_in(0) = dc;
  }
  u_state /= k;
  u_in /= k;

  // Measurement and controller input.
  Eigen::RowVectorXd yf_state = dfu * u_state;
  yf_state.segment(0, np) += cf;
  Eigen::RowVector2d yf_in = dfu * u_in;
  yf_in(1) += dfd;
  Eigen::RowVectorXd e_state = two_dof ? yf_state : Eigen::RowVectorXd(-yf_state);
  Eigen::RowVector2d e_in = two_dof ? yf_in : Eigen::RowVector2d(Eigen::RowVector2d(1.0, 0.0) - yf_in);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nt, nt);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(nt, 2);
  a.block(0, 0, np, np) = plant.a();
  a.block(0, 0, np, nt) += bu * u_state;
  b.block(0, 0, np, 2) = bu * u_in;
  b.block(0, 1, np, 1) += bd;
  if (nc > 0) {
    a.block(np, np, nc, nc) = controller.a();
    a.block(np, 0, nc, nt) += controller.b() * e_state;
    b.block(np, 0, nc, 2) = controller.b() * e_in;
  }
  if (nr > 0) {
    a.block(np + nc, np + nc, nr, nr) = prefilter->a();
    b.block(np + nc, 0, nr, 1) = prefilter->b();
  }
  Eigen::MatrixXd c = dyu * u_state;
  c.block(0, 0, 1, np) += cy;
  Eigen::MatrixXd d = dyu * u_in;
  d(0, 1) += dyd;
  return {a, b, c, d, plant.domain(), plant.ts()};
}

}  // namespace dvrft
