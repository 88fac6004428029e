#pragma once

/// @file
/// Frequency-sampled dissipativity constraints on iFIR controllers and
/// their certification.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dvrft/lti.hpp"
#include "dvrft/vrft.hpp"

namespace dvrft {

enum class DissipativityCase { A, B, C };

inline const char* to_string(DissipativityCase c) {
  switch (c) {
    case DissipativityCase::A: return "A";
    case DissipativityCase::B: return "B";
    case DissipativityCase::C: return "C";
  }
  return "?";
}

inline DissipativityCase parse_case(const std::string& s) {
  if (s == "A") return DissipativityCase::A;
  if (s == "B") return DissipativityCase::B;
  if (s == "C") return DissipativityCase::C;
  throw PreconditionError("unknown dissipativity case '" + s + "'");
}

/// Plant indices, margins, sampling parameter and tap envelope.
///
/// Case A: plant with shortage of input passivity (nu1 <= 0); the controller
///         Nyquist locus must lie in a disk.
/// Case B: plant with excess of input passivity (nu1 >= 0); the locus must
///         lie in a right half-plane.
/// Case C: plant with finite l2 gain alpha1; the locus must lie in a disk
///         centred at the origin.
struct DissipativitySpec {
  DissipativityCase kase = DissipativityCase::A;
  double nu1 = 0.0;
  double rho1 = 0.0;
  double alpha1 = 1.0;
  double eps1 = 1e-3;
  double eps2 = 1e-3;
  double eps3 = 1e-3;
  int M = 500;
  double h0 = 1.0;
  double h = 0.98;
  /// Replaces the sampling margin epsilon_margin(m_fb, M, h0, h) when set.
  std::optional<double> epsilon_override;
  double delta_strict = 1e-9;

  void validate() const {
    auto fail = [](const std::string& msg) { throw PreconditionError("DissipativitySpec: " + msg); };
    const double fields[] = {nu1, rho1, alpha1, eps1, eps2, eps3, h0, h, delta_strict};
    for (double v : fields)
      if (!std::isfinite(v)) fail("non-finite field");
    if (M < 2) fail("sampling parameter M must be at least 2 (got " + std::to_string(M) + ")");
    if (!(h0 > 0.0)) fail("h0 must be positive");
    if (!(h > 0.0 && h <= 1.0)) fail("h must lie in (0, 1]");
    if (!(eps1 > 0.0 && eps2 > 0.0 && eps3 > 0.0)) fail("margins eps1, eps2, eps3 must be positive");
    if (delta_strict < 0.0) fail("delta_strict must be non-negative");
    if (epsilon_override && !(*epsilon_override >= 0.0 && std::isfinite(*epsilon_override)))
      fail("epsilon override must be finite and non-negative");
    switch (kase) {
      case DissipativityCase::A:
        if (nu1 > 0.0) fail("case A requires nu1 <= 0 (got nu1 = " + std::to_string(nu1) + ")");
        if (!(nu1 * rho1 < 0.25)) fail("case A requires nu1 * rho1 < 1/4");
        if ((-nu1 + eps1) * (-rho1 + eps2) > 0.25)
          fail("case A requires (-nu1 + eps1)(-rho1 + eps2) <= 1/4 for a real disk radius");
        break;
      case DissipativityCase::B:
        if (nu1 < 0.0) fail("case B requires nu1 >= 0 (got nu1 = " + std::to_string(nu1) + ")");
        break;
      case DissipativityCase::C:
        if (!(alpha1 > 0.0)) fail("case C requires alpha1 > 0");
        if (!(1.0 / alpha1 - eps3 > 0.0)) fail("case C requires 1/alpha1 - eps3 > 0");
        break;
    }
  }
};

/// Controller passivity indices implied by a case-A spec.
struct ControllerIndices {
  double rho_c;
  double nu_c;
};

inline ControllerIndices case_a_controller_indices(const DissipativitySpec& s) {
  return {-s.nu1 + s.eps1, -s.rho1 + s.eps2};
}

/// Case-A disk |C - center| <= radius and the inscribed box
/// [a1, a2] x [-radius/sqrt2, radius/sqrt2].
struct CaseAGeometry {
  double center;
  double radius;
  double a1;
  double a2;
  double half_height;
};

inline CaseAGeometry case_a_geometry(const DissipativitySpec& s) {
  const auto [rho_c, nu_c] = case_a_controller_indices(s);
  const double c = 1.0 / (2.0 * rho_c);
  const double r = c * std::sqrt(1.0 - 4.0 * rho_c * nu_c);
  const double half = r / std::numbers::sqrt2;
  return {c, r, c - half, c + half, half};
}

/// Case-C gain bound and half side of its inscribed square.
inline double case_c_radius(const DissipativitySpec& s) { return 1.0 / s.alpha1 - s.eps3; }
inline double case_c_half_side(const DissipativitySpec& s) { return case_c_radius(s) / std::numbers::sqrt2; }

/// Geometric factor sum_{t<m} h^t; equals m for h = 1.
inline double geometric_factor(int m_fb, double h) {
  if (h == 1.0) return static_cast<double>(m_fb);
  return (1.0 - std::pow(h, m_fb)) / (1.0 - h);
}

/// Bound on |f(theta) - f(theta_m)| between a frequency and its nearest
/// sample for taps inside the envelope h0 h^t.
inline double epsilon_margin(int m_fb, int M, double h0, double h) {
  if (m_fb < 1) throw PreconditionError("epsilon_margin: m_fb must be at least 1");
  if (M < 2) throw PreconditionError("epsilon_margin: M must be at least 2");
  if (!(h0 > 0.0)) throw PreconditionError("epsilon_margin: h0 must be positive");
  if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("epsilon_margin: h must lie in (0, 1]");
  return std::numbers::pi * h0 * geometric_factor(m_fb, h) * (m_fb - 1) / (2.0 * M);
}

struct FrequencyPair {
  double fr;
  double fi;
};

/// f_r = sum g(t) cos(t theta), f_i = sum g(t) sin(t theta); the FIR part
/// of C(e^{j theta}) is f_r - j f_i.
inline FrequencyPair eval_fr_fi(std::span<const double> g, double theta) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi + 1e-12))
    throw PreconditionError("eval_fr_fi: theta must lie in [0, pi]");
  double fr = 0.0, fi = 0.0;
  for (std::size_t t = 0; t < g.size(); ++t) {
    fr += g[t] * std::cos(static_cast<double>(t) * theta);
    fi += g[t] * std::sin(static_cast<double>(t) * theta);
  }
  return {fr, fi};
}

/// Cosine and sine tables over a fixed grid: (cos * g)[k] = f_r(theta_k).
struct FrequencyBasis {
  Eigen::VectorXd theta;
  Eigen::MatrixXd cos;
  Eigen::MatrixXd sin;

  FrequencyBasis(Eigen::VectorXd grid, int m_fb) : theta(std::move(grid)) {
    cos.resize(theta.size(), m_fb);
    sin.resize(theta.size(), m_fb);
    for (Eigen::Index k = 0; k < theta.size(); ++k)
      for (int t = 0; t < m_fb; ++t) {
        cos(k, t) = std::cos(t * theta[k]);
        sin(k, t) = std::sin(t * theta[k]);
      }
  }

  /// Grid theta_m = m pi / M, m = 0..M.
  static FrequencyBasis sampled(int M, int m_fb) {
    return {Eigen::VectorXd::LinSpaced(M + 1, 0.0, std::numbers::pi), m_fb};
  }
};

/// G x <= h and E x = e over the RegressionProblem parameter layout.
struct LinearInequalitySystem {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
  ParameterLayout layout;
  double epsilon = 0.0;  ///< sampling margin used to shrink the region

  Eigen::Index inequalities() const noexcept { return G.rows(); }
  Eigen::Index equalities() const noexcept { return E.rows(); }

  /// Largest violation max(Gx - h, |Ex - e|); non-positive when feasible.
  double max_violation(const Eigen::VectorXd& x) const {
    double v = -std::numeric_limits<double>::infinity();
    if (G.rows() > 0) v = (G * x - h).maxCoeff();
    if (E.rows() > 0) v = std::max(v, (E * x - e).cwiseAbs().maxCoeff());
    return v;
  }
};

inline double effective_epsilon(const DissipativitySpec& spec, int m_fb) {
  return spec.epsilon_override ? *spec.epsilon_override : epsilon_margin(m_fb, spec.M, spec.h0, spec.h);
}

/// Sampled frequency inequalities of the chosen case plus the decay rows
/// +-g(t) <= h0 h^t. Strict inequalities are tightened by delta_strict.
inline LinearInequalitySystem generate_constraints(const DissipativitySpec& spec, const ParameterLayout& layout) {
  spec.validate();
  if (layout.m_fb < 1) throw PreconditionError("generate_constraints: layout has no feedback taps");
  const int m = layout.m_fb;
  const int M = spec.M;
  const double eps = effective_epsilon(spec, m);
  const double delta = spec.delta_strict;

  auto empty_box = [&](double half_width) {
    if (half_width > eps) return;
    int minimal = -1;
    if (!spec.epsilon_override && half_width > 0.0) {
      const double k = std::numbers::pi * spec.h0 * geometric_factor(m, spec.h) * (m - 1) / 2.0;
      const double needed = std::floor(k / half_width) + 1.0;
      if (needed < static_cast<double>(std::numeric_limits<int>::max())) minimal = static_cast<int>(needed);
    }
    throw EmptyBoxError("generate_constraints: sampled box is empty (half width " + std::to_string(half_width) +
                            " <= epsilon " + std::to_string(eps) + ")" +
                            (minimal > 0 ? "; M >= " + std::to_string(minimal) + " opens it" : std::string()),
                        minimal);
  };

  const FrequencyBasis basis = FrequencyBasis::sampled(M, m);
  const int n = layout.size();
  const int first_fb = layout.fb_col(0);

  std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> blocks;
  auto add_block = [&](const Eigen::MatrixXd& taps_rows, double bound) {
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(taps_rows.rows(), n);
    rows.middleCols(first_fb, m) = taps_rows;
    blocks.emplace_back(std::move(rows), Eigen::VectorXd::Constant(taps_rows.rows(), bound));
  };

  LinearInequalitySystem sys;
  sys.layout = layout;
  sys.epsilon = eps;
  bool gamma_zero = false;

  switch (spec.kase) {
    case DissipativityCase::A: {
      const CaseAGeometry geo = case_a_geometry(spec);
      empty_box(geo.half_height);
      add_block(basis.cos, geo.a2 - eps - delta);
      add_block(-basis.cos, -(geo.a1 + eps + delta));
      add_block(basis.sin, geo.half_height - eps - delta);
      add_block(-basis.sin, geo.half_height - eps - delta);
      gamma_zero = true;
      break;
    }
    case DissipativityCase::B: {
      if (layout.has_gamma) {
        Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, n);
        row(0, layout.gamma_col()) = -1.0;
        blocks.emplace_back(std::move(row), Eigen::VectorXd::Zero(1));
      }
      add_block(-basis.cos, -((spec.eps2 - spec.rho1) + eps + delta));
      break;
    }
    case DissipativityCase::C: {
      const double half = case_c_half_side(spec);
      empty_box(half);
      add_block(basis.cos, half - eps - delta);
      add_block(-basis.cos, half - eps - delta);
      add_block(basis.sin, half - eps - delta);
      add_block(-basis.sin, half - eps - delta);
      gamma_zero = true;
      break;
    }
  }

  Eigen::VectorXd envelope(m);
  for (int t = 0; t < m; ++t) envelope[t] = spec.h0 * std::pow(spec.h, t);
  {
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(2 * m, n);
    rows.block(0, first_fb, m, m).setIdentity();
    rows.block(m, first_fb, m, m) = -Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd bound(2 * m);
    bound << envelope, envelope;
    blocks.emplace_back(std::move(rows), std::move(bound));
  }

  Eigen::Index total = 0;
  for (const auto& [rows, bound] : blocks) total += rows.rows();
  sys.G.resize(total, n);
  sys.h.resize(total);
  Eigen::Index at = 0;
  for (const auto& [rows, bound] : blocks) {
    sys.G.middleRows(at, rows.rows()) = rows;
    sys.h.segment(at, rows.rows()) = bound;
    at += rows.rows();
  }

  if (gamma_zero && layout.has_gamma) {
    sys.E = Eigen::MatrixXd::Zero(1, n);
    sys.E(0, layout.gamma_col()) = 1.0;
    sys.e = Eigen::VectorXd::Zero(1);
  } else {
    sys.E.resize(0, n);
    sys.e.resize(0);
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

struct CertificateReport {
  DissipativityCase kase = DissipativityCase::A;
  bool pass = false;
  double worst_margin = 0.0;
  double worst_theta = 0.0;
  int grid_size = 0;
  std::string message;
};

/// Checks the controller Nyquist locus against the case region on
/// `grid_size` points spanning [0, pi]:
///   A: |C - center| <= radius    B: Re C >= eps2 - rho1    C: |C| <= 1/alpha1 - eps3
/// The integrator adds gamma Ts / 2 to Re C in case B; in cases A and C a
/// nonzero gamma makes the locus unbounded and the check fails.
inline CertificateReport certify_nyquist(const TwoDofController& ctrl, const DissipativitySpec& spec,
                                         const FrequencyBasis& dense) {
  spec.validate();
  const auto grid_size = static_cast<int>(dense.theta.size());
  if (grid_size < 10 * spec.M)
    throw PreconditionError("certify_nyquist: dense grid must have at least 10 M points");
  const auto m_fb = static_cast<int>(ctrl.g_fb().size());
  if (dense.cos.cols() != m_fb) throw DimensionError("certify_nyquist: basis width differs from m_fb");
  CertificateReport rep;
  rep.kase = spec.kase;
  rep.grid_size = grid_size;
  const double gamma = ctrl.gamma();
  const double ts = ctrl.ts();

  if (spec.kase != DissipativityCase::B && gamma != 0.0) {
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    rep.worst_theta = 0.0;
    rep.message = "integrator gain must be zero in this case (locus unbounded at theta = 0)";
    return rep;
  }

  const FrequencyBasis& basis = dense;
  const Eigen::Map<const Eigen::VectorXd> g(ctrl.g_fb().data(), m_fb);
  const Eigen::VectorXd fr = basis.cos * g;
  const Eigen::VectorXd fi = basis.sin * g;

  Eigen::VectorXd margin(grid_size);
  switch (spec.kase) {
    case DissipativityCase::A: {
      const CaseAGeometry geo = case_a_geometry(spec);
      for (int k = 0; k < grid_size; ++k) margin[k] = geo.radius - std::hypot(fr[k] - geo.center, fi[k]);
      break;
    }
    case DissipativityCase::B: {
      const double floor = spec.eps2 - spec.rho1;
      margin = fr.array() + gamma * ts / 2.0 - floor;
      break;
    }
    case DissipativityCase::C: {
      const double radius = case_c_radius(spec);
      for (int k = 0; k < grid_size; ++k) margin[k] = radius - std::hypot(fr[k], fi[k]);
      break;
    }
  }
  Eigen::Index worst = 0;
  rep.worst_margin = margin.minCoeff(&worst);
  rep.worst_theta = basis.theta[worst];
  rep.pass = rep.worst_margin >= 0.0;
  rep.message = rep.pass ? "locus inside the region" : "locus leaves the region at theta = " + std::to_string(rep.worst_theta);
  return rep;
}

/// Dense grid of `grid_size` points spanning [0, pi].
inline FrequencyBasis dense_grid(int grid_size, int m_fb) {
  if (grid_size < 2) throw PreconditionError("dense_grid: at least two points required");
  return {Eigen::VectorXd::LinSpaced(grid_size, 0.0, std::numbers::pi), m_fb};
}

inline CertificateReport certify_nyquist(const TwoDofController& ctrl, const DissipativitySpec& spec, int grid_size) {
  spec.validate();
  if (grid_size < 10 * spec.M)
    throw PreconditionError("certify_nyquist: dense grid must have at least 10 M points");
  return certify_nyquist(ctrl, spec, dense_grid(grid_size, static_cast<int>(ctrl.g_fb().size())));
}

/// Quadratic supply s(y, u) = [y u] W [y u]^T.
struct SupplyRateForm {
  Eigen::Matrix2d W = Eigen::Matrix2d::Zero();

  /// s = u y - rho y^2 - nu u^2.
  static SupplyRateForm passivity(double nu, double rho) {
    SupplyRateForm f;
    f.W << -rho, 0.5, 0.5, -nu;
    return f;
  }

  /// s = alpha^2 u^2 - y^2.
  static SupplyRateForm gain(double alpha) {
    SupplyRateForm f;
    f.W << -1.0, 0.0, 0.0, alpha * alpha;
    return f;
  }

  double operator()(double y, double u) const {
    return W(0, 0) * y * y + (W(0, 1) + W(1, 0)) * y * u + W(1, 1) * u * u;
  }
};

struct SupplyRateResult {
  double min_cumulative;
  double tolerance;
  bool pass;
};

/// Minimum over horizons t_f of sum_{t<=t_f} s(y(t), u(t)); passes when it
/// is at least -rel_tol ||u||^2.
inline SupplyRateResult supply_rate_check(const SignalRecord& input, const SignalRecord& output,
                                          const SupplyRateForm& form, double rel_tol = 1e-9) {
  if (input.size() != output.size()) throw DimensionError("supply_rate_check: signals differ in length");
  if ((form.W - form.W.transpose()).cwiseAbs().maxCoeff() > 0.0)
    throw PreconditionError("supply_rate_check: supply matrix must be symmetric");
  double acc = 0.0, energy = 0.0;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < input.size(); ++t) {
    acc += form(output[t], input[t]);
    energy += input[t] * input[t];
    lowest = std::min(lowest, acc);
  }
  const double tol = rel_tol * energy;
  return {lowest, tol, lowest >= -tol};
}

/// Largest distance of f_r or f_i between a point of a 50 M dense grid and
/// its nearest sample theta_m = m pi / M. Holds both grids for one (m_fb, M).
class SamplingBoundChecker {
 public:
  SamplingBoundChecker(int m_fb, int M)
      : m_fb_(validated(m_fb, M)), fine_(dense_grid(50 * M + 1, m_fb)), coarse_(FrequencyBasis::sampled(M, m_fb)) {}

  double operator()(std::span<const double> g, double h0, double h) const {
    if (static_cast<int>(g.size()) != m_fb_) throw DimensionError("sampling_bound_check: tap count differs");
    double bound = h0;
    for (std::size_t t = 0; t < g.size(); ++t, bound *= h)
      if (std::abs(g[t]) > bound * (1.0 + 1e-12))
        throw PreconditionError("sampling_bound_check: tap " + std::to_string(t) + " violates the decay envelope");
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), m_fb_);
    const Eigen::VectorXd fr = fine_.cos * gv, fi = fine_.sin * gv;
    const Eigen::VectorXd sr = coarse_.cos * gv, si = coarse_.sin * gv;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < fr.size(); ++k) {
      const Eigen::Index nearest = (k + 25) / 50;  // dense index k sits at k / 50 sample spacings
      worst = std::max({worst, std::abs(fr[k] - sr[nearest]), std::abs(fi[k] - si[nearest])});
    }
    return worst;
  }

 private:
  static int validated(int m_fb, int M) {
    if (m_fb < 1) throw PreconditionError("sampling_bound_check: empty tap vector");
    if (M < 2) throw PreconditionError("sampling_bound_check: M must be at least 2");
    return m_fb;
  }

  int m_fb_;
  FrequencyBasis fine_;
  FrequencyBasis coarse_;
};

inline double sampling_bound_check(std::span<const double> g, double h0, double h, int M) {
  if (g.empty()) throw PreconditionError("sampling_bound_check: empty tap vector");
  return SamplingBoundChecker(static_cast<int>(g.size()), M)(g, h0, h);
}

// ---------------------------------------------------------------------------
// Plant index estimation
// ---------------------------------------------------------------------------

struct PlantIndices {
  double nu;     ///< input-feedforward index: min Re G minus margin
  double rho;    ///< output-feedback index given nu
  double gain;   ///< max |G|
  double theta_nu;
};

/// Frequency scan of a stable discrete SISO map on `grid_size` points of
/// [0, pi]. nu = min Re G - nu_margin; rho = min (Re G - nu)/|G|^2.
inline PlantIndices estimate_passivity_indices(const TransferFunction& g, int grid_size, double nu_margin) {
  if (!g.is_discrete()) throw DomainError("estimate_passivity_indices: discrete map required");
  if (grid_size < 2) throw PreconditionError("estimate_passivity_indices: grid too small");
  std::vector<Complex> resp(grid_size);
  PlantIndices out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (int k = 0; k < grid_size; ++k) {
    const double theta = std::numbers::pi * k / (grid_size - 1);
    resp[k] = g.evaluate(std::polar(1.0, theta));
    if (is_unbounded(resp[k])) throw PreconditionError("estimate_passivity_indices: pole on the unit circle");
    if (resp[k].real() < out.nu) {
      out.nu = resp[k].real();
      out.theta_nu = theta;
    }
    out.gain = std::max(out.gain, std::abs(resp[k]));
  }
  out.nu -= nu_margin;
  for (const Complex& v : resp) {
    const double mag2 = std::norm(v);
    if (mag2 > 0.0) out.rho = std::min(out.rho, (v.real() - out.nu) / mag2);
  }
  return out;
}

}  // namespace dvrft
