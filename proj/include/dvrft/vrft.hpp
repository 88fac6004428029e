#pragma once

/// @file
/// Virtual reference feedback tuning for 1DOF and 2DOF iFIR controllers:
/// virtual signals, least-squares regressions, model-matching diagnostics
/// and the ideal (perfect-matching) controllers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dvrft/lti.hpp"

namespace dvrft {

/// Exponential tap envelope |g(t)| <= h0 h^t.
struct DecayEnvelope {
  double h0 = 1.0;
  double h = 1.0;
};

/// Integrator gain gamma, feedback FIR taps g_fb and prefilter FIR taps g_ff:
///   C(z) = gamma Ts / (1 - z^-1) + sum_t g_fb(t) z^-t
///   F(z) = sum_t g_ff(t) z^-t            (absent for 1DOF controllers)
class TwoDofController {
 public:
  TwoDofController(double gamma, std::vector<double> g_fb, std::vector<double> g_ff, double ts,
                   std::optional<DecayEnvelope> envelope = std::nullopt)
      : gamma_(gamma), g_fb_(std::move(g_fb)), g_ff_(std::move(g_ff)), ts_(ts), envelope_(envelope) {
    if (g_fb_.empty()) throw PreconditionError("TwoDofController: m_fb must be at least 1");
    if (!(ts_ > 0.0)) throw PreconditionError("TwoDofController: sample period must be positive");
    if (!std::isfinite(gamma_)) throw PreconditionError("TwoDofController: non-finite integrator gain");
    for (double g : g_fb_)
      if (!std::isfinite(g)) throw PreconditionError("TwoDofController: non-finite feedback tap");
    for (double g : g_ff_)
      if (!std::isfinite(g)) throw PreconditionError("TwoDofController: non-finite prefilter tap");
    if (envelope_) {
      double bound = envelope_->h0;
      for (std::size_t t = 0; t < g_fb_.size(); ++t, bound *= envelope_->h)
        if (std::abs(g_fb_[t]) > bound * (1.0 + 1e-12) + 1e-15)
          throw PreconditionError("TwoDofController: tap " + std::to_string(t) + " violates the decay envelope");
    }
  }

  /// Feedback-only controller equal to a static gain.
  static TwoDofController static_gain(double k, double ts) { return {0.0, {k}, {}, ts}; }

  double gamma() const noexcept { return gamma_; }
  const std::vector<double>& g_fb() const noexcept { return g_fb_; }
  const std::vector<double>& g_ff() const noexcept { return g_ff_; }
  double ts() const noexcept { return ts_; }
  const std::optional<DecayEnvelope>& envelope() const noexcept { return envelope_; }
  bool is_two_dof() const noexcept { return !g_ff_.empty(); }

  TransferFunction feedback_tf() const {
    const auto fir = TransferFunction::fir(g_fb_, ts_);
    if (gamma_ == 0.0) return fir;
    return fir + TransferFunction::discrete_z_inverse({gamma_ * ts_}, {1.0, -1.0}, ts_);
  }

  TransferFunction prefilter_tf() const {
    if (!is_two_dof()) throw PreconditionError("TwoDofController: 1DOF controller has no prefilter");
    return TransferFunction::fir(g_ff_, ts_);
  }

  /// Shift-register realization of the FIR part (states w(t-m+1) ... w(t-1))
  /// plus one accumulator state when gamma != 0.
  StateSpace feedback_ss() const { return fir_realization(g_fb_, gamma_); }

  std::optional<StateSpace> prefilter_ss() const {
    if (!is_two_dof()) return std::nullopt;
    return fir_realization(g_ff_, 0.0);
  }

  /// C(e^{j theta}); unbounded at theta = 0 when gamma != 0.
  Complex feedback_response(double theta) const {
    Complex acc{0.0, 0.0};
    for (std::size_t t = 0; t < g_fb_.size(); ++t) acc += g_fb_[t] * std::polar(1.0, -theta * static_cast<double>(t));
    if (gamma_ != 0.0) {
      const Complex den = 1.0 - std::polar(1.0, -theta);
      if (std::abs(den) < 1e-15) return unbounded();
      acc += gamma_ * ts_ / den;
    }
    return acc;
  }

 private:
  StateSpace fir_realization(const std::vector<double>& taps, double gamma) const {
    const auto m = static_cast<Eigen::Index>(taps.size());
    const Eigen::Index nf = m - 1;
    const Eigen::Index n = nf + (gamma != 0.0 ? 1 : 0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, 1);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, n);
    for (Eigen::Index i = 0; i + 1 < nf; ++i) a(i, i + 1) = 1.0;
    if (nf > 0) b(nf - 1, 0) = 1.0;
    for (Eigen::Index i = 0; i < nf; ++i) c(0, i) = taps[static_cast<std::size_t>(m - 1 - i)];
    double d = taps[0];
    if (gamma != 0.0) {
      a(nf, nf) = 1.0;
      b(nf, 0) = 1.0;
      c(0, nf) = gamma * ts_;
      d += gamma * ts_;
    }
    return {a, b, c, Eigen::MatrixXd::Constant(1, 1, d), Domain::discrete, ts_};
  }

  double gamma_;
  std::vector<double> g_fb_;
  std::vector<double> g_ff_;
  double ts_;
  std::optional<DecayEnvelope> envelope_;
};

enum class Objective { one_dof, one_dof_disturbance, two_dof, two_dof_filtered };
enum class IntegratorMode { free, fixed_zero };

inline const char* to_string(IntegratorMode m) { return m == IntegratorMode::free ? "free" : "fixed_zero"; }

inline IntegratorMode parse_integrator(const std::string& s) {
  if (s == "free") return IntegratorMode::free;
  if (s == "fixed_zero") return IntegratorMode::fixed_zero;
  throw PreconditionError("unknown integrator mode '" + s + "' (expected free or fixed_zero)");
}

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::one_dof: return "1dof";
    case Objective::one_dof_disturbance: return "1dof_dist";
    case Objective::two_dof: return "2dof";
    case Objective::two_dof_filtered: return "2dof_filtered";
  }
  return "?";
}

inline Objective parse_objective(const std::string& s) {
  if (s == "1dof") return Objective::one_dof;
  if (s == "1dof_dist") return Objective::one_dof_disturbance;
  if (s == "2dof") return Objective::two_dof;
  if (s == "2dof_filtered") return Objective::two_dof_filtered;
  throw PreconditionError("unknown objective '" + s + "'");
}

/// Column layout of the parameter vector: [gamma | g_fb | g_ff].
struct ParameterLayout {
  bool has_gamma = true;
  int m_fb = 1;
  int m_ff = 0;

  int size() const noexcept { return (has_gamma ? 1 : 0) + m_fb + m_ff; }
  int gamma_col() const noexcept { return has_gamma ? 0 : -1; }
  int fb_col(int t) const noexcept { return (has_gamma ? 1 : 0) + t; }
  int ff_col(int t) const noexcept { return (has_gamma ? 1 : 0) + m_fb + t; }

  TwoDofController to_controller(const Eigen::VectorXd& p, double ts,
                                 std::optional<DecayEnvelope> envelope = std::nullopt) const {
    if (p.size() != size()) throw DimensionError("ParameterLayout: parameter vector has the wrong length");
    std::vector<double> fb(m_fb), ff(m_ff);
    for (int t = 0; t < m_fb; ++t) fb[t] = p[fb_col(t)];
    for (int t = 0; t < m_ff; ++t) ff[t] = p[ff_col(t)];
    return {has_gamma ? p[0] : 0.0, std::move(fb), std::move(ff), ts, envelope};
  }

  Eigen::VectorXd from_controller(const TwoDofController& c) const {
    if (static_cast<int>(c.g_fb().size()) != m_fb || static_cast<int>(c.g_ff().size()) != m_ff)
      throw DimensionError("ParameterLayout: controller sizes differ from the layout");
    if (!has_gamma && c.gamma() != 0.0) throw DimensionError("ParameterLayout: layout has no integrator column");
    Eigen::VectorXd p(size());
    if (has_gamma) p[0] = c.gamma();
    for (int t = 0; t < m_fb; ++t) p[fb_col(t)] = c.g_fb()[t];
    for (int t = 0; t < m_ff; ++t) p[ff_col(t)] = c.g_ff()[t];
    return p;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    if (has_gamma) names.emplace_back("gamma");
    for (int t = 0; t < m_fb; ++t) names.push_back("g_fb_" + std::to_string(t));
    for (int t = 0; t < m_ff; ++t) names.push_back("g_ff_" + std::to_string(t));
    return names;
  }
};

/// Dense regression: objective (1/N) ||target - phi p||^2 with N = rows.
struct RegressionProblem {
  Eigen::MatrixXd phi;
  Eigen::VectorXd target;
  ParameterLayout layout;
  Objective objective = Objective::two_dof_filtered;
  Eigen::Index first_sample = 0;  ///< data index of row 0
  double ts = 1.0;

  Eigen::Index rows() const noexcept { return phi.rows(); }

  Eigen::VectorXd residual(const Eigen::VectorXd& p) const { return target - phi * p; }

  double cost(const Eigen::VectorXd& p) const {
    return residual(p).squaredNorm() / static_cast<double>(rows());
  }
};

struct ExperimentData {
  SignalRecord u;
  SignalRecord y;
  std::optional<SignalRecord> d;
  /// Signal fed to C; defaults to y.
  std::optional<SignalRecord> y_fb;

  const SignalRecord& feedback_signal() const { return y_fb ? *y_fb : y; }
};

struct ReferenceModels {
  TransferFunction mr;
  std::optional<TransferFunction> md;
};

struct RegressionSizes {
  int m_fb = 1;
  int m_ff = 0;
};

// ---------------------------------------------------------------------------
// Reference-model inversion and virtual signals
// ---------------------------------------------------------------------------

/// M_r^-1 applied to x: with M_r = z^-k B(z^-1)/A(z^-1), returns
/// (A/B)(x)(t + k) for t = 0 .. N-k-1 (the last k samples are dropped).
/// Requires B minimum phase so that the inverse filter is stable.
inline SignalRecord invert_reference(const TransferFunction& mr, const SignalRecord& x) {
  if (!mr.is_discrete()) throw DomainError("invert_reference: reference model must be discrete");
  if (!same_period(mr.ts(), x.ts())) throw DomainError("invert_reference: sample period mismatch");
  if (mr.is_zero()) throw NonInvertibleError("invert_reference: reference model is zero");
  if (!mr.is_proper()) throw NonInvertibleError("invert_reference: reference model is improper");
  const int k = mr.relative_degree();
  const auto zeros = poly::roots(mr.num());
  for (Eigen::Index i = 0; i < zeros.size(); ++i)
    if (std::abs(zeros[i]) >= 1.0 - 1e-12)
      throw NonInvertibleError("invert_reference: reference model has a zero on or outside the unit circle");
  if (static_cast<int>(x.size()) <= k) throw PreconditionError("invert_reference: signal shorter than the advance");
  const auto inverse = TransferFunction::discrete_z_inverse(mr.den(), mr.num(), mr.ts());
  const auto w = filter(inverse, x.view());
  return {std::vector<double>(w.begin() + k, w.end()), x.ts(), x.label()};
}

struct VirtualSignals {
  SignalRecord r;  ///< virtual reference
  SignalRecord e;  ///< virtual error r - y
};

namespace detail {

inline std::vector<double> difference(std::span<const double> a, std::span<const double> b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
  return out;
}

inline void check_aligned(const SignalRecord& a, const SignalRecord& b, const char* what) {
  if (a.size() != b.size()) throw DimensionError(std::string("misaligned signals: ") + what);
  if (!same_period(a.ts(), b.ts())) throw DomainError(std::string("sample period mismatch: ") + what);
}

}  // namespace detail

inline VirtualSignals virtual_signals_1dof(const SignalRecord& y, const TransferFunction& mr) {
  SignalRecord r = invert_reference(mr, y);
  auto e = detail::difference(r.view(), y.view(), r.size());
  return {std::move(r), SignalRecord(std::move(e), y.ts(), "e")};
}

/// r_v = M_r^-1(y - M_d(d)) and e = r_v - y.
inline VirtualSignals virtual_signals_2dof(const SignalRecord& y, const SignalRecord& d, const TransferFunction& mr,
                                           const TransferFunction& md) {
  detail::check_aligned(y, d, "y and d");
  const SignalRecord md_d = filter(md, d);
  const SignalRecord shaped(detail::difference(y.view(), md_d.view(), y.size()), y.ts(), "y - Md(d)");
  SignalRecord r = invert_reference(mr, shaped);
  auto e = detail::difference(r.view(), y.view(), r.size());
  return {std::move(r), SignalRecord(std::move(e), y.ts(), "e")};
}

// ---------------------------------------------------------------------------
// Regression assembly
// ---------------------------------------------------------------------------

/// Builds the least-squares problem whose residual target - phi p equals the
/// bracketed residual of the chosen VRFT objective:
///   1dof, 1dof_dist : u - C(e)
///   2dof            : u - F(r_v) + C(y_fb)
///   2dof_filtered   : M_r(u) - F(y - M_d(d)) + C(M_r(y_fb))
/// Rows start after a warm-up of max(m_fb, m_ff, filter order) samples.
inline RegressionProblem assemble_regression(Objective objective, const ExperimentData& data,
                                             const ReferenceModels& models, RegressionSizes sizes,
                                             IntegratorMode integrator) {
  if (sizes.m_fb < 1) throw PreconditionError("assemble_regression: m_fb must be at least 1");
  if (sizes.m_ff < 0) throw PreconditionError("assemble_regression: m_ff must be non-negative");
  const bool two_dof = objective == Objective::two_dof || objective == Objective::two_dof_filtered;
  if (!two_dof && sizes.m_ff != 0) throw PreconditionError("assemble_regression: 1DOF objectives take m_ff = 0");
  if (two_dof && sizes.m_ff < 1) throw PreconditionError("assemble_regression: 2DOF objectives need m_ff >= 1");
  const bool needs_disturbance = objective != Objective::one_dof;
  if (needs_disturbance && (!data.d || !models.md))
    throw PreconditionError(std::string("assemble_regression: objective ") + to_string(objective) +
                            " needs d and M_d");
  detail::check_aligned(data.u, data.y, "u and y");
  if (data.d) detail::check_aligned(data.u, *data.d, "u and d");
  detail::check_aligned(data.u, data.feedback_signal(), "u and y_fb");
  if (!same_period(models.mr.ts(), data.u.ts())) throw DomainError("assemble_regression: M_r sample period mismatch");

  const double ts = data.u.ts();
  const SignalRecord& y_fb = data.feedback_signal();

  // Per-objective target, prefilter regressor and feedback regressor (with
  // the sign it enters the residual).
  std::vector<double> target, ff_input, fb_input;
  double fb_sign = 1.0;
  switch (objective) {
    case Objective::one_dof:
    case Objective::one_dof_disturbance: {
      const VirtualSignals v = objective == Objective::one_dof
                                   ? virtual_signals_1dof(data.y, models.mr)
                                   : virtual_signals_2dof(data.y, *data.d, models.mr, *models.md);
      if (data.y_fb) throw PreconditionError("assemble_regression: 1DOF objectives use y as the feedback signal");
      target.assign(data.u.samples().begin(), data.u.samples().begin() + static_cast<long>(v.e.size()));
      fb_input = v.e.samples();
      break;
    }
    case Objective::two_dof: {
      const VirtualSignals v = virtual_signals_2dof(data.y, *data.d, models.mr, *models.md);
      const std::size_t n = v.r.size();
      target.assign(data.u.samples().begin(), data.u.samples().begin() + static_cast<long>(n));
      ff_input = v.r.samples();
      fb_input.assign(y_fb.samples().begin(), y_fb.samples().begin() + static_cast<long>(n));
      fb_sign = -1.0;
      break;
    }
    case Objective::two_dof_filtered: {
      target = filter(models.mr, data.u.view());
      const auto md_d = filter(*models.md, data.d->view());
      ff_input = detail::difference(data.y.view(), md_d, data.y.size());
      fb_input = filter(models.mr, y_fb.view());
      fb_sign = -1.0;
      break;
    }
  }

  const ParameterLayout layout{integrator == IntegratorMode::free, sizes.m_fb, sizes.m_ff};
  int filter_order = models.mr.order();
  if (models.md) filter_order = std::max(filter_order, models.md->order());
  const auto warmup = static_cast<Eigen::Index>(std::max({sizes.m_fb, sizes.m_ff, filter_order}));
  const auto length = static_cast<Eigen::Index>(target.size());
  const Eigen::Index rows = length - warmup;
  if (rows <= layout.size())
    throw PreconditionError("assemble_regression: insufficient data (" + std::to_string(std::max<Eigen::Index>(rows, 0)) +
                            " rows for " + std::to_string(layout.size()) + " parameters)");

  RegressionProblem prob;
  prob.layout = layout;
  prob.objective = objective;
  prob.first_sample = warmup;
  prob.ts = ts;
  prob.phi.resize(rows, layout.size());
  prob.target = Eigen::Map<const Eigen::VectorXd>(target.data() + warmup, rows);

  if (layout.has_gamma) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < length; ++t) {
      acc += ts * fb_input[t];
      if (t >= warmup) prob.phi(t - warmup, 0) = fb_sign * acc;
    }
  }
  for (int k = 0; k < sizes.m_fb; ++k) {
    auto col = prob.phi.col(layout.fb_col(k));
    for (Eigen::Index i = 0; i < rows; ++i) col[i] = fb_sign * fb_input[warmup + i - k];
  }
  for (int k = 0; k < sizes.m_ff; ++k) {
    auto col = prob.phi.col(layout.ff_col(k));
    for (Eigen::Index i = 0; i < rows; ++i) col[i] = ff_input[warmup + i - k];
  }
  return prob;
}

/// Unconstrained least-squares fit (column-pivoted QR, minimum-norm
/// handling left to the pivoting threshold).
inline Eigen::VectorXd least_squares_fit(const RegressionProblem& prob) {
  return prob.phi.colPivHouseholderQr().solve(prob.target);
}

// ---------------------------------------------------------------------------
// Model matching and ideal controllers
// ---------------------------------------------------------------------------

struct MatchingCost {
  double reference = 0.0;    ///< ||M_r - P1 F / (1 + P1fb C)||^2
  double disturbance = 0.0;  ///< ||M_d - P2 / (1 + P1fb C)||^2
};

/// Squared 2-norms approximated on a midpoint grid of `grid_size` points over
/// (0, pi): (1/K) sum_k |.|^2. When C measures a different output than the
/// performance output, `p1_fb` and `p2_fb` are the u and d paths to that
/// measurement and the disturbance response is P2 - P1 C P2fb / (1 + P1fb C).
inline MatchingCost model_matching_cost(const TransferFunction& p1, const TransferFunction& p2,
                                        const TransferFunction& prefilter, const TransferFunction& feedback,
                                        const TransferFunction& mr, const TransferFunction& md, int grid_size,
                                        const std::optional<TransferFunction>& p1_fb = std::nullopt,
                                        const std::optional<TransferFunction>& p2_fb = std::nullopt) {
  if (grid_size < 1) throw PreconditionError("model_matching_cost: grid_size must be positive");
  if (p1_fb.has_value() != p2_fb.has_value())
    throw PreconditionError("model_matching_cost: p1_fb and p2_fb are given together");
  const TransferFunction& loop_plant = p1_fb ? *p1_fb : p1;
  const TransferFunction& loop_dist = p2_fb ? *p2_fb : p2;
  MatchingCost cost;
  for (int k = 0; k < grid_size; ++k) {
    const double theta = std::numbers::pi * (k + 0.5) / grid_size;
    const Complex z = std::polar(1.0, theta);
    const Complex c = feedback.evaluate(z);
    const Complex sens_den = 1.0 + loop_plant.evaluate(z) * c;
    const Complex vals[] = {p1.evaluate(z), p2.evaluate(z), prefilter.evaluate(z), mr.evaluate(z), md.evaluate(z),
                            loop_dist.evaluate(z), c};
    bool bounded = std::abs(sens_den) > 1e-14 && !is_unbounded(sens_den);
    for (Complex v : vals) bounded = bounded && !is_unbounded(v);
    if (!bounded) {
      const double inf = std::numeric_limits<double>::infinity();
      return {inf, inf};
    }
    const Complex tr = vals[0] * vals[2] / sens_den;
    const Complex td = vals[1] - vals[0] * c * vals[5] / sens_den;
    cost.reference += std::norm(vals[3] - tr);
    cost.disturbance += std::norm(vals[4] - td);
  }
  cost.reference /= grid_size;
  cost.disturbance /= grid_size;
  return cost;
}

inline MatchingCost model_matching_cost(const TransferFunction& p1, const TransferFunction& p2,
                                        const TwoDofController& ctrl, const TransferFunction& mr,
                                        const TransferFunction& md, int grid_size,
                                        const std::optional<TransferFunction>& p1_fb = std::nullopt,
                                        const std::optional<TransferFunction>& p2_fb = std::nullopt) {
  const auto f = ctrl.is_two_dof() ? ctrl.prefilter_tf() : TransferFunction::gain(0.0, Domain::discrete, ctrl.ts());
  return model_matching_cost(p1, p2, f, ctrl.feedback_tf(), mr, md, grid_size, p1_fb, p2_fb);
}

struct IdealControllers {
  TransferFunction from_reference;    ///< M_r / (P1 (1 - M_r))
  TransferFunction from_disturbance;  ///< (P2 - M_d) / (M_d P1)
};

inline IdealControllers ideal_controllers_2dof(const TransferFunction& p1, const TransferFunction& p2,
                                               const TransferFunction& mr, const TransferFunction& md) {
  if (p1.is_zero()) throw PreconditionError("ideal_controllers_2dof: P1 is zero");
  if (md.is_zero()) throw PreconditionError("ideal_controllers_2dof: M_d is zero");
  const auto one = TransferFunction::gain(1.0, p1.domain(), p1.ts());
  const auto complement = one - mr;
  if (complement.is_zero()) throw PreconditionError("ideal_controllers_2dof: 1 - M_r is identically zero");
  return {mr / (p1 * complement), (p2 - md) / (md * p1)};
}

/// Prefilter that completes reference matching for a given feedback C:
/// F = M_r (1 + P1fb C) / P1.
inline TransferFunction ideal_prefilter(const TransferFunction& p1, const TransferFunction& mr,
                                        const TransferFunction& feedback,
                                        const std::optional<TransferFunction>& p1_fb = std::nullopt) {
  const auto one = TransferFunction::gain(1.0, p1.domain(), p1.ts());
  return mr * (one + (p1_fb ? *p1_fb : p1) * feedback) / p1;
}

}  // namespace dvrft
