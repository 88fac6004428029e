#pragma once

/// @file
/// Soft-gripper impedance-control benchmark: plant, open-loop experiment,
/// controller baselines, closed-loop evaluation and solver timing.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dvrft/dissipativity.hpp"
#include "dvrft/lti.hpp"
#include "dvrft/synthesis.hpp"
#include "dvrft/vrft.hpp"

namespace dvrft::gripper {

/// Half model: rigid finger mass m1 closed by (k1, c1), soft layer m2
/// attached through (k2, c2).
struct Params {
  double m1 = 0.01;
  double m2 = 0.005;
  double k1 = 1.5;
  double c1 = 0.1;
  double k2 = 1.0;
  double c2 = 0.2;
  double ts = 0.01;

  void validate() const {
    for (double v : {m1, m2, k1, c1, k2, c2, ts})
      if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError("gripper: parameters must be positive");
  }
};

enum Output : Eigen::Index { position = 0, velocity = 1 };

/// P1: u -> (y, dy/dt), P2: d -> (y, dy/dt), `combined` has inputs (u, d).
struct Plant {
  StateSpace p1;
  StateSpace p2;
  StateSpace combined;
};

inline Plant split(const StateSpace& combined) {
  const auto& s = combined;
  return {StateSpace(s.a(), s.b().col(0), s.c(), s.d().col(0), s.domain(), s.ts()),
          StateSpace(s.a(), s.b().col(1), s.c(), s.d().col(1), s.domain(), s.ts()), combined};
}

/// States (y1, dy1, y2, dy2):
///   m1 y1'' = u - k1 y1 - c1 y1' + k2 (y2 - y1) + c2 (y2' - y1')
///   m2 y2'' = d - k2 (y2 - y1) - c2 (y2' - y1')
inline Plant build_plant(const Params& p) {
  p.validate();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  a(0, 1) = 1.0;
  a(1, 0) = -(p.k1 + p.k2) / p.m1;
  a(1, 1) = -(p.c1 + p.c2) / p.m1;
  a(1, 2) = p.k2 / p.m1;
  a(1, 3) = p.c2 / p.m1;
  a(2, 3) = 1.0;
  a(3, 0) = p.k2 / p.m2;
  a(3, 1) = p.c2 / p.m2;
  a(3, 2) = -p.k2 / p.m2;
  a(3, 3) = -p.c2 / p.m2;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 2);
  b(1, 0) = 1.0 / p.m1;
  b(3, 1) = 1.0 / p.m2;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 4);
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  return split(StateSpace(a, b, c, Eigen::MatrixXd::Zero(2, 2), Domain::continuous));
}

inline Plant discrete_plant(const Params& p) { return split(zoh_discretize(build_plant(p).combined, p.ts)); }

inline TransferFunction reference_model_continuous() {
  return TransferFunction::continuous({150.0}, poly::mul({1.0, 10.0}, {1.0, 15.0}));
}

inline TransferFunction disturbance_model_continuous() {
  return TransferFunction::continuous({1000.0}, poly::mul(poly::mul({1.0, 5.0}, {1.0, 10.0}), {1.0, 30.0}));
}

inline ReferenceModels reference_models(double ts) {
  return {discretize(reference_model_continuous(), ts), discretize(disturbance_model_continuous(), ts)};
}

struct ExcitationConfig {
  std::vector<double> frequencies = default_frequencies();  ///< rad/s
  int samples = 10000;
  std::uint64_t seed = 1;

  static std::vector<double> default_frequencies() {
    std::vector<double> w(10);
    for (int i = 0; i < 10; ++i) w[i] = 0.5 + (10.0 - 0.5) * i / 9.0;
    return w;
  }

  void validate() const {
    if (samples < 1) throw PreconditionError("excitation: N must be at least 1");
    if (frequencies.empty()) throw PreconditionError("excitation: no frequencies");
    for (std::size_t i = 1; i < frequencies.size(); ++i)
      if (!(frequencies[i] > frequencies[i - 1])) throw PreconditionError("excitation: frequencies must increase");
  }
};

struct NoiseConfig {
  double snr_position_db = 28.1;
  double snr_velocity_db = 30.6;
  std::uint64_t seed = 2;
};

struct Dataset {
  SignalRecord u;
  SignalRecord d;
  SignalRecord y_pos;
  SignalRecord y_vel;

  ExperimentData experiment() const { return {u, y_pos, d, y_vel}; }
};

inline double power(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

inline double snr_db(std::span<const double> clean, std::span<const double> noisy) {
  double noise = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) noise += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
  return 10.0 * std::log10(power(clean) / (noise / static_cast<double>(clean.size())));
}

/// Adds white Gaussian noise scaled so that the realized SNR equals the target.
inline std::vector<double> add_noise(std::span<const double> clean, double snr, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> n(clean.size());
  for (double& v : n) v = gauss(rng);
  const double k = std::sqrt(power(clean) / (power(n) * std::pow(10.0, snr / 10.0)));
  std::vector<double> out(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out[i] = clean[i] + k * n[i];
  return out;
}

/// u(t) = sum_i cos(w_i Ts t + phi_u_i), d(t) = sum_i cos(w_i Ts t + phi_d_i),
/// phases uniform on [0, pi]; outputs from the discrete plant.
inline Dataset run_open_loop_experiment(const Plant& plant_d, const ExcitationConfig& cfg,
                                        const std::optional<NoiseConfig>& noise = std::nullopt) {
  cfg.validate();
  if (!plant_d.combined.is_discrete()) throw DomainError("run_open_loop_experiment: discrete plant required");
  const double ts = plant_d.combined.ts();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> phase(0.0, std::numbers::pi);
  const auto nf = cfg.frequencies.size();
  std::vector<double> phi_u(nf), phi_d(nf);
  for (auto& v : phi_u) v = phase(rng);
  for (auto& v : phi_d) v = phase(rng);
  Eigen::MatrixXd inputs(cfg.samples, 2);
  for (int t = 0; t < cfg.samples; ++t) {
    double u = 0.0, d = 0.0;
    for (std::size_t i = 0; i < nf; ++i) {
      u += std::cos(cfg.frequencies[i] * ts * t + phi_u[i]);
      d += std::cos(cfg.frequencies[i] * ts * t + phi_d[i]);
    }
    inputs(t, 0) = u;
    inputs(t, 1) = d;
  }
  const Eigen::MatrixXd y = simulate(plant_d.combined, inputs);
  auto column = [&](const Eigen::MatrixXd& m, Eigen::Index j) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[i] = m(i, j);
    return v;
  };
  std::vector<double> pos = column(y, position), vel = column(y, velocity);
  if (noise) {
    std::mt19937_64 nrng(noise->seed);
    pos = add_noise(pos, noise->snr_position_db, nrng);
    vel = add_noise(vel, noise->snr_velocity_db, nrng);
  }
  return {SignalRecord(column(inputs, 0), ts, "u"), SignalRecord(column(inputs, 1), ts, "d"),
          SignalRecord(std::move(pos), ts, "y"), SignalRecord(std::move(vel), ts, "y_dot")};
}

/// Passivity indices of the discrete u -> dy/dt map from a frequency scan.
/// nu1 = min Re G - nu_margin; rho1 is the scanned output index shrunk by
/// rho_margin (relative) toward the conservative side.
inline PlantIndices scan_plant_indices(const Plant& plant_d, int grid = 4096, double nu_margin = 1e-3,
                                       double rho_margin = 1e-2) {
  PlantIndices idx = estimate_passivity_indices(to_transfer_function(plant_d.p1, velocity, 0), grid, nu_margin);
  idx.rho -= rho_margin * std::abs(idx.rho);
  return idx;
}

/// Case-A spec for the gripper: scanned plant indices, eps1 = eps2 = 1e-3,
/// M = 2000, h0 = 1, h = 0.8.
inline DissipativitySpec default_case_a_spec(const PlantIndices& idx) {
  DissipativitySpec s;
  s.kase = DissipativityCase::A;
  s.nu1 = idx.nu;
  s.rho1 = idx.rho;
  s.M = 2000;
  s.h0 = 1.0;
  s.h = 0.8;
  return s;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct Baseline {
  std::string name;
  TwoDofController controller;
  double objective = 0.0;
  std::optional<cls::Solution> solution;
};

struct Baselines {
  Baseline pd;
  Baseline fir_unconstrained;
  Baseline fir_constrained_clean;
  std::optional<Baseline> fir_constrained_noisy;
  Baseline paper_pd;
};

/// Dual active set with gamma eliminated: the regressions here are
/// ill-conditioned and first-order iterations stall.
inline cls::Options default_solver() {
  cls::Options o = SynthesisRequest::default_solver();
  o.backend = cls::Backend::active_set;
  return o;
}

struct BaselineSettings {
  int m_fb = 50;
  int m_ff = 50;
  DissipativitySpec spec;
  cls::Options solver = default_solver();
  double paper_pd_gain = 0.3979;
  double paper_pd_integral = 0.0136;
};

inline Baseline fit_baseline(const std::string& name, const Dataset& data, const ReferenceModels& models, int m_fb,
                             int m_ff, IntegratorMode integrator, const std::optional<DissipativitySpec>& spec,
                             const cls::Options& solver) {
  SynthesisRequest req;
  req.objective = Objective::two_dof_filtered;
  req.sizes = {m_fb, m_ff};
  req.integrator = integrator;
  req.spec = spec;
  req.solver = solver;
  SynthesisResult r = synthesize(data.experiment(), models, req);
  if (r.solution.status == cls::Status::infeasible)
    throw NumericalError("gripper baseline '" + name + "': constraint set is infeasible");
  return {name, r.controller, r.objective, std::move(r.solution)};
}

/// Fixed feedback C with a least-squares prefilter of m_ff taps.
inline Baseline refit_prefilter(const std::string& name, const Dataset& data, const ReferenceModels& models,
                                double gain, double integral, int m_ff) {
  const RegressionProblem prob = assemble_regression(Objective::two_dof_filtered, data.experiment(), models,
                                                     {1, m_ff}, IntegratorMode::free);
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(prob.layout.size());
  fixed[prob.layout.gamma_col()] = integral;
  fixed[prob.layout.fb_col(0)] = gain;
  const Eigen::VectorXd rest = prob.target - prob.phi * fixed;
  const Eigen::MatrixXd ff = prob.phi.middleCols(prob.layout.ff_col(0), m_ff);
  const Eigen::VectorXd g_ff = ff.colPivHouseholderQr().solve(rest);
  fixed.segment(prob.layout.ff_col(0), m_ff) = g_ff;
  return {name, prob.layout.to_controller(fixed, prob.ts), prob.cost(fixed), std::nullopt};
}

inline Baselines synthesize_baselines(const Dataset& clean, const std::optional<Dataset>& noisy,
                                      const ReferenceModels& models, const BaselineSettings& s) {
  Baselines b{fit_baseline("pd", clean, models, 1, s.m_ff, IntegratorMode::free, std::nullopt, s.solver),
              fit_baseline("fir_unconstrained", clean, models, s.m_fb, s.m_ff, IntegratorMode::free, std::nullopt,
                           s.solver),
              fit_baseline("fir_constrained_clean", clean, models, s.m_fb, s.m_ff, IntegratorMode::free, s.spec,
                           s.solver),
              std::nullopt,
              refit_prefilter("paper_pd", clean, models, s.paper_pd_gain, s.paper_pd_integral, s.m_ff)};
  if (noisy)
    b.fir_constrained_noisy =
        fit_baseline("fir_constrained_noisy", *noisy, models, s.m_fb, s.m_ff, IntegratorMode::free, s.spec, s.solver);
  return b;
}

// ---------------------------------------------------------------------------
// Closed-loop evaluation
// ---------------------------------------------------------------------------

enum class Stability { stable, marginal, unstable };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::marginal: return "marginal";
    case Stability::unstable: return "unstable";
  }
  return "?";
}

/// Spectral radius within 1e-9 of one is reported as marginal.
inline Stability classify(double radius) {
  if (radius < 1.0 - 1e-9) return Stability::stable;
  if (radius <= 1.0 + 1e-9) return Stability::marginal;
  return Stability::unstable;
}

struct Scenario {
  double step_ref = 0.02;   ///< m
  double step_dist = 0.005; ///< N
  double dist_time = 5.0;   ///< s
  double duration = 10.0;   ///< s
  double bode_low = 0.5;    ///< rad/s
  double bode_high = 10.0;  ///< rad/s
  int bode_points = 200;
};

struct ClosedLoopReport {
  double spectral_radius = 0.0;
  Stability stability = Stability::unstable;
  Eigen::MatrixXd time_series;  ///< columns t, r, d, y, y_target
  Eigen::MatrixXd bode;         ///< columns w, |T_ry| dB, |M_r| dB, |T_dy| dB, |M_d| dB
  double mismatch_r_db = 0.0;   ///< max | |T_ry| - |M_r| | over the band, dB
  double mismatch_d_db = 0.0;
  double tracking_error = 0.0;  ///< |y - r| just before the disturbance step

  static std::vector<std::string> time_series_header() { return {"t", "r", "d", "y", "y_target"}; }
  static std::vector<std::string> bode_header() { return {"w", "T_ry_db", "Mr_db", "T_dy_db", "Md_db"}; }
};

/// Closed loop u = F(r) - C(dy/dt) around the discrete plant; performance
/// output is the position.
inline StateSpace closed_loop(const Plant& plant_d, const TwoDofController& ctrl) {
  return connect_feedback(plant_d.combined, ctrl.feedback_ss(),
                          ctrl.is_two_dof() ? ctrl.prefilter_ss()
                                            : std::optional<StateSpace>(StateSpace::static_gain(
                                                  0.0, Domain::discrete, plant_d.combined.ts())),
                          LoopSignals{position, velocity});
}

inline double db(Complex v) { return 20.0 * std::log10(std::abs(v)); }

/// Bode data use P1 F / (1 + P1v C) and P2 - P1 C P2v / (1 + P1v C), where
/// P1v and P2v are the velocity channels.
inline ClosedLoopReport evaluate_closed_loop(const Plant& plant_d, const TwoDofController& ctrl,
                                             const ReferenceModels& models, const Scenario& sc = {}) {
  const StateSpace cl = closed_loop(plant_d, ctrl);
  const double ts = plant_d.combined.ts();
  ClosedLoopReport rep;
  rep.spectral_radius = spectral_radius(cl);
  rep.stability = classify(rep.spectral_radius);

  const int n = static_cast<int>(std::lround(sc.duration / ts));
  const int t_dist = static_cast<int>(std::lround(sc.dist_time / ts));
  Eigen::MatrixXd inputs(n, 2);
  for (int t = 0; t < n; ++t) {
    inputs(t, 0) = sc.step_ref;
    inputs(t, 1) = t >= t_dist ? sc.step_dist : 0.0;
  }
  const Eigen::MatrixXd y = simulate(cl, inputs);
  std::vector<double> r(inputs.col(0).data(), inputs.col(0).data() + n);
  std::vector<double> d(inputs.col(1).data(), inputs.col(1).data() + n);
  const auto target_r = filter(models.mr, r);
  const auto target_d = filter(*models.md, d);
  rep.time_series.resize(n, 5);
  for (int t = 0; t < n; ++t)
    rep.time_series.row(t) << t * ts, r[t], d[t], y(t, 0), target_r[t] + target_d[t];
  rep.tracking_error = std::abs(y(std::max(t_dist - 1, 0), 0) - sc.step_ref);

  rep.bode.resize(sc.bode_points, 5);
  const double lo = std::log10(sc.bode_low), hi = std::log10(sc.bode_high);
  for (int k = 0; k < sc.bode_points; ++k) {
    const double w = std::pow(10.0, lo + (hi - lo) * k / std::max(sc.bode_points - 1, 1));
    const double theta = w * ts;
    const Complex c = ctrl.feedback_response(theta);
    const Complex p1 = frequency_response(plant_d.p1, theta, position, 0);
    const Complex sens = 1.0 + frequency_response(plant_d.p1, theta, velocity, 0) * c;
    const Complex f = ctrl.is_two_dof() ? ctrl.prefilter_tf().evaluate(std::polar(1.0, theta)) : Complex{0.0, 0.0};
    const Complex tr = p1 * f / sens;
    const Complex td = frequency_response(plant_d.p2, theta, position, 0) -
                       p1 * c * frequency_response(plant_d.p2, theta, velocity, 0) / sens;
    const Complex mr = frequency_response(models.mr, theta);
    const Complex md = frequency_response(*models.md, theta);
    rep.bode.row(k) << w, db(tr), db(mr), db(td), db(md);
    rep.mismatch_r_db = std::max(rep.mismatch_r_db, std::abs(db(tr) - db(mr)));
    rep.mismatch_d_db = std::max(rep.mismatch_d_db, std::abs(db(td) - db(md)));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Solver timing
// ---------------------------------------------------------------------------

struct TimingCell {
  int M = 0;
  int m_fb = 0;
  Eigen::Index rows = 0;
  double assembly_time = 0.0;
  double median_solve_time = 0.0;
  std::string status;
};

struct BenchmarkConfig {
  std::vector<int> m_fb{25, 50, 100, 200};
  std::vector<int> M{300, 500, 700};
  int m_ff = 50;
  int repetitions = 3;
  /// Case, plant indices and envelope for the timed problems; M is taken
  /// from the grid.
  DissipativitySpec spec = default_timing_spec();
  cls::Options solver = default_solver();

  static DissipativitySpec default_timing_spec() {
    DissipativitySpec s;
    s.kase = DissipativityCase::B;
    s.nu1 = 0.0;
    s.rho1 = 0.0;
    s.h0 = 1.0;
    s.h = 0.98;
    s.epsilon_override = 1e-2;
    return s;
  }
};

/// Median wall time of `repetitions` solves per (M, m_fb) cell; assembly of
/// the regression and constraints is timed separately.
inline std::vector<TimingCell> scaling_benchmark(const Dataset& data, const ReferenceModels& models,
                                                 const BenchmarkConfig& cfg) {
  using clock = std::chrono::steady_clock;
  std::vector<TimingCell> cells;
  for (int M : cfg.M)
    for (int m_fb : cfg.m_fb) {
      TimingCell cell;
      cell.M = M;
      cell.m_fb = m_fb;
      const auto t0 = clock::now();
      const RegressionProblem prob = assemble_regression(Objective::two_dof_filtered, data.experiment(), models,
                                                         {m_fb, cfg.m_ff}, IntegratorMode::free);
      DissipativitySpec spec = cfg.spec;
      spec.M = M;
      const LinearInequalitySystem sys = generate_constraints(spec, prob.layout);
      const cls::Problem p = to_cls_problem(prob, &sys);
      cell.assembly_time = std::chrono::duration<double>(clock::now() - t0).count();
      cell.rows = sys.inequalities() + sys.equalities();
      std::vector<double> times;
      for (int k = 0; k < cfg.repetitions; ++k) {
        const cls::Solution sol = cls::solve(p, cfg.solver);
        times.push_back(sol.wall_time);
        cell.status = to_string(sol.status);
      }
      std::sort(times.begin(), times.end());
      cell.median_solve_time = times[times.size() / 2];
      cells.push_back(cell);
    }
  return cells;
}

/// Least-squares slope of log(time) against log(m_fb) for one M.
inline double loglog_slope(const std::vector<TimingCell>& cells, int M) {
  std::vector<double> xs, ys;
  for (const auto& c : cells)
    if (c.M == M) {
      xs.push_back(std::log(static_cast<double>(c.m_fb)));
      ys.push_back(std::log(std::max(c.median_solve_time, 1e-9)));
    }
  if (xs.size() < 2) throw PreconditionError("loglog_slope: need at least two cells for this M");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace dvrft::gripper
