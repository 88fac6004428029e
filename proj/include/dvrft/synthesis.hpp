#pragma once

/// @file
/// Regression, constraint generation and solve in one call.

#include <chrono>
#include <optional>

#include "dvrft/cls.hpp"
#include "dvrft/dissipativity.hpp"
#include "dvrft/vrft.hpp"

namespace dvrft {

struct SynthesisRequest {
  Objective objective = Objective::two_dof_filtered;
  RegressionSizes sizes{50, 50};
  IntegratorMode integrator = IntegratorMode::free;
  std::optional<DissipativitySpec> spec;
  /// Replace spec->h0 by h0_scale * max|g_fb| of the unconstrained fit.
  bool h0_from_fit = false;
  double h0_scale = 10.0;
  cls::Options solver = default_solver();

  /// Coordinate equalities (gamma = 0) are removed so that gamma is exactly zero.
  static cls::Options default_solver() {
    cls::Options o;
    o.eliminate_equalities = true;
    return o;
  }
};

struct SynthesisResult {
  TwoDofController controller;
  double objective = 0.0;  ///< (1/N) ||target - phi p||^2
  cls::Solution solution;
  std::optional<LinearInequalitySystem> constraints;
  std::optional<DissipativitySpec> spec;  ///< spec actually used
  double assembly_time = 0.0;             ///< regression and constraints, seconds
  Eigen::Index rows = 0;
};

inline cls::Problem to_cls_problem(const RegressionProblem& prob, const LinearInequalitySystem* sys) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(prob.rows()));
  cls::Problem p;
  p.A = prob.phi * scale;
  p.b = prob.target * scale;
  const auto n = prob.phi.cols();
  if (sys) {
    p.G = sys->G;
    p.h = sys->h;
    p.E = sys->E;
    p.e = sys->e;
  } else {
    p.G.resize(0, n);
    p.h.resize(0);
    p.E.resize(0, n);
    p.e.resize(0);
  }
  return p;
}

/// Unconstrained least-squares fit through the constrained solver (same
/// regularization policy as the constrained fits).
inline Eigen::VectorXd unconstrained_fit(const RegressionProblem& prob, const cls::Options& opt = {}) {
  const auto sol = cls::solve(to_cls_problem(prob, nullptr), opt);
  if (sol.status == cls::Status::infeasible) throw NumericalError("unconstrained fit reported infeasible");
  return sol.x;
}

inline SynthesisResult synthesize(const ExperimentData& data, const ReferenceModels& models,
                                  const SynthesisRequest& req) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const RegressionProblem prob = assemble_regression(req.objective, data, models, req.sizes, req.integrator);
  std::optional<DissipativitySpec> spec = req.spec;
  std::optional<LinearInequalitySystem> sys;
  if (spec) {
    if (req.h0_from_fit) {
      const Eigen::VectorXd p = unconstrained_fit(prob, req.solver);
      double peak = 0.0;
      for (int t = 0; t < prob.layout.m_fb; ++t) peak = std::max(peak, std::abs(p[prob.layout.fb_col(t)]));
      spec->h0 = req.h0_scale * std::max(peak, 1e-12);
    }
    sys = generate_constraints(*spec, prob.layout);
  }
  const double assembly = std::chrono::duration<double>(clock::now() - t0).count();
  cls::Solution sol = cls::solve(to_cls_problem(prob, sys ? &*sys : nullptr), req.solver);
  SynthesisResult out{prob.layout.to_controller(sol.x, prob.ts), prob.cost(sol.x), std::move(sol), std::move(sys),
                      spec, assembly, prob.rows()};
  return out;
}

}  // namespace dvrft
