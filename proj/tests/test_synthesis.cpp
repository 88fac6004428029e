#include <gtest/gtest.h>

#include "dvrft/synthesis.hpp"
#include "scenarios.hpp"

using namespace dvrft;

namespace {

DissipativitySpec case_b_spec() {
  DissipativitySpec s;
  s.kase = DissipativityCase::B;
  s.rho1 = 0.0;
  s.eps2 = 0.6;
  s.M = 200;
  s.h0 = 1.0;
  s.h = 0.9;
  s.epsilon_override = 1e-3;
  return s;
}

}  // namespace

TEST(Synthesis, UnconstrainedMatchesLeastSquares) {
  const auto s = scenario::known_loop(3000, 31);
  SynthesisRequest req;
  req.sizes = {4, 4};
  const auto r = synthesize(s.data, s.models, req);
  const auto prob = assemble_regression(Objective::two_dof_filtered, s.data, s.models, {4, 4}, IntegratorMode::free);
  const Eigen::VectorXd ls = least_squares_fit(prob);
  EXPECT_LT((prob.layout.from_controller(r.controller) - ls).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_FALSE(r.constraints.has_value());
  EXPECT_EQ(r.rows, prob.rows());
  EXPECT_NEAR(r.objective, prob.cost(ls), 1e-12);
  EXPECT_NEAR(r.solution.objective, r.objective, 1e-12);
}

TEST(Synthesis, ConstrainedFitRespectsRegion) {
  const auto s = scenario::known_loop(3000, 32);
  for (auto backend : {cls::Backend::admm, cls::Backend::active_set}) {
    SynthesisRequest req;
    req.sizes = {5, 3};
    req.spec = case_b_spec();
    req.solver.backend = backend;
    const auto r = synthesize(s.data, s.models, req);
    ASSERT_EQ(r.solution.status, cls::Status::solved) << r.solution.message;
    ASSERT_TRUE(r.constraints.has_value());
    EXPECT_LE(r.constraints->max_violation(r.solution.x), 1e-8);
    EXPECT_TRUE(certify_nyquist(r.controller, *req.spec, 10 * req.spec->M).pass);
    // The in-class controller has Re C < 0.6 somewhere, so the region binds.
    SynthesisRequest free = req;
    free.spec.reset();
    EXPECT_GT(r.objective, synthesize(s.data, s.models, free).objective);
  }
}

TEST(Synthesis, CaseAFixesIntegratorAtZero) {
  const auto s = scenario::known_loop(2000, 33);
  SynthesisRequest req;
  req.sizes = {4, 3};
  DissipativitySpec a;
  a.nu1 = -0.5;
  a.M = 200;
  a.h0 = 1.2;
  a.h = 0.7;
  req.spec = a;
  const auto r = synthesize(s.data, s.models, req);
  ASSERT_EQ(r.solution.status, cls::Status::solved);
  EXPECT_EQ(r.controller.gamma(), 0.0);
  EXPECT_TRUE(certify_nyquist(r.controller, a, 2000).pass);
}

TEST(Synthesis, EnvelopeScaleFromUnconstrainedFit) {
  const auto s = scenario::known_loop(2000, 34);
  SynthesisRequest req;
  req.sizes = {3, 3};
  req.spec = case_b_spec();
  req.spec->eps2 = 0.01;
  req.h0_from_fit = true;
  req.h0_scale = 10.0;
  const auto r = synthesize(s.data, s.models, req);
  const auto prob = assemble_regression(Objective::two_dof_filtered, s.data, s.models, {3, 3}, IntegratorMode::free);
  const Eigen::VectorXd ls = least_squares_fit(prob);
  const double peak = ls.segment(prob.layout.fb_col(0), 3).cwiseAbs().maxCoeff();
  ASSERT_TRUE(r.spec.has_value());
  EXPECT_NEAR(r.spec->h0, 10.0 * peak, 1e-8 * peak);
}

TEST(Synthesis, ClsProblemObjectiveIsRegressionCost) {
  const auto s = scenario::known_loop(1000, 35);
  const auto prob = assemble_regression(Objective::two_dof_filtered, s.data, s.models, {3, 2}, IntegratorMode::free);
  const auto p = to_cls_problem(prob, nullptr);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(prob.layout.size(), -1.0, 1.0);
  EXPECT_NEAR(p.objective(x), prob.cost(x), 1e-12 * prob.cost(x));
  EXPECT_EQ(p.G.rows(), 0);
  EXPECT_EQ(p.G.cols(), prob.layout.size());
}

TEST(Synthesis, EmptyBoxPropagates) {
  const auto s = scenario::known_loop(1000, 36);
  SynthesisRequest req;
  req.sizes = {30, 2};
  DissipativitySpec a;
  a.nu1 = -0.5;
  a.M = 20;
  a.h0 = 1.0;
  a.h = 1.0;
  req.spec = a;
  EXPECT_THROW(synthesize(s.data, s.models, req), EmptyBoxError);
}
