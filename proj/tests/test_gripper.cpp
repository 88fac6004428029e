#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "dvrft/gripper.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace dvrft;
using namespace dvrft::gripper;

namespace {

/// C (jw I - A)^-1 B for one output and input, by a dense complex solve.
Complex continuous_response(const StateSpace& s, double w, Eigen::Index out) {
  const auto n = s.a().rows();
  const Eigen::MatrixXcd m = Complex(0.0, w) * Eigen::MatrixXcd::Identity(n, n) - s.a().cast<Complex>();
  const Eigen::VectorXcd x = m.partialPivLu().solve(s.b().col(0).cast<Complex>());
  return (s.c().row(out).cast<Complex>() * x)(0);
}

/// Shared pipeline: clean and noisy data sets and all baselines.
class GripperStudy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    plant_ = new Plant(discrete_plant(Params{}));
    models_ = new ReferenceModels(reference_models(Params{}.ts));
    clean_ = new Dataset(run_open_loop_experiment(*plant_, ExcitationConfig{}));
    noisy_ = new Dataset(run_open_loop_experiment(*plant_, ExcitationConfig{}, NoiseConfig{}));
    indices_ = new PlantIndices(scan_plant_indices(*plant_));
    BaselineSettings settings;
    settings.spec = default_case_a_spec(*indices_);
    spec_ = new DissipativitySpec(settings.spec);
    baselines_ = new Baselines(synthesize_baselines(*clean_, *noisy_, *models_, settings));
  }

  static void TearDownTestSuite() {
    delete plant_;
    delete models_;
    delete clean_;
    delete noisy_;
    delete indices_;
    delete spec_;
    delete baselines_;
  }

  static inline Plant* plant_ = nullptr;
  static inline ReferenceModels* models_ = nullptr;
  static inline Dataset* clean_ = nullptr;
  static inline Dataset* noisy_ = nullptr;
  static inline PlantIndices* indices_ = nullptr;
  static inline DissipativitySpec* spec_ = nullptr;
  static inline Baselines* baselines_ = nullptr;
};

}  // namespace

// ---------------------------------------------------------------------------
// Plant
// ---------------------------------------------------------------------------

TEST(GripperPlant, StaticGainIsInverseClosingStiffness) {
  const Params p;
  const auto plant = build_plant(p);
  EXPECT_NEAR(continuous_response(plant.p1, 0.0, position).real(), 1.0 / p.k1, 1e-12);
  EXPECT_NEAR(1.0 / p.k1, 0.6667, 5e-5);
  EXPECT_NEAR(std::abs(continuous_response(plant.p1, 0.0, velocity)), 0.0, 1e-12);
}

TEST(GripperPlant, VelocityChannelIsPositiveReal) {
  const auto plant = build_plant(Params{});
  for (int k = 0; k < 1024; ++k) {
    const double w = std::pow(10.0, -2.0 + 5.0 * k / 1023.0);
    EXPECT_GE(continuous_response(plant.p1, w, velocity).real(), -1e-12) << "w = " << w;
  }
}

TEST(GripperPlant, PolesInOpenLeftHalfPlane) {
  const auto plant = build_plant(Params{});
  for (const auto& z : oracle::durand_kerner(oracle::char_poly(plant.p1.a()))) EXPECT_LT(z.real(), 0.0);
}

TEST(GripperPlant, DiscretePlantHasShortageOfInputPassivity) {
  const auto idx = scan_plant_indices(discrete_plant(Params{}));
  EXPECT_LE(idx.nu, 0.0);
  EXPECT_GT(idx.rho, 0.0);
  EXPECT_LT(idx.nu * idx.rho, 0.25);
  EXPECT_NO_THROW(default_case_a_spec(idx).validate());
}

TEST(GripperPlant, RejectsNonPositiveParameters) {
  Params p;
  p.c2 = 0.0;
  EXPECT_THROW(build_plant(p), PreconditionError);
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

TEST_F(GripperStudy, NoiseFreeOutputsAreThePlantSimulation) {
  Eigen::MatrixXd inputs(clean_->u.size(), 2);
  for (std::size_t t = 0; t < clean_->u.size(); ++t) inputs.row(static_cast<Eigen::Index>(t)) << clean_->u[t], clean_->d[t];
  const Eigen::MatrixXd y = simulate(plant_->combined, inputs);
  for (std::size_t t = 0; t < clean_->u.size(); t += 97) {
    EXPECT_EQ(clean_->y_pos[t], y(static_cast<Eigen::Index>(t), position));
    EXPECT_EQ(clean_->y_vel[t], y(static_cast<Eigen::Index>(t), velocity));
  }
}

TEST_F(GripperStudy, ExcitationIsTenCosinesOverTheBand) {
  const ExcitationConfig cfg;
  ASSERT_EQ(cfg.frequencies.size(), 10u);
  EXPECT_EQ(cfg.frequencies.front(), 0.5);
  EXPECT_DOUBLE_EQ(cfg.frequencies.back(), 10.0);
  EXPECT_EQ(clean_->u.size(), 10000u);
  double peak = 0.0;
  for (double v : clean_->u.samples()) peak = std::max(peak, std::abs(v));
  EXPECT_LE(peak, 10.0);
  EXPECT_GT(peak, 5.0);
}

TEST_F(GripperStudy, RealizedSnrMatchesTarget) {
  EXPECT_NEAR(snr_db(clean_->y_pos.samples(), noisy_->y_pos.samples()), 28.1, 0.2);
  EXPECT_NEAR(snr_db(clean_->y_vel.samples(), noisy_->y_vel.samples()), 30.6, 0.2);
  EXPECT_EQ(clean_->u.samples(), noisy_->u.samples());
}

TEST_F(GripperStudy, ExperimentIsReproducible) {
  const auto again = run_open_loop_experiment(*plant_, ExcitationConfig{}, NoiseConfig{});
  EXPECT_EQ(again.y_pos.samples(), noisy_->y_pos.samples());
  EXPECT_EQ(again.y_vel.samples(), noisy_->y_vel.samples());
  ExcitationConfig other;
  other.seed = 99;
  EXPECT_NE(run_open_loop_experiment(*plant_, other).u.samples(), clean_->u.samples());
}

TEST_F(GripperStudy, PlantSatisfiesScannedSupplyRate) {
  std::mt19937_64 rng(50);
  const auto form = SupplyRateForm::passivity(indices_->nu, indices_->rho);
  for (int trial = 0; trial < 50; ++trial) {
    const SignalRecord u(scenario::white(rng, 2000), plant_->p1.ts());
    Eigen::MatrixXd in(2000, 1);
    for (int t = 0; t < 2000; ++t) in(t, 0) = u[t];
    const Eigen::MatrixXd y = simulate(plant_->p1, in);
    std::vector<double> v(2000);
    for (int t = 0; t < 2000; ++t) v[t] = y(t, velocity);
    EXPECT_TRUE(supply_rate_check(u, SignalRecord(v, u.ts()), form).pass) << "seed trial " << trial;
  }
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

TEST_F(GripperStudy, NestedObjectivesAreOrdered) {
  EXPECT_GE(baselines_->pd.objective, baselines_->fir_unconstrained.objective);
  EXPECT_LE(baselines_->fir_unconstrained.objective, baselines_->fir_constrained_clean.objective);
  EXPECT_EQ(baselines_->pd.controller.g_fb().size(), 1u);
  EXPECT_EQ(baselines_->fir_constrained_clean.controller.g_fb().size(), 50u);
  EXPECT_EQ(baselines_->fir_constrained_clean.controller.g_ff().size(), 50u);
}

TEST_F(GripperStudy, ConstrainedTapsSatisfyEveryInequality) {
  for (const Baseline* b : {&baselines_->fir_constrained_clean, &*baselines_->fir_constrained_noisy}) {
    const ParameterLayout layout{true, 50, 50};
    const auto sys = generate_constraints(*spec_, layout);
    EXPECT_LE(sys.max_violation(layout.from_controller(b->controller)), 1e-8) << b->name;
    EXPECT_EQ(b->controller.gamma(), 0.0);
    EXPECT_TRUE(certify_nyquist(b->controller, *spec_, 10 * spec_->M).pass) << b->name;
  }
}

TEST_F(GripperStudy, ConstrainedControllersStabilize) {
  for (const Baseline* b : {&baselines_->fir_constrained_clean, &*baselines_->fir_constrained_noisy}) {
    const auto rep = evaluate_closed_loop(*plant_, b->controller, *models_);
    EXPECT_LT(rep.spectral_radius, 1.0) << b->name;
    EXPECT_EQ(rep.stability, Stability::stable);
    EXPECT_LT(rep.tracking_error, 2e-3) << b->name;
  }
}

TEST_F(GripperStudy, PaperPdUsesPublishedGains) {
  const auto& c = baselines_->paper_pd.controller;
  EXPECT_EQ(c.g_fb(), std::vector<double>{0.3979});
  EXPECT_EQ(c.gamma(), 0.0136);
}

TEST_F(GripperStudy, ZeroControllerLeavesOpenLoopStable) {
  const auto rep = evaluate_closed_loop(*plant_, TwoDofController(0.0, {0.0}, {1.0}, plant_->p1.ts()), *models_);
  EXPECT_EQ(rep.stability, Stability::stable);
  EXPECT_NEAR(rep.spectral_radius, spectral_radius(plant_->combined), 1e-12);
}

TEST_F(GripperStudy, BodeDataMatchClosedLoopRealization) {
  const auto& ctrl = baselines_->fir_constrained_clean.controller;
  const auto cl = closed_loop(*plant_, ctrl);
  Scenario sc;
  sc.bode_points = 16;
  const auto rep = evaluate_closed_loop(*plant_, ctrl, *models_, sc);
  for (Eigen::Index k = 0; k < rep.bode.rows(); ++k) {
    const double theta = rep.bode(k, 0) * plant_->p1.ts();
    EXPECT_NEAR(rep.bode(k, 1), db(frequency_response(cl, theta, 0, 0)), 1e-6);
    EXPECT_NEAR(rep.bode(k, 3), db(frequency_response(cl, theta, 0, 1)), 1e-6);
  }
  ASSERT_EQ(rep.time_series.cols(), 5);
  EXPECT_EQ(rep.time_series.rows(), 1000);
  EXPECT_EQ(ClosedLoopReport::bode_header().size(), 5u);
}

TEST_F(GripperStudy, TimingTableHasOneCellPerPair) {
  BenchmarkConfig cfg;
  cfg.m_fb = {5, 10};
  cfg.M = {300, 500};
  cfg.m_ff = 5;
  cfg.repetitions = 1;
  const auto cells = scaling_benchmark(*clean_, *models_, cfg);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[0].M, 300);
  EXPECT_EQ(cells[1].m_fb, 10);
  EXPECT_EQ(cells[3].rows, 1 + 501 + 20);
  for (const auto& c : cells) EXPECT_EQ(c.status, "solved");
  EXPECT_THROW(loglog_slope(cells, 700), PreconditionError);
}

TEST(GripperTiming, SlopeOfPowerLaw) {
  std::vector<TimingCell> cells;
  for (int m : {25, 50, 100, 200}) cells.push_back({300, m, 0, 0.0, 1e-3 * std::pow(m, 1.5), "solved"});
  EXPECT_NEAR(loglog_slope(cells, 300), 1.5, 1e-12);
}
