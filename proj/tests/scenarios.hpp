#pragma once

// Synthetic data sets shared by the tests and the acceptance binary.

#include <random>

#include "oracles.hpp"

#include "dvrft/cls.hpp"
#include "dvrft/dissipativity.hpp"
#include "dvrft/vrft.hpp"

namespace scenario {

/// Plant, in-class controller and the reference models that controller
/// matches exactly: M_r = P1 F / (1 + P1 C), M_d = P2 / (1 + P1 C).
struct KnownLoop {
  dvrft::TransferFunction p1;
  dvrft::TransferFunction p2;
  dvrft::TwoDofController controller;
  dvrft::ReferenceModels models;
  dvrft::ExperimentData data;
};

inline std::vector<double> white(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline KnownLoop known_loop(std::size_t samples = 10000, std::uint64_t seed = 7) {
  using dvrft::TransferFunction;
  const double ts = 0.01;
  const auto p1 = TransferFunction::discrete({0.5}, {1.0, -0.8}, ts);
  const auto p2 = TransferFunction::discrete({0.3}, {1.0, -0.5}, ts);
  const dvrft::TwoDofController ctrl(0.5, {0.4, -0.1, 0.05}, {0.8, 0.3, -0.2}, ts);
  const auto one = TransferFunction::gain(1.0, dvrft::Domain::discrete, ts);
  const auto loop = one + p1 * ctrl.feedback_tf();
  const auto mr = p1 * ctrl.prefilter_tf() / loop;
  const auto md = p2 / loop;
  std::mt19937_64 rng(seed);
  const dvrft::SignalRecord u(white(rng, samples), ts, "u");
  const dvrft::SignalRecord d(white(rng, samples), ts, "d");
  const auto yu = dvrft::filter(p1, u.view());
  const auto yd = dvrft::filter(p2, d.view());
  std::vector<double> y(samples);
  for (std::size_t t = 0; t < samples; ++t) y[t] = yu[t] + yd[t];
  return {p1, p2, ctrl, {mr, md}, {u, dvrft::SignalRecord(y, ts, "y"), d, std::nullopt}};
}

/// One spec per dissipativity case with a known interior point of its
/// sampled region (layout [gamma | g_fb]).
struct RegionCase {
  dvrft::DissipativitySpec spec;
  Eigen::VectorXd interior;
};

inline std::vector<RegionCase> region_cases(int m_fb, int M) {
  using dvrft::DissipativityCase;
  std::vector<RegionCase> out;
  dvrft::DissipativitySpec a;
  a.kase = DissipativityCase::A;
  a.nu1 = -0.5;
  a.rho1 = 0.0;
  a.M = M;
  a.h0 = 1.2;
  a.h = 0.7;
  dvrft::DissipativitySpec b = a;
  b.kase = DissipativityCase::B;
  b.nu1 = 0.1;
  b.eps2 = 0.01;
  b.h0 = 1.0;
  dvrft::DissipativitySpec c = b;
  c.kase = DissipativityCase::C;
  c.alpha1 = 0.25;
  for (const auto& spec : {a, b, c}) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(1 + m_fb);
    if (spec.kase == DissipativityCase::A) x[1] = dvrft::case_a_geometry(spec).center;
    if (spec.kase == DissipativityCase::B) x[1] = 0.9 * spec.h0;
    out.push_back({spec, x});
  }
  return out;
}

/// Random point of {G x <= h, E x = e} on the segment from `interior` along a
/// random envelope-shaped direction; `boundary` places it at the far end.
inline Eigen::VectorXd random_feasible(const dvrft::LinearInequalitySystem& sys, const dvrft::DissipativitySpec& spec,
                                       const Eigen::VectorXd& interior, std::mt19937_64& rng, bool boundary) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(interior.size());
  if (spec.kase == dvrft::DissipativityCase::B) dir[0] = 0.5 * (unit(rng) + 1.0);
  for (int t = 0; t < sys.layout.m_fb; ++t) dir[sys.layout.fb_col(t)] = spec.h0 * std::pow(spec.h, t) * unit(rng);
  const Eigen::VectorXd slack = sys.h - sys.G * interior;
  const Eigen::VectorXd rate = sys.G * dir;
  double reach = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < rate.size(); ++i)
    if (rate[i] > 0.0) reach = std::min(reach, slack[i] / rate[i]);
  const double step = boundary ? reach * (1.0 - 1e-12) : reach * 0.5 * (unit(rng) + 1.0);
  return interior + step * dir;
}

/// Random feasible instance with p <= 8 variables, q <= 12 inequalities and
/// up to two equalities; A has full column rank with probability one.
struct ClsCase {
  dvrft::cls::Problem problem;
  Eigen::VectorXd feasible_point;

  oracle::ClsInstance instance() const {
    return {problem.A, problem.b, problem.G, problem.h, problem.E, problem.e};
  }
};

inline ClsCase random_cls(std::mt19937_64& rng, bool coordinate_equalities = false) {
  std::uniform_int_distribution<int> vars(1, 8), ineqs(0, 12), eqs(0, 2);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int p = vars(rng), q = ineqs(rng), r = std::min(eqs(rng), p - 1);
  auto random_matrix = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = unit(rng);
    return m;
  };
  auto random_vector = [&](int n) { return Eigen::VectorXd(random_matrix(n, 1)); };
  ClsCase c;
  c.problem.A = random_matrix(p + 4, p);
  c.problem.b = 2.0 * random_vector(p + 4);
  c.feasible_point = random_vector(p);
  c.problem.G = random_matrix(q, p);
  c.problem.h = c.problem.G * c.feasible_point;
  for (int i = 0; i < q; ++i) c.problem.h[i] += i % 3 == 0 ? 0.0 : 0.5 * (unit(rng) + 1.0);
  if (coordinate_equalities) {
    c.problem.E = Eigen::MatrixXd::Zero(r, p);
    for (int i = 0; i < r; ++i) c.problem.E(i, i) = 1.0 + std::abs(unit(rng));
  } else {
    c.problem.E = random_matrix(r, p);
  }
  c.problem.e = c.problem.E * c.feasible_point;
  return c;
}

}  // namespace scenario
