// Data-driven 2DOF design on a first-order plant: an unconstrained fit,
// then a fit restricted to a passive controller region, then its
// frequency-domain certificate.

#include <cstdio>
#include <random>

#include "dvrft/dvrft.hpp"

using namespace dvrft;

int main() {
  const double ts = 0.01;
  const auto p1 = TransferFunction::discrete({0.5}, {1.0, -0.8}, ts);
  const auto p2 = TransferFunction::discrete({0.3}, {1.0, -0.5}, ts);

  // Reference models realised by a known controller, so the fit has an exact answer.
  const TwoDofController target(0.5, {0.4, -0.1, 0.05}, {0.8, 0.3, -0.2}, ts);
  const auto loop = TransferFunction::gain(1.0, Domain::discrete, ts) + p1 * target.feedback_tf();
  const ReferenceModels models{p1 * target.prefilter_tf() / loop, p2 / loop};

  std::mt19937_64 rng(1);
  std::normal_distribution<double> white;
  std::vector<double> u(4000), d(4000);
  for (auto& v : u) v = white(rng);
  for (auto& v : d) v = white(rng);
  const auto yu = filter(p1, u);
  const auto yd = filter(p2, d);
  std::vector<double> y(u.size());
  for (std::size_t t = 0; t < y.size(); ++t) y[t] = yu[t] + yd[t];
  const ExperimentData data{SignalRecord(u, ts, "u"), SignalRecord(y, ts, "y"), SignalRecord(d, ts, "d"),
                            std::nullopt};

  SynthesisRequest req;
  req.sizes = {3, 3};
  const auto free_fit = synthesize(data, models, req);
  std::printf("unconstrained: gamma %.6f  g_fb [%.6f %.6f %.6f]  cost %.3e\n", free_fit.controller.gamma(),
              free_fit.controller.g_fb()[0], free_fit.controller.g_fb()[1], free_fit.controller.g_fb()[2],
              free_fit.objective);

  DissipativitySpec spec;
  spec.kase = DissipativityCase::B;
  spec.eps2 = 0.6;
  spec.M = 200;
  spec.h0 = 1.0;
  spec.h = 0.9;
  spec.epsilon_override = 1e-3;
  req.spec = spec;
  const auto boxed = synthesize(data, models, req);
  if (!boxed.solution.ok()) {
    std::printf("constrained fit failed: %s\n", boxed.solution.message.c_str());
    return 1;
  }
  std::printf("constrained:   gamma %.6f  g_fb [%.6f %.6f %.6f]  cost %.3e  (%ld rows, %s)\n",
              boxed.controller.gamma(), boxed.controller.g_fb()[0], boxed.controller.g_fb()[1],
              boxed.controller.g_fb()[2], boxed.objective, static_cast<long>(boxed.constraints->inequalities()),
              boxed.solution.backend.c_str());

  const auto cert = certify_nyquist(boxed.controller, spec, 10 * spec.M);
  std::printf("certificate:   %s  worst margin %.3e at theta %.4f\n", cert.pass ? "pass" : "fail", cert.worst_margin,
              cert.worst_theta);
  return cert.pass ? 0 : 4;
}
