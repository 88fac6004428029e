// Gripper study: open-loop experiments, baseline controllers, closed-loop
// evaluation. Optional argument: directory for the Bode and step CSVs.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dvrft/dvrft.hpp"

using namespace dvrft;
using namespace dvrft::gripper;

int main(int argc, char** argv) {
  const Params params;
  const Plant plant = discrete_plant(params);
  const ReferenceModels models = reference_models(params.ts);
  const Dataset clean = run_open_loop_experiment(plant, ExcitationConfig{});
  const Dataset noisy = run_open_loop_experiment(plant, ExcitationConfig{}, NoiseConfig{});
  std::printf("SNR: position %.1f dB, velocity %.1f dB\n", snr_db(clean.y_pos.samples(), noisy.y_pos.samples()),
              snr_db(clean.y_vel.samples(), noisy.y_vel.samples()));

  const PlantIndices idx = scan_plant_indices(plant);
  BaselineSettings settings;
  settings.spec = default_case_a_spec(idx);
  std::printf("plant indices: nu %.6f, rho %.6f\n", idx.nu, idx.rho);

  const Baselines b = synthesize_baselines(clean, noisy, models, settings);
  std::printf("\n%-28s %12s %14s %-10s %10s %10s\n", "controller", "cost", "spectral rad", "stability", "dB(M_r)",
              "dB(M_d)");
  std::vector<const Baseline*> rows{&b.pd, &b.fir_unconstrained, &b.fir_constrained_clean};
  if (b.fir_constrained_noisy) rows.push_back(&*b.fir_constrained_noisy);
  rows.push_back(&b.paper_pd);
  const std::filesystem::path out = argc > 1 ? argv[1] : "";
  if (!out.empty()) std::filesystem::create_directories(out);
  for (const Baseline* row : rows) {
    const auto rep = evaluate_closed_loop(plant, row->controller, models);
    std::printf("%-28s %12.4e %14.9f %-10s %10.3f %10.3f\n", row->name.c_str(), row->objective, rep.spectral_radius,
                to_string(rep.stability), rep.mismatch_r_db, rep.mismatch_d_db);
    if (out.empty()) continue;
    std::ofstream bode(out / (row->name + "_bode.csv"));
    io::write_matrix_csv(bode, rep.bode, ClosedLoopReport::bode_header());
    std::ofstream step(out / (row->name + "_step.csv"));
    io::write_matrix_csv(step, rep.time_series, ClosedLoopReport::time_series_header());
  }

  const auto cert = certify_nyquist(b.fir_constrained_clean.controller, settings.spec, 10 * settings.spec.M);
  std::printf("\nconstrained FIR certificate: %s (margin %.3e)\n", cert.pass ? "pass" : "fail", cert.worst_margin);
  return 0;
}
