// Command-line front end: synth, verify, simulate, bench, demo-gripper.
//
// Exit codes: 0 success, 1 internal error, 2 configuration error,
// 3 solver reported infeasible, 4 certification failed.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dvrft/dvrft.hpp"

namespace fs = std::filesystem;
using dvrft::io::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_internal = 1;
constexpr int exit_config = 2;
constexpr int exit_infeasible = 3;
constexpr int exit_uncertified = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string format = "csv";
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

class Writer {
 public:
  Writer(fs::path dir, dvrft::io::Provenance prov, std::string format)
      : dir_(std::move(dir)), prov_(std::move(prov)), format_(std::move(format)) {
    fs::create_directories(dir_);
  }

  void json_file(const std::string& name, json body) const {
    body["provenance"] = prov_.to_json();
    std::ofstream out(dir_ / (name + ".json"));
    out << body.dump(2) << '\n';
  }

  void table(const std::string& name, const Eigen::MatrixXd& m, const std::vector<std::string>& header) const {
    if (format_ == "json") {
      json cols = json::object();
      for (std::size_t k = 0; k < header.size(); ++k)
        cols[header[k]] = dvrft::io::to_vector(m.col(static_cast<Eigen::Index>(k)));
      json_file(name, {{"columns", cols}});
      return;
    }
    std::ofstream out(dir_ / (name + ".csv"));
    prov_.write_csv_header(out);
    dvrft::io::write_matrix_csv(out, m, header);
  }

  void signal(const std::string& name, const dvrft::SignalRecord& s) const {
    std::ofstream out(dir_ / (name + ".csv"));
    dvrft::io::write_signal_csv(out, s);
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  dvrft::io::Provenance prov_;
  std::string format_;
};

dvrft::io::Provenance provenance(const std::string& command, const std::string& config_text, std::uint64_t seed) {
  return {config_text.empty() ? std::string("none") : dvrft::io::hex64(dvrft::io::fnv1a(config_text)), seed,
          dvrft::version, command};
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const Common& c) {
  if (c.config.empty()) throw ConfigError("synth: --config is required");
  std::string raw;
  const dvrft::SynthesisConfig cfg = dvrft::load_synthesis_config(c.config, &raw);
  const std::uint64_t seed = c.seed.value_or(cfg.seed);
  const auto [data, models] = dvrft::load_experiment(cfg);
  const dvrft::SynthesisResult res = dvrft::synthesize(data, models, cfg.request());

  Writer w(c.out, provenance("synth", raw, seed), c.format);
  w.json_file("solution", dvrft::io::to_json(res.solution));
  if (res.solution.status == dvrft::cls::Status::infeasible) {
    std::cerr << "synth: constraint set is infeasible: " << res.solution.message << '\n';
    return exit_infeasible;
  }
  if (!res.solution.ok()) {
    std::cerr << "synth: solver did not converge: " << res.solution.message << '\n';
    return exit_internal;
  }
  json ctrl = dvrft::io::to_json(res.controller);
  ctrl["objective"] = res.objective;
  ctrl["objective_kind"] = dvrft::to_string(cfg.objective);
  ctrl["regression_rows"] = res.rows;
  w.json_file("controller", ctrl);

  if (!res.spec) {
    w.json_file("certificate", {{"type", "certificate"}, {"pass", true}, {"message", "no dissipativity spec"}});
    std::cout << "synth: objective " << res.objective << ", no certificate requested\n";
    return exit_ok;
  }
  const dvrft::CertificateReport rep = dvrft::certify_nyquist(res.controller, *res.spec, cfg.certification_grid());
  json cert = dvrft::io::to_json(rep);
  cert["spec"] = dvrft::io::to_json(*res.spec);
  w.json_file("certificate", cert);
  std::cout << "synth: objective " << res.objective << ", certificate " << (rep.pass ? "pass" : "FAIL")
            << " (worst margin " << rep.worst_margin << ")\n";
  return rep.pass ? exit_ok : exit_uncertified;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const Common& c, const std::string& controller_path, const std::string& spec_path, int grid) {
  if (controller_path.empty() || spec_path.empty()) throw ConfigError("verify: --controller and --spec are required");
  json cj = parse_json_file(controller_path);
  cj.erase("provenance");
  cj.erase("objective");
  cj.erase("objective_kind");
  cj.erase("regression_rows");
  json sj = parse_json_file(spec_path);
  if (sj.contains("spec")) sj = sj.at("spec");
  dvrft::TwoDofController ctrl = [&] {
    try {
      return dvrft::io::controller_from_json(cj);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("controller: ") + e.what());
    }
  }();
  dvrft::DissipativitySpec spec = [&] {
    try {
      return dvrft::io::spec_from_json(sj);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("spec: ") + e.what());
    }
  }();
  spec.validate();
  const int n = grid > 0 ? grid : std::max(10 * spec.M, 5000);
  const dvrft::CertificateReport rep = dvrft::certify_nyquist(ctrl, spec, n);
  Writer w(c.out, provenance("verify", read_text(controller_path) + read_text(spec_path), c.seed.value_or(0)),
           c.format);
  json cert = dvrft::io::to_json(rep);
  cert["spec"] = dvrft::io::to_json(spec);
  w.json_file("certificate", cert);
  std::cout << "verify: case " << dvrft::to_string(rep.kase) << ' ' << (rep.pass ? "pass" : "FAIL")
            << ", worst margin " << rep.worst_margin << " at theta " << rep.worst_theta << '\n';
  return rep.pass ? exit_ok : exit_uncertified;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

dvrft::gripper::Scenario scenario_from_json(const json& j) {
  dvrft::io::require_keys(j, {"step_ref", "step_dist", "dist_time", "duration", "bode_low", "bode_high", "bode_points"},
                          "scenario");
  dvrft::gripper::Scenario s;
  s.step_ref = j.value("step_ref", s.step_ref);
  s.step_dist = j.value("step_dist", s.step_dist);
  s.dist_time = j.value("dist_time", s.dist_time);
  s.duration = j.value("duration", s.duration);
  s.bode_low = j.value("bode_low", s.bode_low);
  s.bode_high = j.value("bode_high", s.bode_high);
  s.bode_points = j.value("bode_points", s.bode_points);
  if (!(s.duration > 0.0 && s.dist_time >= 0.0)) throw ConfigError("scenario: duration and dist_time out of range");
  if (!(s.bode_low > 0.0 && s.bode_high > s.bode_low && s.bode_points >= 2))
    throw ConfigError("scenario: bode band must satisfy 0 < low < high with at least 2 points");
  return s;
}

/// Prefilter 1 and no feedback: u = r.
dvrft::TwoDofController open_loop_controller(double ts) { return {0.0, {0.0}, {1.0}, ts}; }

void write_closed_loop(const Writer& w, const std::string& stem, const dvrft::gripper::ClosedLoopReport& rep) {
  using R = dvrft::gripper::ClosedLoopReport;
  w.table(stem + "_time", rep.time_series, R::time_series_header());
  w.table(stem + "_bode", rep.bode, R::bode_header());
}

json closed_loop_summary(const dvrft::gripper::ClosedLoopReport& rep) {
  return {{"spectral_radius", rep.spectral_radius},
          {"stability", dvrft::gripper::to_string(rep.stability)},
          {"mismatch_r_db", rep.mismatch_r_db},
          {"mismatch_d_db", rep.mismatch_d_db},
          {"tracking_error", rep.tracking_error}};
}

int cmd_simulate(const Common& c, const std::string& controller_path, const std::string& plant_path) {
  std::string raw;
  dvrft::gripper::Scenario sc;
  if (!c.config.empty()) {
    raw = read_text(c.config);
    sc = scenario_from_json(parse_json_file(c.config));
  }
  const dvrft::gripper::Params params;
  dvrft::gripper::Plant plant = dvrft::gripper::discrete_plant(params);
  if (!plant_path.empty()) {
    const dvrft::StateSpace ss = dvrft::io::state_space_from_json(parse_json_file(plant_path));
    if (!ss.is_discrete() || ss.n_inputs() != 2 || ss.n_outputs() != 2)
      throw ConfigError("simulate: plant must be discrete with inputs (u, d) and outputs (position, velocity)");
    plant = dvrft::gripper::split(ss);
  }
  const double ts = plant.combined.ts();
  const dvrft::TwoDofController ctrl = controller_path.empty()
                                           ? open_loop_controller(ts)
                                           : dvrft::io::controller_from_json([&] {
                                               json j = parse_json_file(controller_path);
                                               for (const char* k : {"provenance", "objective", "objective_kind",
                                                                     "regression_rows"})
                                                 j.erase(k);
                                               return j;
                                             }());
  if (std::abs(ctrl.ts() - ts) > 1e-12 * ts) throw ConfigError("simulate: controller and plant sample periods differ");
  const auto rep = dvrft::gripper::evaluate_closed_loop(plant, ctrl, dvrft::gripper::reference_models(ts), sc);
  Writer w(c.out, provenance("simulate", raw, c.seed.value_or(0)), c.format);
  const std::string stem = controller_path.empty() ? "open_loop" : "closed_loop";
  write_closed_loop(w, stem, rep);
  w.json_file(stem + "_summary", closed_loop_summary(rep));
  std::cout << "simulate: " << stem << " spectral radius " << rep.spectral_radius << " ("
            << dvrft::gripper::to_string(rep.stability) << ")\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

dvrft::gripper::BenchmarkConfig bench_config_from_json(const json& j) {
  dvrft::io::require_keys(j, {"m_fb", "M", "m_ff", "repetitions", "samples", "spec", "solver"}, "bench");
  dvrft::gripper::BenchmarkConfig b;
  b.m_fb = j.value("m_fb", b.m_fb);
  b.M = j.value("M", b.M);
  b.m_ff = j.value("m_ff", b.m_ff);
  b.repetitions = j.value("repetitions", b.repetitions);
  if (j.contains("spec")) b.spec = dvrft::io::spec_from_json(j.at("spec"));
  if (j.contains("solver")) b.solver = dvrft::solver_options_from_json(j.at("solver"));
  if (b.repetitions < 1) throw ConfigError("bench: repetitions must be positive");
  for (int m : b.m_fb)
    if (m < 1) throw ConfigError("bench: m_fb entries must be positive");
  for (int M : b.M)
    if (M < 2) throw ConfigError("bench: M entries must be at least 2");
  return b;
}

/// Rows M, columns m_fb, median solve seconds.
Eigen::MatrixXd timing_grid(const std::vector<dvrft::gripper::TimingCell>& cells,
                            const dvrft::gripper::BenchmarkConfig& b) {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(b.M.size()), static_cast<Eigen::Index>(b.m_fb.size()) + 1);
  for (std::size_t i = 0; i < b.M.size(); ++i) {
    g(static_cast<Eigen::Index>(i), 0) = b.M[i];
    for (std::size_t k = 0; k < b.m_fb.size(); ++k)
      for (const auto& cell : cells)
        if (cell.M == b.M[i] && cell.m_fb == b.m_fb[k])
          g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k) + 1) = cell.median_solve_time;
  }
  return g;
}

void write_bench(const Writer& w, const std::vector<dvrft::gripper::TimingCell>& cells,
                 const dvrft::gripper::BenchmarkConfig& b) {
  std::vector<std::string> header{"M"};
  for (int m : b.m_fb) header.push_back("m_fb_" + std::to_string(m));
  w.table("timing_table", timing_grid(cells, b), header);
  Eigen::MatrixXd longform(static_cast<Eigen::Index>(cells.size()), 5);
  json statuses = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    longform.row(static_cast<Eigen::Index>(i)) << c.M, c.m_fb, static_cast<double>(c.rows), c.assembly_time,
        c.median_solve_time;
    statuses.push_back({{"M", c.M}, {"m_fb", c.m_fb}, {"status", c.status}});
  }
  w.table("timing_cells", longform, {"M", "m_fb", "rows", "assembly_s", "median_solve_s"});
  json slopes = json::object();
  for (int M : b.M) slopes[std::to_string(M)] = dvrft::gripper::loglog_slope(cells, M);
  w.json_file("timing_summary", {{"loglog_slope_by_M", slopes}, {"cells", statuses}});
}

int cmd_bench(const Common& c) {
  std::string raw;
  dvrft::gripper::BenchmarkConfig b;
  int samples = 10000;
  if (!c.config.empty()) {
    raw = read_text(c.config);
    const json j = parse_json_file(c.config);
    b = bench_config_from_json(j);
    samples = j.value("samples", samples);
  }
  const std::uint64_t seed = c.seed.value_or(1);
  const dvrft::gripper::Params params;
  const auto plant = dvrft::gripper::discrete_plant(params);
  dvrft::gripper::ExcitationConfig ex;
  ex.samples = samples;
  ex.seed = seed;
  const auto data = dvrft::gripper::run_open_loop_experiment(plant, ex);
  const auto cells = dvrft::gripper::scaling_benchmark(data, dvrft::gripper::reference_models(params.ts), b);
  Writer w(c.out, provenance("bench", raw, seed), c.format);
  write_bench(w, cells, b);
  for (const auto& cell : cells)
    std::cout << "bench: M " << cell.M << " m_fb " << cell.m_fb << " median " << cell.median_solve_time << " s ("
              << cell.status << ")\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// demo-gripper
// ---------------------------------------------------------------------------

int cmd_demo(const Common& c, bool with_bench) {
  using namespace dvrft::gripper;
  const std::uint64_t seed = c.seed.value_or(1);
  const Params params;
  const Plant plant = discrete_plant(params);
  const auto models = reference_models(params.ts);
  ExcitationConfig ex;
  ex.seed = seed;
  NoiseConfig noise;
  noise.seed = seed + 1;
  const Dataset clean = run_open_loop_experiment(plant, ex);
  const Dataset noisy = run_open_loop_experiment(plant, ex, noise);
  const dvrft::PlantIndices idx = scan_plant_indices(plant);
  BaselineSettings settings;
  settings.spec = default_case_a_spec(idx);

  Writer w(c.out, provenance("demo-gripper", {}, seed), c.format);
  for (const auto& [name, ds] : {std::pair{"clean", &clean}, std::pair{"noisy", &noisy}}) {
    w.signal(std::string("data_") + name + "_u", ds->u);
    w.signal(std::string("data_") + name + "_d", ds->d);
    w.signal(std::string("data_") + name + "_y_pos", ds->y_pos);
    w.signal(std::string("data_") + name + "_y_vel", ds->y_vel);
  }
  w.json_file("plant", {{"continuous", dvrft::io::to_json(build_plant(params).combined)},
                        {"discrete", dvrft::io::to_json(plant.combined)},
                        {"indices", {{"nu", idx.nu}, {"rho", idx.rho}, {"gain", idx.gain}}},
                        {"snr_position_db", snr_db(clean.y_pos.view(), noisy.y_pos.view())},
                        {"snr_velocity_db", snr_db(clean.y_vel.view(), noisy.y_vel.view())}});

  const Baselines b = synthesize_baselines(clean, noisy, models, settings);
  json summary = json::object();
  summary["spec"] = dvrft::io::to_json(settings.spec);
  bool certified = true;
  auto emit = [&](const Baseline& base, bool certify) {
    json cj = dvrft::io::to_json(base.controller);
    cj["objective"] = base.objective;
    w.json_file("controller_" + base.name, cj);
    const auto rep = evaluate_closed_loop(plant, base.controller, models);
    write_closed_loop(w, base.name, rep);
    json s = closed_loop_summary(rep);
    s["objective"] = base.objective;
    if (base.solution) s["solver"] = {{"status", to_string(base.solution->status)}, {"kkt", base.solution->kkt.max()}};
    if (certify) {
      const auto cert = dvrft::certify_nyquist(base.controller, settings.spec, 10 * settings.spec.M);
      w.json_file("certificate_" + base.name, dvrft::io::to_json(cert));
      s["certificate_pass"] = cert.pass;
      certified = certified && cert.pass;
    }
    summary[base.name] = s;
    std::cout << "demo: " << base.name << " objective " << base.objective << ", spectral radius "
              << rep.spectral_radius << " (" << to_string(rep.stability) << "), r->y mismatch " << rep.mismatch_r_db
              << " dB\n";
  };
  emit(b.pd, false);
  emit(b.fir_unconstrained, false);
  emit(b.fir_constrained_clean, true);
  emit(*b.fir_constrained_noisy, true);
  emit(b.paper_pd, false);
  const auto open = evaluate_closed_loop(plant, open_loop_controller(params.ts), models);
  write_closed_loop(w, "open_loop", open);
  w.json_file("summary", summary);

  if (with_bench) {
    const BenchmarkConfig bc;
    write_bench(w, scaling_benchmark(clean, models, bc), bc);
  }
  return certified ? exit_ok : exit_uncertified;
}

void add_common(CLI::App* sub, Common& c, bool config) {
  if (config) sub->add_option("--config", c.config, "JSON configuration file");
  sub->add_option("--seed", c.seed, "random seed (recorded in the provenance)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--format", c.format, "tabular output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dvrft: data-driven controller synthesis with dissipativity constraints"};
  app.set_version_flag("--version", std::string(dvrft::version));
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "fit and certify a controller from a configuration");
  add_common(synth, common, true);

  std::string controller_path, spec_path, plant_path;
  int grid = 0;
  auto* verify = app.add_subcommand("verify", "certify a controller against a dissipativity spec");
  add_common(verify, common, false);
  verify->add_option("--controller", controller_path, "controller JSON")->required();
  verify->add_option("--spec", spec_path, "spec JSON")->required();
  verify->add_option("--grid", grid, "dense frequency grid size (default max(10 M, 5000))");

  auto* simulate = app.add_subcommand("simulate", "closed-loop or open-loop gripper simulation");
  add_common(simulate, common, true);
  simulate->add_option("--controller", controller_path, "controller JSON (omit for open loop)");
  simulate->add_option("--plant", plant_path, "discrete state-space JSON with inputs (u, d)");

  auto* bench = app.add_subcommand("bench", "solver timing over the m_fb x M grid");
  add_common(bench, common, true);

  bool with_bench = false;
  auto* demo = app.add_subcommand("demo-gripper", "full gripper study artifact bundle");
  add_common(demo, common, false);
  demo->add_flag("--with-bench", with_bench, "also run the timing grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*verify) return cmd_verify(common, controller_path, spec_path, grid);
    if (*simulate) return cmd_simulate(common, controller_path, plant_path);
    if (*bench) return cmd_bench(common);
    if (*demo) return cmd_demo(common, with_bench);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const dvrft::PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const dvrft::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const dvrft::DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const dvrft::EmptyBoxError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_internal;
  }
  return exit_internal;
}
