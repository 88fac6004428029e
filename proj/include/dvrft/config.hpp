#pragma once

/// @file
/// Synthesis configuration: JSON schema, validation and data loading.
///
/// ```json
/// {
///   "objective": "2dof_filtered",
///   "data": {"u": "u.csv", "y": "y_pos.csv", "d": "d.csv", "y_fb": "y_vel.csv"},
///   "reference_model": {"domain": "continuous", "num": [150], "den": [1, 25, 150]},
///   "discretization": "zoh",
///   "disturbance_model": {"domain": "continuous", "num": [1000], "den": [1, 45, 500, 1500]},
///   "m_fb": 50, "m_ff": 50, "integrator": "free",
///   "spec": {"case": "A", "nu1": -0.495154, "rho1": 0.00405425, "M": 2000, "h": 0.8},
///   "h0_from_fit": false, "h0_scale": 10,
///   "certify_grid": 20000,
///   "solver": {"backend": "active_set", "tol_feas": 1e-8, "tol_kkt": 1e-8,
///              "max_iter": 20000, "eliminate_equalities": true},
///   "seed": 1
/// }
/// ```
/// Data paths are relative to the config file. Continuous models are
/// discretized at the data sample period ("zoh" or "bilinear"). Unknown keys are errors. When the
/// spec gives no h0, h0_from_fit defaults to true.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "dvrft/artifacts.hpp"
#include "dvrft/synthesis.hpp"

namespace dvrft {

using io::json;

struct DataPaths {
  std::string u, y;
  std::optional<std::string> d, y_fb;
};

struct SynthesisConfig {
  Objective objective = Objective::two_dof_filtered;
  DataPaths data;
  TransferFunction reference_model = TransferFunction::gain(1.0, Domain::continuous);
  std::optional<TransferFunction> disturbance_model;
  DiscretizationRule discretization = DiscretizationRule::zoh;
  RegressionSizes sizes{50, 50};
  IntegratorMode integrator = IntegratorMode::free;
  std::optional<DissipativitySpec> spec;
  bool h0_from_fit = false;
  double h0_scale = 10.0;
  int certify_grid = 0;  ///< 0 selects max(10 M, 5000)
  cls::Options solver = SynthesisRequest::default_solver();
  std::uint64_t seed = 1;
  std::filesystem::path base_dir;

  int certification_grid() const {
    if (certify_grid > 0) return certify_grid;
    return spec ? std::max(10 * spec->M, 5000) : 5000;
  }

  SynthesisRequest request() const {
    SynthesisRequest r;
    r.objective = objective;
    r.sizes = sizes;
    r.integrator = integrator;
    r.spec = spec;
    r.h0_from_fit = h0_from_fit;
    r.h0_scale = h0_scale;
    r.solver = solver;
    return r;
  }
};

inline cls::Options solver_options_from_json(const json& j) {
  io::require_keys(j,
                   {"backend", "tol_feas", "tol_kkt", "max_iter", "eliminate_equalities", "admm_alpha", "admm_sigma",
                    "admm_rho", "admm_eps", "polish_iter"},
                   "solver");
  cls::Options o = SynthesisRequest::default_solver();
  if (j.contains("backend")) o.backend = cls::parse_backend(j.at("backend").get<std::string>());
  o.tol_feas = j.value("tol_feas", o.tol_feas);
  o.tol_kkt = j.value("tol_kkt", o.tol_kkt);
  o.max_iter = j.value("max_iter", o.max_iter);
  o.eliminate_equalities = j.value("eliminate_equalities", o.eliminate_equalities);
  o.admm_alpha = j.value("admm_alpha", o.admm_alpha);
  o.admm_sigma = j.value("admm_sigma", o.admm_sigma);
  o.admm_rho = j.value("admm_rho", o.admm_rho);
  o.admm_eps = j.value("admm_eps", o.admm_eps);
  o.polish_iter = j.value("polish_iter", o.polish_iter);
  if (!(o.tol_feas > 0.0 && o.tol_kkt > 0.0)) throw PreconditionError("solver: tolerances must be positive");
  if (o.max_iter < 1) throw PreconditionError("solver: max_iter must be positive");
  return o;
}

/// Throws PreconditionError (or DomainError from the spec) on any schema
/// or consistency problem.
inline SynthesisConfig parse_synthesis_config(const json& j, const std::filesystem::path& base_dir = {}) {
  io::require_keys(j,
                   {"objective", "data", "reference_model", "disturbance_model", "discretization", "m_fb", "m_ff", "integrator", "spec",
                    "h0_from_fit", "h0_scale", "certify_grid", "solver", "seed"},
                   "config");
  try {
    SynthesisConfig c;
    c.base_dir = base_dir;
    if (j.contains("objective")) c.objective = parse_objective(j.at("objective").get<std::string>());

    const json& data = j.at("data");
    io::require_keys(data, {"u", "y", "d", "y_fb"}, "data");
    c.data.u = data.at("u").get<std::string>();
    c.data.y = data.at("y").get<std::string>();
    if (data.contains("d")) c.data.d = data.at("d").get<std::string>();
    if (data.contains("y_fb")) c.data.y_fb = data.at("y_fb").get<std::string>();

    auto tf = [](const json& m, const std::string& where) {
      io::require_keys(m, {"type", "domain", "num", "den", "ts"}, where);
      return io::transfer_function_from_json(m);
    };
    c.reference_model = tf(j.at("reference_model"), "reference_model");
    if (j.contains("disturbance_model")) c.disturbance_model = tf(j.at("disturbance_model"), "disturbance_model");

    if (j.contains("discretization")) {
      const auto rule = j.at("discretization").get<std::string>();
      if (rule == "bilinear") c.discretization = DiscretizationRule::bilinear;
      else if (rule != "zoh") throw PreconditionError("config: unknown discretization '" + rule + "'");
    }
    c.sizes.m_fb = j.value("m_fb", c.sizes.m_fb);
    c.sizes.m_ff = j.value("m_ff", c.sizes.m_ff);
    if (c.sizes.m_fb < 1) throw PreconditionError("config: m_fb must be at least 1");
    if (c.sizes.m_ff < 0) throw PreconditionError("config: m_ff must be non-negative");
    if (j.contains("integrator")) c.integrator = parse_integrator(j.at("integrator").get<std::string>());
    if (j.contains("spec")) {
      c.spec = io::spec_from_json(j.at("spec"));
      c.spec->validate();
    }
    // Without an explicit envelope scale, h0 = h0_scale * max|g_fb| of the unconstrained fit.
    c.h0_from_fit = j.value("h0_from_fit", c.spec.has_value() && !j.at("spec").contains("h0"));
    c.h0_scale = j.value("h0_scale", c.h0_scale);
    if (!(c.h0_scale > 0.0)) throw PreconditionError("config: h0_scale must be positive");
    c.certify_grid = j.value("certify_grid", c.certify_grid);
    if (c.spec && c.certify_grid > 0 && c.certify_grid < 10 * c.spec->M)
      throw PreconditionError("config: certify_grid must be at least 10 M");
    if (j.contains("solver")) c.solver = solver_options_from_json(j.at("solver"));
    c.seed = j.value("seed", c.seed);

    const bool two_dof = c.objective == Objective::two_dof || c.objective == Objective::two_dof_filtered;
    const bool needs_d = c.objective != Objective::one_dof;
    if (needs_d && !c.data.d) throw PreconditionError("config: objective " + std::string(to_string(c.objective)) +
                                                      " needs data.d");
    if (needs_d && !c.disturbance_model)
      throw PreconditionError("config: objective " + std::string(to_string(c.objective)) +
                              " needs disturbance_model");
    if (two_dof && c.sizes.m_ff < 1) throw PreconditionError("config: 2DOF objectives need m_ff >= 1");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
}

inline SynthesisConfig load_synthesis_config(const std::filesystem::path& path, std::string* raw = nullptr) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw) *raw = text;
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError("config " + path.string() + ": " + e.what());
  }
  return parse_synthesis_config(j, path.parent_path());
}

/// Reads the data files and discretizes continuous models at the data period.
inline std::pair<ExperimentData, ReferenceModels> load_experiment(const SynthesisConfig& c) {
  auto read = [&](const std::string& rel) { return io::read_signal_csv((c.base_dir / rel).string()); };
  ExperimentData data{read(c.data.u), read(c.data.y), std::nullopt, std::nullopt};
  if (c.data.d) data.d = read(*c.data.d);
  if (c.data.y_fb) data.y_fb = read(*c.data.y_fb);
  const double ts = data.u.ts();
  auto discrete = [&](const TransferFunction& tf) {
    return tf.domain() == Domain::continuous ? discretize(tf, ts, c.discretization) : tf;
  };
  ReferenceModels models{discrete(c.reference_model), std::nullopt};
  if (c.disturbance_model) models.md = discrete(*c.disturbance_model);
  return {std::move(data), std::move(models)};
}

}  // namespace dvrft
