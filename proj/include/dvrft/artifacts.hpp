#pragma once

/// @file
/// JSON and CSV forms of controllers, specs, certificates and solutions.

#include <cstdint>
#include <ostream>
#include <string>

#include "dvrft/cls.hpp"
#include "dvrft/dissipativity.hpp"
#include "dvrft/io.hpp"
#include "dvrft/vrft.hpp"

namespace dvrft::io {

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline json to_json(const TwoDofController& c) {
  json j{{"type", "ifir_controller"},
         {"gamma", c.gamma()},
         {"g_fb", c.g_fb()},
         {"g_ff", c.g_ff()},
         {"ts", c.ts()}};
  if (c.envelope()) j["envelope"] = {{"h0", c.envelope()->h0}, {"h", c.envelope()->h}};
  return j;
}

inline void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw PreconditionError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw PreconditionError(where + ": unknown key '" + key + "'");
  }
}

inline TwoDofController controller_from_json(const json& j) {
  require_keys(j, {"type", "gamma", "g_fb", "g_ff", "ts", "envelope"}, "controller");
  if (j.contains("type") && j.at("type") != "ifir_controller")
    throw PreconditionError("controller: type must be ifir_controller");
  std::optional<DecayEnvelope> env;
  if (j.contains("envelope")) {
    require_keys(j.at("envelope"), {"h0", "h"}, "controller.envelope");
    env = DecayEnvelope{j.at("envelope").at("h0").get<double>(), j.at("envelope").at("h").get<double>()};
  }
  return {j.value("gamma", 0.0), j.at("g_fb").get<std::vector<double>>(),
          j.value("g_ff", std::vector<double>{}), j.at("ts").get<double>(), env};
}

inline json to_json(const DissipativitySpec& s) {
  json j{{"case", to_string(s.kase)}, {"nu1", s.nu1},   {"rho1", s.rho1}, {"alpha1", s.alpha1},
         {"eps1", s.eps1},            {"eps2", s.eps2}, {"eps3", s.eps3}, {"M", s.M},
         {"h0", s.h0},                {"h", s.h},       {"delta_strict", s.delta_strict}};
  if (s.epsilon_override) j["epsilon_override"] = *s.epsilon_override;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline DissipativitySpec spec_from_json(const json& j) {
  require_keys(j,
               {"case", "nu1", "rho1", "alpha1", "eps1", "eps2", "eps3", "M", "h0", "h", "epsilon_override",
                "delta_strict"},
               "spec");
  DissipativitySpec s;
  s.kase = parse_case(j.at("case").get<std::string>());
  s.nu1 = j.value("nu1", s.nu1);
  s.rho1 = j.value("rho1", s.rho1);
  s.alpha1 = j.value("alpha1", s.alpha1);
  s.eps1 = j.value("eps1", s.eps1);
  s.eps2 = j.value("eps2", s.eps2);
  s.eps3 = j.value("eps3", s.eps3);
  s.M = j.value("M", s.M);
  s.h0 = j.value("h0", s.h0);
  s.h = j.value("h", s.h);
  s.delta_strict = j.value("delta_strict", s.delta_strict);
  if (j.contains("epsilon_override")) s.epsilon_override = j.at("epsilon_override").get<double>();
  return s;
}

inline json to_json(const CertificateReport& r) {
  return {{"type", "certificate"},       {"case", to_string(r.kase)},
          {"pass", r.pass},              {"worst_margin", r.worst_margin},
          {"worst_theta", r.worst_theta}, {"grid_size", r.grid_size},
          {"message", r.message}};
}

inline json to_json(const cls::KktResiduals& k) {
  return {{"stationarity", k.stationarity},
          {"primal_feasibility", k.primal_feasibility},
          {"dual_feasibility", k.dual_feasibility},
          {"complementarity", k.complementarity}};
}

inline json to_json(const cls::Solution& s) {
  json j{{"status", to_string(s.status)},
         {"objective", s.objective},
         {"iterations", s.iterations},
         {"wall_time", s.wall_time},
         {"regularization", s.regularization},
         {"backend", s.backend},
         {"message", s.message},
         {"kkt", to_json(s.kkt)},
         {"x", to_vector(s.x)}};
  if (s.infeasibility)
    j["infeasibility"] = {{"violation", s.infeasibility->violation},
                          {"max_violation", s.infeasibility->max_violation},
                          {"witness", to_vector(s.infeasibility->witness)},
                          {"farkas", to_vector(s.infeasibility->farkas)}};
  return j;
}

/// Regression metadata as JSON; the matrix itself goes to CSV.
inline json to_json(const RegressionProblem& p) {
  return {{"objective", to_string(p.objective)},
          {"rows", p.rows()},
          {"columns", p.layout.column_names()},
          {"first_sample", p.first_sample},
          {"ts", p.ts}};
}

/// Columns are the parameter names followed by "target".
inline void write_regression_csv(std::ostream& out, const RegressionProblem& p) {
  Eigen::MatrixXd m(p.phi.rows(), p.phi.cols() + 1);
  m << p.phi, p.target;
  auto header = p.layout.column_names();
  header.emplace_back("target");
  write_matrix_csv(out, m, header);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::string command;

  json to_json() const {
    return {{"config_hash", config_hash}, {"seed", seed}, {"version", version}, {"command", command}};
  }
  /// Comment lines for CSV outputs.
  void write_csv_header(std::ostream& out) const {
    out << "# command=" << command << " config_hash=" << config_hash << " seed=" << seed << " version=" << version
        << '\n';
  }
};

}  // namespace dvrft::io
