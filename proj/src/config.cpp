#include "qforecast/config.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"

namespace qf {

namespace {

using nlohmann::json;

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

BasisKind basis_from_string(const std::string& s) {
  if (s == "A") return BasisKind::A;
  if (s == "B") return BasisKind::B;
  if (s == "C") return BasisKind::C;
  throw ParameterError("unknown LKFFB basis '" + s + "'");
}

const char* basis_name(BasisKind k) {
  switch (k) {
    case BasisKind::A: return "A";
    case BasisKind::B: return "B";
    case BasisKind::C: return "C";
  }
  return "?";
}

Range range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParameterError("bounds entries must be [lo, hi]");
  return Range{j[0].get<double>(), j[1].get<double>()};
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

const char* to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::LSF: return "LSF";
    case AlgorithmKind::AKF: return "AKF";
    case AlgorithmKind::LKFFB: return "LKFFB";
    case AlgorithmKind::QKF: return "QKF";
    case AlgorithmKind::GPR: return "GPR";
  }
  return "?";
}

AlgorithmKind algorithm_kind_from_string(const std::string& name) {
  if (name == "LSF") return AlgorithmKind::LSF;
  if (name == "AKF") return AlgorithmKind::AKF;
  if (name == "LKFFB") return AlgorithmKind::LKFFB;
  if (name == "QKF") return AlgorithmKind::QKF;
  if (name == "GPR") return AlgorithmKind::GPR;
  throw ParameterError("unknown algorithm '" + name + "'");
}

void to_json(json& j, const AlgorithmConfig& a) {
  j = json{{"type", to_string(a.kind)}, {"label", a.label}};
  switch (a.kind) {
    case AlgorithmKind::LSF:
    case AlgorithmKind::AKF:
      j["q"] = a.q;
      break;
    case AlgorithmKind::QKF:
      j["q"] = a.q;
      j["perfect_model"] = a.perfect_model;
      j["truth_std_rad"] = a.truth_std_rad;
      j["expected_residual"] = a.expected_residual;
      break;
    case AlgorithmKind::LKFFB:
      j["basis"] = basis_name(a.basis);
      j["basis_f0_hz"] = a.basis_f0_hz;
      j["basis_num_osc"] = a.basis_num_osc;
      j["basis_include_zero"] = a.basis_include_zero;
      break;
    case AlgorithmKind::GPR:
      j["kernel"] = a.kernel;
      if (a.kappa) j["kappa"] = *a.kappa;
      if (a.gpr_R) j["R"] = *a.gpr_R;
      j["optimize"] = a.optimize;
      j["num_starts"] = a.num_starts;
      j["test_steps"] = a.gpr_test_steps;
      j["bounds"] = json{{"sigma2", {a.bounds.sigma2.lo, a.bounds.sigma2.hi}},
                         {"length_scale", {a.bounds.length_scale.lo, a.bounds.length_scale.hi}},
                         {"f0_hz", {a.bounds.f0_hz.lo, a.bounds.f0_hz.hi}},
                         {"extra", {a.bounds.extra.lo, a.bounds.extra.hi}},
                         {"R", {a.bounds.R.lo, a.bounds.R.hi}}};
      break;
  }
}

void from_json(const json& j, AlgorithmConfig& a) {
  io::reject_unknown_keys(j,
                          {"type", "label", "q", "basis", "basis_f0_hz", "basis_num_osc",
                           "basis_include_zero", "perfect_model", "truth_std_rad",
                           "expected_residual", "kernel", "kappa", "R", "optimize", "bounds",
                           "num_starts", "test_steps"},
                          "algorithm");
  a.kind = algorithm_kind_from_string(j.at("type").get<std::string>());
  a.label = j.value("label", std::string(to_string(a.kind)));
  if (a.label.empty()) a.label = to_string(a.kind);
  read_opt(j, "q", a.q);
  if (j.contains("basis")) a.basis = basis_from_string(j.at("basis").get<std::string>());
  read_opt(j, "basis_f0_hz", a.basis_f0_hz);
  read_opt(j, "basis_num_osc", a.basis_num_osc);
  read_opt(j, "basis_include_zero", a.basis_include_zero);
  read_opt(j, "perfect_model", a.perfect_model);
  read_opt(j, "truth_std_rad", a.truth_std_rad);
  read_opt(j, "expected_residual", a.expected_residual);
  if (j.contains("kernel")) a.kernel = j.at("kernel").get<KernelSpec>();
  if (j.contains("kappa")) a.kappa = j.at("kappa").get<double>();
  if (j.contains("R")) a.gpr_R = j.at("R").get<double>();
  read_opt(j, "optimize", a.optimize);
  read_opt(j, "num_starts", a.num_starts);
  read_opt(j, "test_steps", a.gpr_test_steps);
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    io::reject_unknown_keys(b, {"sigma2", "length_scale", "f0_hz", "extra", "R"}, "bounds");
    if (b.contains("sigma2")) a.bounds.sigma2 = range_from_json(b.at("sigma2"));
    if (b.contains("length_scale")) a.bounds.length_scale = range_from_json(b.at("length_scale"));
    if (b.contains("f0_hz")) a.bounds.f0_hz = range_from_json(b.at("f0_hz"));
    if (b.contains("extra")) a.bounds.extra = range_from_json(b.at("extra"));
    if (b.contains("R")) a.bounds.R = range_from_json(b.at("R"));
  }
}

void to_json(json& j, const ExperimentConfig& c) {
  json algs = json::array();
  for (const auto& a : c.algorithms) algs.push_back(a);
  j = json{{"schema_version", c.schema_version},
           {"name", c.name},
           {"figure", c.figure},
           {"deviations", c.deviations},
           {"noise", c.noise},
           {"measurement", {{"noise_level", c.measurement.noise_level}, {"tau_info", c.measurement.tau_info}}},
           {"algorithms", algs},
           {"tuning",
            {{"K", c.tuning.K},
             {"n_L", c.tuning.n_L},
             {"decade_range", c.tuning.decade_range},
             {"horizon_threshold", c.tuning.horizon_threshold},
             {"freeze_gain", c.tuning.freeze_gain}}},
           {"ensemble", c.ensemble},
           {"master_seed", c.master_seed}};
  if (c.sweep) j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
}

void from_json(const json& j, ExperimentConfig& c) {
  io::reject_unknown_keys(j,
                          {"schema_version", "name", "figure", "deviations", "noise", "measurement",
                           "algorithms", "tuning", "ensemble", "master_seed", "sweep"},
                          "config");
  try {
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != 1) throw ParameterError("config: unsupported schema_version");
    read_opt(j, "name", c.name);
    read_opt(j, "figure", c.figure);
    read_opt(j, "deviations", c.deviations);
    c.noise = j.at("noise").get<NoiseSpec>();
    if (j.contains("measurement")) {
      const json& m = j.at("measurement");
      io::reject_unknown_keys(m, {"noise_level", "tau_info"}, "measurement");
      read_opt(m, "noise_level", c.measurement.noise_level);
      read_opt(m, "tau_info", c.measurement.tau_info);
    }
    c.algorithms.clear();
    for (const json& a : j.at("algorithms")) c.algorithms.push_back(a.get<AlgorithmConfig>());
    if (j.contains("tuning")) {
      const json& t = j.at("tuning");
      io::reject_unknown_keys(t, {"K", "n_L", "decade_range", "horizon_threshold", "freeze_gain"},
                              "tuning");
      read_opt(t, "K", c.tuning.K);
      read_opt(t, "n_L", c.tuning.n_L);
      read_opt(t, "decade_range", c.tuning.decade_range);
      read_opt(t, "horizon_threshold", c.tuning.horizon_threshold);
      read_opt(t, "freeze_gain", c.tuning.freeze_gain);
    }
    read_opt(j, "ensemble", c.ensemble);
    read_opt(j, "master_seed", c.master_seed);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      io::reject_unknown_keys(s, {"parameter", "values"}, "sweep");
      c.sweep = SweepConfig{s.at("parameter").get<std::string>(),
                            s.at("values").get<std::vector<double>>()};
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> warnings;
  noise.validate();
  measurement.validate();
  if (algorithms.empty()) throw ParameterError("config: no algorithms");
  if (ensemble < 2) throw ParameterError("config: ensemble must be >= 2");
  if (tuning.K < 10) throw ParameterError("config: tuning.K must be >= 10");
  if (tuning.n_L < 1 || tuning.n_L > std::min(noise.num_train, noise.num_predict + 1)) {
    throw ParameterError("config: tuning.n_L must lie in [1, min(N_T, N_P + 1)]");
  }
  if (!(tuning.horizon_threshold > 0.0)) throw ParameterError("config: horizon_threshold must be > 0");
  for (const auto& a : algorithms) {
    if (a.kind == AlgorithmKind::LSF || a.kind == AlgorithmKind::AKF || a.kind == AlgorithmKind::QKF) {
      if (a.q < 1) throw ParameterError("config: q must be >= 1");
      const double qdt = a.q * noise.dt;
      const double qn = static_cast<double>(a.q) / noise.num_train;
      if (std::abs(qdt - 0.1) > 1e-9 || std::abs(qn - 0.05) > 1e-9) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: q dt = %g (default 0.1), q / N_T = %g (default 0.05)",
                      a.label.c_str(), qdt, qn);
        warnings.emplace_back(buf);
      }
    }
    if (a.kind == AlgorithmKind::LKFFB && a.basis_num_osc < 1) {
      throw ParameterError("config: basis_num_osc must be >= 1");
    }
    if (a.kind == AlgorithmKind::GPR) {
      a.kernel.validate();
      a.bounds.validate();
    }
  }
  if (sweep) {
    static const std::set<std::string> allowed{"num_components", "noise_level", "omega0_hz", "alpha",
                                               "kappa"};
    if (!allowed.contains(sweep->parameter)) {
      throw ParameterError("config: cannot sweep '" + sweep->parameter + "'");
    }
    if (sweep->values.empty()) throw ParameterError("config: sweep has no values");
  }
  return warnings;
}

const AlgorithmConfig* ExperimentConfig::find(AlgorithmKind kind) const {
  for (const auto& a : algorithms) {
    if (a.kind == kind) return &a;
  }
  return nullptr;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const json j = io::read_json_file(path);
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config) {
  if (!config.sweep) return {config};
  std::vector<ExperimentConfig> out;
  for (double v : config.sweep->values) {
    ExperimentConfig c = config;
    c.sweep.reset();
    const std::string& p = config.sweep->parameter;
    if (p == "num_components") c.noise.num_components = static_cast<int>(std::lround(v));
    else if (p == "noise_level") c.measurement.noise_level = v;
    else if (p == "omega0_hz") c.noise.omega0_hz = v;
    else if (p == "alpha") c.noise.alpha = v;
    else if (p == "kappa") {
      for (auto& a : c.algorithms) {
        if (a.kind == AlgorithmKind::GPR) a.kappa = v;
      }
    }
    c.name = config.name + "__" + p + "_" + format_value(v);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace qf
