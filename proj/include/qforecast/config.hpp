#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qforecast/gpr.hpp"
#include "qforecast/lkffb.hpp"
#include "qforecast/measurement.hpp"
#include "qforecast/noise_synth.hpp"

namespace qf {

enum class AlgorithmKind { LSF, AKF, LKFFB, QKF, GPR };

const char* to_string(AlgorithmKind kind);
AlgorithmKind algorithm_kind_from_string(const std::string& name);

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::AKF;
  std::string label;  // output directory; defaults to the algorithm name

  // LSF / AKF / QKF
  int q = 100;

  // LKFFB
  BasisKind basis = BasisKind::A;
  double basis_f0_hz = 0.0;  // 0: Fourier resolution 1/(N_T dt)
  int basis_num_osc = 100;
  bool basis_include_zero = false;

  // QKF
  bool perfect_model = false;    // known AR truth and (σ², R); no tuning
  double truth_std_rad = 2.0;    // standard deviation of the AR truth
  bool expected_residual = false;

  // GPR
  KernelSpec kernel;
  std::optional<double> kappa;   // overrides kernel.f0_hz when set
  std::optional<double> gpr_R;   // default: the record's derived R
  bool optimize = false;
  HyperBounds bounds;
  int num_starts = 8;
  int gpr_test_steps = -1;       // default N_P + 1 (n = 0..N_P)
};

struct TuningConfig {
  int K = 40;
  int n_L = 50;
  double decade_range = 5.0;
  double horizon_threshold = 1.0;
  bool freeze_gain = true;
};

struct SweepConfig {
  std::string parameter;  // num_components | noise_level | omega0_hz | alpha | kappa
  std::vector<double> values;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string name = "experiment";
  std::string figure;
  std::string deviations;
  NoiseSpec noise;
  MeasurementSpec measurement;
  std::vector<AlgorithmConfig> algorithms;
  TuningConfig tuning;
  int ensemble = 20;
  std::uint64_t master_seed = 0;
  std::optional<SweepConfig> sweep;

  // Throws ParameterError; returns advisory warnings.
  std::vector<std::string> validate() const;
  const AlgorithmConfig* find(AlgorithmKind kind) const;
};

void to_json(nlohmann::json& j, const AlgorithmConfig& a);
void from_json(const nlohmann::json& j, AlgorithmConfig& a);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);

// One concrete config per sweep value (or the config itself), names suffixed
// with the parameter and value.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config);

}  // namespace qf
