#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qforecast/ar_models.hpp"
#include "qforecast/config.hpp"
#include "qforecast/lkffb.hpp"
#include "qforecast/measurement.hpp"
#include "qforecast/noise_synth.hpp"
#include "qforecast/qkf.hpp"
#include "qforecast/risk.hpp"

namespace qf {

// One ensemble member: truth, its linear record, and LSF fits keyed by q.
struct Member {
  std::uint64_t index = 0;
  TruthRealisation truth;
  LinearRecord linear;
  std::map<int, LsfModel> lsf;
};

// Index offsets separate the tuning ensemble from the evaluation ensemble.
inline constexpr std::uint64_t kEvaluationOffset = 0;
inline constexpr std::uint64_t kTuningOffset = 1ULL << 32;

Member make_member(const ExperimentConfig& config, std::uint64_t index);
std::vector<Member> make_ensemble(const ExperimentConfig& config, std::uint64_t offset, int count,
                                  int threads);

// Lag orders needed by the configured LSF/AKF/QKF entries.
void fit_lsf(Member& member, int q, int max_horizon);

// Estimates of one run: state estimates at n = -n_L..-1 and forecasts at
// n = 0..horizon-1, in the space the risk is measured in.
struct RunOutput {
  std::vector<double> state;
  std::vector<double> forecast;
  std::vector<double> state_truth;
  std::vector<double> forecast_truth;
};

// Data prepared for the QKF perfect-model scenario: AR truth f' and its bits.
struct QkfMember {
  TruthRealisation truth;  // f'
  BinaryRecord bits;
  ArCoefficients coeffs;
  double sigma2 = 0.0;  // true process noise of f'
  double R = 0.0;       // bit residual variance under the perfect model, else bias noise
  std::uint64_t quantizer_seed = 0;
};

QkfMember make_qkf_member(const ExperimentConfig& config, const AlgorithmConfig& algo,
                          const Member& base);

// Algorithm runners. `horizon` forecasts cover n = 0..horizon-1.
RunOutput run_akf_member(const Member& m, int q, double sigma2, double R, int n_L, int horizon,
                         bool freeze);
RunOutput run_lkffb_member(const Member& m, const LkffbBasis& basis, double sigma2, double R,
                           int n_L, int horizon, Vec* final_state = nullptr);
RunOutput run_lsf_member(const Member& m, int q, int horizon);
RunOutput run_qkf_member(const QkfMember& m, const QkfModel& model, int n_L, int horizon);

LkffbBasis basis_for(const ExperimentConfig& config, const AlgorithmConfig& algo);

struct SpectrumReport {
  std::vector<double> omega_rad_per_s;
  std::vector<double> s_true;
  std::vector<double> s_akf;    // empty without AKF
  std::vector<double> s_lkffb;  // empty without LKFFB
};

// Index of the grid point just before the largest windowed drop of log S.
int cutoff_index(const std::vector<double>& spectrum, int window = 3);

struct AlgorithmResult {
  std::string label;
  AlgorithmKind kind = AlgorithmKind::AKF;
  RiskCurve risk;
  int horizon = 0;
  std::optional<TuningResult> tuning;
  int failed_members = 0;
  std::vector<std::string> warnings;
  double seconds = 0.0;
  double clamp_fraction = 0.0;  // QKF data generator
  // First evaluation member, for traces.
  std::vector<double> example_truth;
  std::vector<double> example_prediction;
  std::vector<double> example_variance;  // GPR only
  // Spectral pieces.
  std::vector<double> lkffb_power;       // mean |x_j|² over members
  std::vector<ArCoefficients> ar_coeffs; // per evaluation member
  LkffbExtraction example_extraction;
};

struct ExperimentResult {
  std::string name;
  std::vector<AlgorithmResult> algorithms;
  std::optional<SpectrumReport> spectrum;
  std::vector<std::string> warnings;

  const AlgorithmResult* find(const std::string& label) const;
};

struct RunOptions {
  int threads = 1;
  bool verbose = false;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

std::optional<SpectrumReport> spectral_report(const ExperimentConfig& config,
                                              const ExperimentResult& result);

// Writes <out>/<config.name>/... and returns the directory.
std::filesystem::path write_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                                    const std::filesystem::path& out_dir);

void write_spectrum_csv(std::ostream& os, const SpectrumReport& report);

}  // namespace qf
