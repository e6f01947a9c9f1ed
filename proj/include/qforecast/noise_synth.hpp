#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace qf {

// Parameters of the engineered dephasing process
//   f_n = alpha * omega0 * sum_j j F(j) cos(omega_j n dt + psi_j),  F(j) = j^(eta/2 - 1)
// with omega_j = 2 pi omega0_hz j. Frequencies are stored in Hz.
struct NoiseSpec {
  double alpha = 1.0;
  double omega0_hz = 1.0;
  int num_components = 1;
  double eta = 0.0;
  double dt = 1e-3;
  int num_train = 2000;
  int num_predict = 50;
  double mean = 0.0;

  void validate() const;
  // Amplitude alpha * omega0 * j F(j) of component j (1-based), in rad.
  double amplitude(int j) const;
  double cutoff_hz() const { return omega0_hz * num_components; }
};

// One sampled path. Array index 0 is time step n = -num_train; index
// num_train is n = 0, the first prediction step.
struct TruthRealisation {
  std::vector<double> values;
  std::vector<double> phases;
  std::uint64_t seed = 0;
  int num_train = 0;
  int num_predict = 0;

  double at_step(int n) const { return values.at(static_cast<std::size_t>(n + num_train)); }
  std::span<const double> training() const {
    return std::span<const double>(values).first(static_cast<std::size_t>(num_train));
  }
  // Steps n = 0 .. num_predict.
  std::span<const double> prediction() const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(num_train));
  }
};

TruthRealisation synthesize_truth(const NoiseSpec& spec, std::uint64_t seed);

// Same sum with caller-chosen phases (one per component).
TruthRealisation synthesize_truth_with_phases(const NoiseSpec& spec,
                                              std::span<const double> phases);

// Wraps an externally generated path (length num_train + num_predict + 1).
TruthRealisation truth_from_values(std::vector<double> values, int num_train, int num_predict,
                                   std::uint64_t seed = 0);

// Ensemble autocovariance R(lag) for full-cycle uniform phases.
double analytic_covariance(const NoiseSpec& spec, int lag_steps);

// Three sample standard deviations of the training segment.
double truth_spread(const TruthRealisation& realisation);

void to_json(nlohmann::json& j, const NoiseSpec& spec);
void from_json(const nlohmann::json& j, NoiseSpec& spec);

// CSV with header "n,f_rad".
void write_truth_csv(std::ostream& os, const TruthRealisation& realisation);

}  // namespace qf
