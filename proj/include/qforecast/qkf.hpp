#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "qforecast/ar_models.hpp"
#include "qforecast/kalman.hpp"
#include "qforecast/measurement.hpp"

namespace qf {

struct QkfModel {
  ArCoefficients coeffs;
  double sigma2 = 0.0;
  double R = 0.0;
  std::uint64_t quantizer_seed = 0;
  // Diagnostic: residual d - (ẑ + 0.5) instead of d - d̂ with a sampled d̂.
  bool expected_residual = false;
};

// z = cos(f) / 2 and dz/df = -sin(f) / 2.
double qkf_measure(double f);
double qkf_jacobian(double f);

// Variance of the bit residual when ẑ equals z: Σ(¼ - z²)/N over the record
// for d, once more for a sampled d̂, plus the additive bias noise.
double qkf_innovation_variance(std::span<const double> f, double meas_var, bool expected_residual);

// Companion dynamics, Q = σ² I, Born-rule measurement on the leading state.
KalmanModel build_qkf_kalman(const QkfModel& model);

// Every lag slot starts at 2 arccos(sqrt(p̂)) with p̂ the shrunk mean
// (Σ d + 0.5)/(q + 1) of the first q bits, so the Jacobian is nonzero at the
// start; P0 = 0.25 I.
KalmanState qkf_initial_state(std::span<const int> bits, int q, long first_step);

struct QkfTrajectory {
  std::vector<double> f_hat;  // posterior leading state
  std::vector<double> z_hat;  // clamped h of the prior mean
  std::vector<int> d_pred;    // -1 when expected_residual is set
  std::vector<double> residual;
  KalmanState last;
  long first_step = 0;
};

QkfTrajectory run_qkf(const BinaryRecord& record, const QkfModel& model, const KalmanState& init);

// Linear-measurement variant of the QKF loop fed with a linear record. With
// `akf_process_noise` the process noise is σ² e1 e1ᵀ and the output equals
// the AKF on the same record.
FilterTrajectory run_qkf_linear(std::span<const double> record, const QkfModel& model,
                                const KalmanState& init, bool akf_process_noise);

// ẑ for k = 1..horizon under zero gain.
std::vector<double> qkf_forecast(const KalmanState& last_posterior, const QkfModel& model,
                                 int horizon);

// Columns n, f_hat, z_hat, d_pred, residual.
void write_qkf_csv(std::ostream& os, const QkfTrajectory& traj);

}  // namespace qf
