#pragma once

#include <iosfwd>
#include <vector>

#include "qforecast/kalman.hpp"

namespace qf {

enum class BasisKind { A, B, C };

// Oscillator frequency grid (Hz).
//   A: j f0, j = 1..J (0 prepended when include_zero)
//   B: f_res + j f0, j = 0..J-1, with f_res = 1/(N dt)
//   C: 0 followed by B
struct LkffbBasis {
  BasisKind kind = BasisKind::A;
  double f0_hz = 0.5;
  int num_osc = 100;
  double dt = 1e-3;
  int num_train = 2000;
  bool include_zero = false;
  std::vector<double> frequencies;

  int size() const { return static_cast<int>(frequencies.size()); }
  double fourier_resolution() const { return 1.0 / (num_train * dt); }
};

LkffbBasis build_basis(BasisKind kind, double f0_hz, int num_osc, double dt, int num_train,
                       bool include_zero = false);

// Block rotations Θ(2π f_j dt), H = [1 0 1 0 ...], state-dependent Γ.
KalmanModel build_lkffb(const LkffbBasis& basis, double sigma2, double R);

// Zero mean, P0 = variance * I.
KalmanState lkffb_initial_state(const LkffbBasis& basis, double variance, long first_step);

struct LkffbExtraction {
  std::vector<double> frequencies;
  std::vector<double> amplitudes;
  std::vector<double> phases;  // (-π, π]
  long step = 0;               // samples filtered before extraction
};

LkffbExtraction extract_from_state(const Vec& x, const LkffbBasis& basis, long step);

// Reads the posterior after `at_step` samples (1-based). Requires stored means.
LkffbExtraction extract_amp_phase(const FilterTrajectory& trajectory, const LkffbBasis& basis,
                                  long at_step);

// n_C = round(1 / (dt f0)).
int optimal_training_time(const LkffbBasis& basis);

// ψ_C: 0 for Basis A, 2π(1 - f_res / f0) for B and C.
double phase_correction(const LkffbBasis& basis);

// Σ_j |x_j| cos(2π f_j m dt + θ_j + ψ_C) for m = 1..steps. ψ_C is not applied
// to a zero-frequency oscillator, which does not rotate.
std::vector<double> harmonic_predict(const LkffbExtraction& extraction, const LkffbBasis& basis,
                                     int steps);

// Columns f_hz, amplitude, phase_rad.
void write_extraction_csv(std::ostream& os, const LkffbExtraction& extraction);

}  // namespace qf
