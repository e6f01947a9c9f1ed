#pragma once

#include <span>
#include <string>
#include <vector>

#include "qforecast/kalman.hpp"

namespace qf {

struct ArCoefficients {
  Vec phi;  // phi[0] multiplies the most recent sample
  double offset = 0.0;

  int order() const { return static_cast<int>(phi.size()); }
};

struct LsfOptions {
  // Iterative (conjugate-gradient) solve of the same objective instead of the
  // direct factorization.
  bool gradient_descent = false;
  double ridge = 1e-10;  // times trace of the Gram matrix
};

// Per-horizon linear predictors. weights[i-1] = (w_1..w_q, offset) predicts
// y_{t+i} from (y_t, ..., y_{t-q+1}, 1).
struct LsfModel {
  int order = 0;
  std::vector<Vec> weights;
  double residual_variance = 0.0;  // one-step fit, per-sample units
  std::vector<std::string> warnings;

  int max_horizon() const { return static_cast<int>(weights.size()); }
  // AR(q) view of the one-step predictor.
  ArCoefficients coefficients() const;
};

LsfModel train_lsf(std::span<const double> record, int q, int max_horizon,
                   const LsfOptions& options = {});

// `history` ends with the most recent sample and must hold at least q values.
double lsf_predict(const LsfModel& model, std::span<const double> history, int horizon);

// Predictions for horizons 1..count from the end of `history`.
std::vector<double> lsf_forecast(const LsfModel& model, std::span<const double> history, int count);

// Companion dynamics, Γ = e1, H = e1.
KalmanModel build_akf(const ArCoefficients& coeffs, double sigma2, double R);

// Lag window seeded with the first q record values (most recent first) and
// P0 = sample variance * I. Step is set so the first filtered sample is the
// record's first entry.
KalmanState akf_initial_state(std::span<const double> record, int q, long first_step);

// S(ω) = σ² / (2π |1 - Σ φ_k e^{-iωk}|²), ω in rad/sample.
double ar_spectral_density(const ArCoefficients& coeffs, double sigma2, double omega);

struct StationarityReport {
  bool stationary = false;
  std::vector<double> moduli;  // companion eigenvalue moduli, descending
  double max_modulus() const { return moduli.empty() ? 0.0 : moduli.front(); }
};
StationarityReport check_stationarity(const ArCoefficients& coeffs);

// Stationary variance of the AR process driven by white noise of variance σ².
double ar_process_variance(const ArCoefficients& coeffs, double sigma2);

}  // namespace qf
