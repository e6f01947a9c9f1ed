#include "qforecast/lkffb.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"

namespace qf {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

LkffbBasis build_basis(BasisKind kind, double f0_hz, int num_osc, double dt, int num_train,
                       bool include_zero) {
  if (!(f0_hz > 0.0)) throw ParameterError("build_basis: f0 must be > 0");
  if (num_osc < 1) throw ParameterError("build_basis: need at least one oscillator");
  if (!(dt > 0.0) || num_train < 1) throw ParameterError("build_basis: invalid sampling");
  LkffbBasis b;
  b.kind = kind;
  b.f0_hz = f0_hz;
  b.num_osc = num_osc;
  b.dt = dt;
  b.num_train = num_train;
  b.include_zero = include_zero;
  const double f_res = b.fourier_resolution();
  switch (kind) {
    case BasisKind::A:
      if (include_zero) b.frequencies.push_back(0.0);
      for (int j = 1; j <= num_osc; ++j) b.frequencies.push_back(j * f0_hz);
      break;
    case BasisKind::B:
      for (int j = 0; j < num_osc; ++j) b.frequencies.push_back(f_res + j * f0_hz);
      break;
    case BasisKind::C:
      b.frequencies.push_back(0.0);
      for (int j = 0; j < num_osc; ++j) b.frequencies.push_back(f_res + j * f0_hz);
      break;
  }
  return b;
}

KalmanModel build_lkffb(const LkffbBasis& basis, double sigma2, double R) {
  const int n = basis.size();
  if (n < 1) throw ParameterError("build_lkffb: empty basis");
  Vec angles(n);
  for (int j = 0; j < n; ++j) angles[j] = kTwoPi * basis.frequencies[static_cast<std::size_t>(j)] * basis.dt;
  Vec H = Vec::Zero(2 * n);
  for (int j = 0; j < n; ++j) H[2 * j] = 1.0;
  KalmanModel m;
  m.dim = 2 * n;
  m.dynamics = BlockRotationDynamics{angles};
  m.shaper = StateDependentShaper{};
  m.process_scale = sigma2;
  m.meas_noise = R;
  m.measure = LinearMeasurement{H};
  m.validate();
  return m;
}

KalmanState lkffb_initial_state(const LkffbBasis& basis, double variance, long first_step) {
  const int d = 2 * basis.size();
  KalmanState s;
  s.mean = Vec::Zero(d);
  s.cov = (variance > 0.0 ? variance : 1.0) * Mat::Identity(d, d);
  s.step = first_step - 1;
  return s;
}

LkffbExtraction extract_from_state(const Vec& x, const LkffbBasis& basis, long step) {
  const int n = basis.size();
  if (x.size() != 2 * n) throw ShapeError("extract_from_state: state size does not match basis");
  LkffbExtraction e;
  e.step = step;
  e.frequencies = basis.frequencies;
  e.amplitudes.resize(static_cast<std::size_t>(n));
  e.phases.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double a = x[2 * j];
    const double b = x[2 * j + 1];
    double theta = std::atan2(b, a);
    if (theta <= -std::numbers::pi) theta = std::numbers::pi;
    e.amplitudes[static_cast<std::size_t>(j)] = std::hypot(a, b);
    e.phases[static_cast<std::size_t>(j)] = theta;
  }
  return e;
}

LkffbExtraction extract_amp_phase(const FilterTrajectory& trajectory, const LkffbBasis& basis,
                                  long at_step) {
  if (at_step < 1 || at_step > static_cast<long>(trajectory.means.size())) {
    throw ParameterError("extract_amp_phase: step " + std::to_string(at_step) +
                         " outside the stored trajectory");
  }
  return extract_from_state(trajectory.means[static_cast<std::size_t>(at_step - 1)], basis, at_step);
}

int optimal_training_time(const LkffbBasis& basis) {
  const long n = std::lround(1.0 / (basis.dt * basis.f0_hz));
  if (n < 1) throw ParameterError("optimal_training_time: basis spacing exceeds sampling rate");
  return static_cast<int>(n);
}

double phase_correction(const LkffbBasis& basis) {
  if (basis.kind == BasisKind::A) return 0.0;
  return kTwoPi * (1.0 - basis.fourier_resolution() / basis.f0_hz);
}

std::vector<double> harmonic_predict(const LkffbExtraction& extraction, const LkffbBasis& basis,
                                     int steps) {
  if (steps < 1) throw ParameterError("harmonic_predict: steps must be >= 1");
  if (extraction.frequencies.size() != basis.frequencies.size()) {
    throw ShapeError("harmonic_predict: extraction does not match basis");
  }
  const double psi = phase_correction(basis);
  std::vector<double> out(static_cast<std::size_t>(steps), 0.0);
  for (std::size_t j = 0; j < basis.frequencies.size(); ++j) {
    const double f = basis.frequencies[j];
    const double shift = f == 0.0 ? 0.0 : psi;
    const double amp = extraction.amplitudes[j];
    const double theta = extraction.phases[j];
    for (int m = 1; m <= steps; ++m) {
      out[static_cast<std::size_t>(m - 1)] += amp * std::cos(kTwoPi * f * m * basis.dt + theta + shift);
    }
  }
  return out;
}

void write_extraction_csv(std::ostream& os, const LkffbExtraction& extraction) {
  io::CsvWriter csv(os);
  csv.header({"f_hz", "amplitude", "phase_rad"});
  for (std::size_t j = 0; j < extraction.frequencies.size(); ++j) {
    csv.row(extraction.frequencies[j], extraction.amplitudes[j], extraction.phases[j]);
  }
}

}  // namespace qf
