#include "qforecast/qkf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"
#include "qforecast/random.hpp"

namespace qf {

namespace {
constexpr double kStateLimit = 1e6;

void check_bounded(const KalmanState& s) {
  if (!s.mean.allFinite() || s.mean.cwiseAbs().maxCoeff() > kStateLimit) {
    throw NumericalError("QKF state diverged", s.step);
  }
}
}  // namespace

double qkf_measure(double f) { return 0.5 * std::cos(f); }

double qkf_jacobian(double f) { return -0.5 * std::sin(f); }

double qkf_innovation_variance(std::span<const double> f, double meas_var, bool expected_residual) {
  if (f.empty()) throw ParameterError("qkf_innovation_variance: empty record");
  if (!(meas_var >= 0.0)) throw ParameterError("qkf_innovation_variance: meas_var must be >= 0");
  double bits = 0.0;
  for (double v : f) {
    const double z = qkf_measure(v);
    bits += 0.25 - z * z;
  }
  bits /= static_cast<double>(f.size());
  return meas_var + (expected_residual ? 1.0 : 2.0) * bits;
}

KalmanModel build_qkf_kalman(const QkfModel& model) {
  const int q = model.coeffs.order();
  if (q < 1) throw ParameterError("QKF: q must be >= 1");
  KalmanModel m;
  m.dim = q;
  m.dynamics = CompanionDynamics{model.coeffs.phi};
  m.shaper = IdentityShaper{};
  m.process_scale = model.sigma2;
  m.meas_noise = model.R;
  m.measure = NonlinearMeasurement{
      [](const Vec& x) { return qkf_measure(x[0]); },
      [q](const Vec& x) {
        Vec J = Vec::Zero(q);
        J[0] = qkf_jacobian(x[0]);
        return J;
      }};
  m.validate();
  return m;
}

KalmanState qkf_initial_state(std::span<const int> bits, int q, long first_step) {
  if (q < 1) throw ParameterError("QKF: q must be >= 1");
  const std::size_t n = std::min(bits.size(), static_cast<std::size_t>(q));
  double ones = 0.0;
  for (std::size_t k = 0; k < n; ++k) ones += bits[k];
  const double p = (ones + 0.5) / (static_cast<double>(n) + 1.0);
  const double f0 = 2.0 * std::acos(std::sqrt(p));
  KalmanState s;
  s.mean = Vec::Constant(q, f0);
  s.cov = 0.25 * Mat::Identity(q, q);
  s.step = first_step - 1;
  return s;
}

QkfTrajectory run_qkf(const BinaryRecord& record, const QkfModel& model, const KalmanState& init) {
  if (record.bits.empty()) throw ParameterError("run_qkf: empty record");
  const KalmanModel km = build_qkf_kalman(model);
  if (init.mean.size() != km.dim) throw ShapeError("run_qkf: initial state size");
  Rng rng(model.quantizer_seed);
  QkfTrajectory traj;
  traj.first_step = init.step + 1;
  const std::size_t n = record.bits.size();
  traj.f_hat.reserve(n);
  traj.z_hat.reserve(n);
  traj.d_pred.reserve(n);
  traj.residual.reserve(n);

  KalmanState state = init;
  for (std::size_t k = 0; k < n; ++k) {
    const int d = record.bits[k];
    if (d != 0 && d != 1) throw ParameterError("run_qkf: bits must be 0 or 1");
    KalmanState prior = predict_step(state, km);
    const double z = std::clamp(qkf_measure(prior.mean[0]), -0.5, 0.5);
    double r;
    int d_hat = -1;
    if (model.expected_residual) {
      r = d - (z + 0.5);
    } else {
      d_hat = quantize(z, rng);
      r = static_cast<double>(d - d_hat);
    }
    UpdateResult upd = update_with_innovation(prior, r, km);
    check_bounded(upd.posterior);
    state = std::move(upd.posterior);
    traj.f_hat.push_back(state.mean[0]);
    traj.z_hat.push_back(z);
    traj.d_pred.push_back(d_hat);
    traj.residual.push_back(r);
  }
  traj.last = std::move(state);
  return traj;
}

FilterTrajectory run_qkf_linear(std::span<const double> record, const QkfModel& model,
                                const KalmanState& init, bool akf_process_noise) {
  if (record.empty()) throw ParameterError("run_qkf_linear: empty record");
  KalmanModel km = build_qkf_kalman(model);
  km.measure = LinearMeasurement{Vec::Unit(km.dim, 0)};
  if (akf_process_noise) km.shaper = LeadingUnitShaper{};
  FilterTrajectory traj;
  traj.first_step = init.step + 1;
  KalmanState state = init;
  for (double y : record) {
    KalmanState prior = predict_step(state, km);
    const double y_hat = prior.mean[0];
    UpdateResult upd = update_with_innovation(prior, y - y_hat, km);
    check_bounded(upd.posterior);
    state = std::move(upd.posterior);
    traj.means.push_back(state.mean);
    traj.y_hat_minus.push_back(y_hat);
    traj.gain0.push_back(upd.gain[0]);
    traj.innovations.push_back(y - y_hat);
  }
  traj.last = std::move(state);
  return traj;
}

std::vector<double> qkf_forecast(const KalmanState& last_posterior, const QkfModel& model,
                                 int horizon) {
  std::vector<double> z = forecast_mean(last_posterior.mean, build_qkf_kalman(model), horizon);
  for (double& v : z) v = std::clamp(v, -0.5, 0.5);
  return z;
}

void write_qkf_csv(std::ostream& os, const QkfTrajectory& traj) {
  io::CsvWriter csv(os);
  csv.header({"n", "f_hat", "z_hat", "d_pred", "residual"});
  for (std::size_t k = 0; k < traj.f_hat.size(); ++k) {
    csv.row(traj.first_step + static_cast<long>(k), traj.f_hat[k], traj.z_hat[k], traj.d_pred[k],
            traj.residual[k]);
  }
}

}  // namespace qf
