#include "qforecast/kalman.hpp"

#include <cmath>
#include <ostream>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"

namespace qf {

namespace {

constexpr double kBlowUp = 1e12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void symmetrize(Mat& P) {
  const Eigen::Index d = P.rows();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = j + 1; i < d; ++i) {
      const double v = 0.5 * (P(i, j) + P(j, i));
      P(i, j) = v;
      P(j, i) = v;
    }
  }
}

// Column-major storage: walk each column and rotate consecutive row pairs.
void rotate_rows(Mat& P, const Vec& cs, const Vec& sn) {
  const Eigen::Index blocks = cs.size();
  for (Eigen::Index k = 0; k < P.cols(); ++k) {
    double* col = P.col(k).data();
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const double a = col[2 * b];
      const double bb = col[2 * b + 1];
      col[2 * b] = cs[b] * a - sn[b] * bb;
      col[2 * b + 1] = sn[b] * a + cs[b] * bb;
    }
  }
}

void rotate_cols(Mat& P, const Vec& cs, const Vec& sn) {
  for (Eigen::Index b = 0; b < cs.size(); ++b) {
    const double c = cs[b];
    const double s = sn[b];
    auto c0 = P.col(2 * b);
    auto c1 = P.col(2 * b + 1);
    for (Eigen::Index k = 0; k < P.rows(); ++k) {
      const double a = c0[k];
      const double bb = c1[k];
      c0[k] = c * a - s * bb;
      c1[k] = s * a + c * bb;
    }
  }
}

// P <- Φ P Φᵀ in place.
void propagate_cov(Mat& P, const Dynamics& dyn) {
  std::visit(Overloaded{
                 [&](const DenseDynamics& d) { P = (d.phi * P * d.phi.transpose()).eval(); },
                 [&](const CompanionDynamics& c) {
                   const Eigen::Index q = c.phi.size();
                   const Vec u = P * c.phi;
                   Mat next(q, q);
                   next(0, 0) = c.phi.dot(u);
                   if (q > 1) {
                     next.row(0).tail(q - 1) = u.head(q - 1).transpose();
                     next.col(0).tail(q - 1) = u.head(q - 1);
                     next.bottomRightCorner(q - 1, q - 1) = P.topLeftCorner(q - 1, q - 1);
                   }
                   P.swap(next);
                 },
                 [&](const BlockRotationDynamics& r) {
                   const Vec cs = r.angles.array().cos();
                   const Vec sn = r.angles.array().sin();
                   rotate_rows(P, cs, sn);
                   rotate_cols(P, cs, sn);
                 },
             },
             dyn);
}

void add_process_noise(Mat& P, const KalmanModel& model, const Vec& x_prev, const Vec& x_prior) {
  const double s2 = model.process_scale;
  if (s2 == 0.0) return;
  std::visit(Overloaded{
                 [&](const LeadingUnitShaper&) { P(0, 0) += s2; },
                 [&](const IdentityShaper&) { P.diagonal().array() += s2; },
                 [&](const ConstantShaper& c) {
                   P.noalias() += s2 * c.gamma * c.gamma.transpose();
                 },
                 [&](const StateDependentShaper&) {
                   const Eigen::Index blocks = model.dim / 2;
                   const auto* rot = std::get_if<BlockRotationDynamics>(&model.dynamics);
                   for (Eigen::Index b = 0; b < blocks; ++b) {
                     const double norm = x_prev.segment<2>(2 * b).norm();
                     double g0, g1;
                     if (norm < 1e-12) {
                       // Θ applied to (1, 1)/√2
                       const double a = rot ? rot->angles[b] : 0.0;
                       const double c = std::cos(a), s = std::sin(a);
                       g0 = (c - s) * M_SQRT1_2;
                       g1 = (s + c) * M_SQRT1_2;
                     } else {
                       g0 = x_prior[2 * b] / norm;
                       g1 = x_prior[2 * b + 1] / norm;
                     }
                     P(2 * b, 2 * b) += s2 * g0 * g0;
                     P(2 * b, 2 * b + 1) += s2 * g0 * g1;
                     P(2 * b + 1, 2 * b) += s2 * g0 * g1;
                     P(2 * b + 1, 2 * b + 1) += s2 * g1 * g1;
                   }
                 },
             },
             model.shaper);
}

bool time_invariant(const KalmanModel& m) {
  return !std::holds_alternative<StateDependentShaper>(m.shaper) &&
         std::holds_alternative<LinearMeasurement>(m.measure);
}

double max_abs(const Mat& M) { return M.cwiseAbs().maxCoeff(); }

}  // namespace

void KalmanModel::validate() const {
  if (dim < 1) throw ParameterError("KalmanModel: dim must be >= 1");
  if (!(process_scale >= 0.0)) throw ParameterError("KalmanModel: sigma^2 must be >= 0");
  if (!(meas_noise >= 0.0)) throw ParameterError("KalmanModel: R must be >= 0");
  std::visit(Overloaded{
                 [&](const DenseDynamics& d) {
                   if (d.phi.rows() != dim || d.phi.cols() != dim)
                     throw ShapeError("KalmanModel: Phi must be dim x dim");
                 },
                 [&](const CompanionDynamics& c) {
                   if (c.phi.size() != dim) throw ShapeError("KalmanModel: companion size");
                 },
                 [&](const BlockRotationDynamics& r) {
                   if (2 * r.angles.size() != dim) throw ShapeError("KalmanModel: rotation size");
                 },
             },
             dynamics);
  if (const auto* c = std::get_if<ConstantShaper>(&shaper); c && c->gamma.size() != dim) {
    throw ShapeError("KalmanModel: Gamma size");
  }
  if (std::holds_alternative<StateDependentShaper>(shaper) && dim % 2 != 0) {
    throw ShapeError("KalmanModel: state-dependent shaping needs 2-D blocks");
  }
  if (const auto* l = std::get_if<LinearMeasurement>(&measure); l && l->H.size() != dim) {
    throw ShapeError("KalmanModel: H size");
  }
  if (const auto* nl = std::get_if<NonlinearMeasurement>(&measure); nl && (!nl->h || !nl->jacobian)) {
    throw ParameterError("KalmanModel: nonlinear measurement needs h and jacobian");
  }
}

Vec KalmanModel::propagate(const Vec& x) const {
  return std::visit(Overloaded{
                        [&](const DenseDynamics& d) -> Vec { return d.phi * x; },
                        [&](const CompanionDynamics& c) -> Vec {
                          const Eigen::Index q = c.phi.size();
                          Vec out(q);
                          out[0] = c.phi.dot(x);
                          if (q > 1) out.tail(q - 1) = x.head(q - 1);
                          return out;
                        },
                        [&](const BlockRotationDynamics& r) -> Vec {
                          Vec out(x.size());
                          for (Eigen::Index b = 0; b < r.angles.size(); ++b) {
                            const double c = std::cos(r.angles[b]);
                            const double s = std::sin(r.angles[b]);
                            out[2 * b] = c * x[2 * b] - s * x[2 * b + 1];
                            out[2 * b + 1] = s * x[2 * b] + c * x[2 * b + 1];
                          }
                          return out;
                        },
                    },
                    dynamics);
}

double KalmanModel::h(const Vec& x) const {
  return std::visit(Overloaded{
                        [&](const LinearMeasurement& l) { return l.H.dot(x); },
                        [&](const NonlinearMeasurement& n) { return n.h(x); },
                    },
                    measure);
}

Vec KalmanModel::jacobian(const Vec& x) const {
  return std::visit(Overloaded{
                        [&](const LinearMeasurement& l) -> Vec { return l.H; },
                        [&](const NonlinearMeasurement& n) -> Vec { return n.jacobian(x); },
                    },
                    measure);
}

Mat KalmanModel::transition_matrix() const {
  Mat phi = Mat::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) phi.col(k) = propagate(Vec::Unit(dim, k));
  return phi;
}

void check_finite(const KalmanState& state) {
  // NaN fails the comparison, so one pass catches both cases.
  if (!(state.mean.array().abs() <= kBlowUp).all()) {
    throw NumericalError("Kalman state diverged", state.step);
  }
  if (!(state.cov.array().abs() <= kBlowUp).all()) {
    throw NumericalError("Kalman covariance diverged", state.step);
  }
}

namespace {

// In-place predict: `scratch` receives the previous posterior mean.
void predict_inplace(KalmanState& s, const KalmanModel& model, Vec& scratch) {
  scratch = s.mean;
  s.step += 1;
  s.mean = model.propagate(scratch);
  propagate_cov(s.cov, model.dynamics);
  add_process_noise(s.cov, model, scratch, s.mean);
  symmetrize(s.cov);
  check_finite(s);
}

// In-place update; returns false when the sample carries no information.
bool update_inplace(KalmanState& s, double innovation, const KalmanModel& model, Vec& PH,
                    Vec& gain) {
  const Vec H = model.jacobian(s.mean);
  PH.noalias() = s.cov * H;
  const double S = H.dot(PH) + model.meas_noise;
  if (S == 0.0 && PH.isZero(0.0)) {
    // Neither the prior nor the measurement carries uncertainty along H: the
    // sample adds no information and the posterior is the prior.
    gain.setZero(s.mean.size());
    return false;
  }
  if (!(S > 0.0) || !std::isfinite(S)) {
    throw NumericalError("innovation variance is not positive", s.step);
  }
  gain = PH / S;
  s.mean.noalias() += gain * innovation;
  s.cov.noalias() -= gain * PH.transpose();
  symmetrize(s.cov);
  check_finite(s);
  return true;
}

}  // namespace

KalmanState predict_step(const KalmanState& posterior, const KalmanModel& model) {
  KalmanState prior = posterior;
  Vec scratch;
  predict_inplace(prior, model, scratch);
  return prior;
}

UpdateResult update_with_innovation(const KalmanState& prior, double innovation,
                                    const KalmanModel& model) {
  UpdateResult out;
  out.posterior = prior;
  out.innovation = innovation;
  Vec PH;
  update_inplace(out.posterior, innovation, model, PH, out.gain);
  return out;
}

UpdateResult update_step(const KalmanState& prior, double y, const KalmanModel& model) {
  const double y_hat = model.h(prior.mean);
  UpdateResult out = update_with_innovation(prior, y - y_hat, model);
  out.predicted = y_hat;
  return out;
}

PsdReport psd_report(const Mat& P) {
  PsdReport r;
  r.asymmetry = (P - P.transpose()).cwiseAbs().maxCoeff();
  const double tr = P.trace();
  const double scale = std::max(std::abs(tr), 1e-300);
  if (P.rows() <= 32) {
    Eigen::SelfAdjointEigenSolver<Mat> es(P, Eigen::EigenvaluesOnly);
    r.min_eig_rel = es.eigenvalues().minCoeff() / scale;
    r.ok = r.min_eig_rel >= -1e-8;
  } else {
    // Smallest eigenvalue >= -1e-8 tr  <=>  P + 1e-8 tr I is positive definite.
    Mat shifted = P;
    shifted.diagonal().array() += 1e-8 * scale;
    Eigen::LLT<Mat> llt(shifted);
    r.ok = llt.info() == Eigen::Success;
    r.min_eig_rel = r.ok ? 0.0 : -1.0;
  }
  r.ok = r.ok && r.asymmetry <= 1e-12 * std::max(1.0, max_abs(P));
  return r;
}

FilterTrajectory run_filter(std::span<const double> record, const KalmanModel& model,
                            const KalmanState& init, const FilterOptions& options) {
  model.validate();
  if (record.empty()) throw ParameterError("run_filter: empty record");
  if (init.mean.size() != model.dim || init.cov.rows() != model.dim || init.cov.cols() != model.dim) {
    throw ShapeError("run_filter: initial state does not match model dimension");
  }
  const std::size_t n = record.size();
  FilterTrajectory traj;
  traj.first_step = init.step + 1;
  traj.y_hat_minus.reserve(n);
  traj.y_hat_plus.reserve(n);
  traj.gain0.reserve(n);
  traj.innovations.reserve(n);
  if (options.store_means) traj.means.reserve(n);
  if (options.store_covariances) traj.covs.reserve(n);

  const bool can_freeze = options.freeze_tol > 0.0 && time_invariant(model) &&
                          !options.store_covariances && !options.check_psd;
  KalmanState state = init;
  Mat last_prior_cov;
  bool frozen = false;
  Vec frozen_gain, scratch, PH, gain;
  const Vec H = model.jacobian(state.mean);

  for (std::size_t k = 0; k < n; ++k) {
    const double y = record[k];
    if (frozen) {
      state.mean = model.propagate(state.mean);
      state.step += 1;
      const double y_hat = H.dot(state.mean);
      const double innov = y - y_hat;
      state.mean.noalias() += frozen_gain * innov;
      if (!state.mean.allFinite() || state.mean.cwiseAbs().maxCoeff() > kBlowUp) {
        throw NumericalError("Kalman state diverged", state.step);
      }
      traj.y_hat_minus.push_back(y_hat);
      traj.y_hat_plus.push_back(H.dot(state.mean));
      traj.gain0.push_back(frozen_gain[0]);
      traj.innovations.push_back(innov);
      if (options.store_means) traj.means.push_back(state.mean);
      if (static_cast<long>(k) + 1 == options.capture_after) traj.captured = state;
      continue;
    }
    predict_inplace(state, model, scratch);
    if (can_freeze) {
      if (k > 0) {
        const double scale = std::max(max_abs(state.cov), 1e-300);
        if (max_abs(state.cov - last_prior_cov) <= options.freeze_tol * scale) frozen = true;
      }
      last_prior_cov = state.cov;
    }
    const double y_hat = model.h(state.mean);
    update_inplace(state, y - y_hat, model, PH, gain);
    if (frozen) {
      frozen_gain = gain;
      traj.gain_frozen = true;
    }
    traj.y_hat_minus.push_back(y_hat);
    traj.y_hat_plus.push_back(model.h(state.mean));
    traj.gain0.push_back(gain[0]);
    traj.innovations.push_back(y - y_hat);
    if (options.check_psd) {
      const PsdReport r = psd_report(state.cov);
      traj.worst_asymmetry = std::max(traj.worst_asymmetry, r.asymmetry);
      traj.worst_min_eig = std::min(traj.worst_min_eig, r.min_eig_rel);
      traj.psd_ok = traj.psd_ok && r.ok;
    }
    if (options.store_means) traj.means.push_back(state.mean);
    if (options.store_covariances) traj.covs.push_back(state.cov);
    if (static_cast<long>(k) + 1 == options.capture_after) traj.captured = state;
  }
  traj.last = std::move(state);
  return traj;
}

ForecastResult forecast(const KalmanState& last_posterior, const KalmanModel& model, int horizon) {
  if (horizon < 1) throw ParameterError("forecast: horizon must be >= 1");
  model.validate();
  ForecastResult out;
  out.values.reserve(static_cast<std::size_t>(horizon));
  out.variances.reserve(static_cast<std::size_t>(horizon));
  KalmanState state = last_posterior;
  for (int k = 0; k < horizon; ++k) {
    state = predict_step(state, model);
    out.values.push_back(model.h(state.mean));
    const Vec J = model.jacobian(state.mean);
    out.variances.push_back(J.dot(state.cov * J));
  }
  return out;
}

std::vector<double> forecast_mean(const Vec& last_mean, const KalmanModel& model, int horizon) {
  if (horizon < 1) throw ParameterError("forecast: horizon must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(horizon));
  Vec x = last_mean;
  for (int k = 0; k < horizon; ++k) {
    x = model.propagate(x);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowUp) {
      throw NumericalError("forecast diverged", k + 1);
    }
    out.push_back(model.h(x));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const FilterTrajectory& traj) {
  io::CsvWriter csv(os);
  csv.header({"n", "x0_hat", "y_hat_minus", "gain0", "innovation"});
  for (std::size_t k = 0; k < traj.y_hat_minus.size(); ++k) {
    const double x0 = k < traj.means.size() ? traj.means[k][0] : std::nan("");
    csv.row(traj.first_step + static_cast<long>(k), x0, traj.y_hat_minus[k], traj.gain0[k],
            traj.innovations[k]);
  }
}

}  // namespace qf
