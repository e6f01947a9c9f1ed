#include "qforecast/ar_models.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "qforecast/errors.hpp"
#include "qforecast/measurement.hpp"

namespace qf {

namespace {

Vec conjugate_gradient(const Mat& A, const Vec& b) {
  Vec x = Vec::Zero(b.size());
  Vec r = b;
  Vec p = r;
  double rr = r.squaredNorm();
  const double stop = 1e-30 * std::max(b.squaredNorm(), 1e-300);
  const int max_iter = 20 * static_cast<int>(b.size()) + 20;
  for (int it = 0; it < max_iter && rr > stop; ++it) {
    const Vec Ap = A * p;
    const double alpha = rr / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

}  // namespace

ArCoefficients LsfModel::coefficients() const {
  if (weights.empty()) throw ParameterError("LsfModel: untrained");
  ArCoefficients c;
  c.phi = weights[0].head(order);
  c.offset = weights[0][order];
  return c;
}

LsfModel train_lsf(std::span<const double> record, int q, int max_horizon,
                   const LsfOptions& options) {
  if (q < 1) throw ParameterError("train_lsf: q must be >= 1");
  if (max_horizon < 1) throw ParameterError("train_lsf: max_horizon must be >= 1");
  const int N = static_cast<int>(record.size());
  if (N <= q + max_horizon) throw ParameterError("train_lsf: record too short for q and horizon");

  const int p = q + 1;
  auto feature = [&](int t) {
    Vec x(p);
    for (int k = 0; k < q; ++k) x[k] = record[static_cast<std::size_t>(t - k)];
    x[q] = 1.0;
    return x;
  };

  LsfModel model;
  model.order = q;
  model.weights.resize(static_cast<std::size_t>(max_horizon));

  // Rows t = q-1 .. N-1-i for horizon i. Start from the largest horizon and
  // add rows as the horizon shrinks.
  Mat G = Mat::Zero(p, p);
  for (int t = q - 1; t <= N - 1 - max_horizon; ++t) {
    const Vec x = feature(t);
    G.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  bool warned = false;
  for (int i = max_horizon; i >= 1; --i) {
    if (i < max_horizon) {
      const Vec x = feature(N - 1 - i);
      G.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    Vec b = Vec::Zero(p);
    for (int t = q - 1; t <= N - 1 - i; ++t) {
      const double target = record[static_cast<std::size_t>(t + i)];
      for (int k = 0; k < q; ++k) b[k] += record[static_cast<std::size_t>(t - k)] * target;
      b[q] += target;
    }
    Mat A = G.selfadjointView<Eigen::Lower>();
    if (!warned) {
      // Rank test on the unregularized Gram matrix.
      const Vec D = Eigen::LDLT<Mat>(A).vectorD().cwiseAbs();
      if (D.minCoeff() <= 1e-12 * D.maxCoeff()) {
        model.warnings.push_back("train_lsf: rank-deficient design; ridge-regularized solve used");
        warned = true;
      }
    }
    const double lambda = options.ridge * A.trace();
    A.diagonal().array() += lambda;

    Eigen::LDLT<Mat> ldlt(A);
    model.weights[static_cast<std::size_t>(i - 1)] =
        options.gradient_descent ? conjugate_gradient(A, b) : Vec(ldlt.solve(b));
  }

  const Vec& w1 = model.weights[0];
  double ss = 0.0;
  int rows = 0;
  for (int t = q - 1; t <= N - 2; ++t) {
    const double e = record[static_cast<std::size_t>(t + 1)] - w1.dot(feature(t));
    ss += e * e;
    ++rows;
  }
  model.residual_variance = ss / std::max(1, rows - p);
  return model;
}

double lsf_predict(const LsfModel& model, std::span<const double> history, int horizon) {
  if (horizon < 1 || horizon > model.max_horizon()) {
    throw ParameterError("lsf_predict: horizon outside trained range");
  }
  const int q = model.order;
  if (history.size() < static_cast<std::size_t>(q)) {
    throw ParameterError("lsf_predict: insufficient history");
  }
  const Vec& w = model.weights[static_cast<std::size_t>(horizon - 1)];
  const std::size_t last = history.size() - 1;
  double s = w[q];
  for (int k = 0; k < q; ++k) s += w[k] * history[last - static_cast<std::size_t>(k)];
  return s;
}

std::vector<double> lsf_forecast(const LsfModel& model, std::span<const double> history, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) out.push_back(lsf_predict(model, history, i));
  return out;
}

KalmanModel build_akf(const ArCoefficients& coeffs, double sigma2, double R) {
  const int q = coeffs.order();
  if (q < 1) throw ParameterError("build_akf: q must be >= 1");
  KalmanModel m;
  m.dim = q;
  m.dynamics = CompanionDynamics{coeffs.phi};
  m.shaper = LeadingUnitShaper{};
  m.process_scale = sigma2;
  m.meas_noise = R;
  m.measure = LinearMeasurement{Vec::Unit(q, 0)};
  m.validate();
  return m;
}

KalmanState akf_initial_state(std::span<const double> record, int q, long first_step) {
  if (record.size() < static_cast<std::size_t>(q)) {
    throw ParameterError("akf_initial_state: record shorter than q");
  }
  KalmanState s;
  s.mean.resize(q);
  for (int k = 0; k < q; ++k) s.mean[k] = record[static_cast<std::size_t>(q - 1 - k)];
  double var = sample_variance(std::vector<double>(record.begin(), record.end()));
  if (!(var > 0.0)) var = 1.0;
  s.cov = var * Mat::Identity(q, q);
  s.step = first_step - 1;
  return s;
}

double ar_spectral_density(const ArCoefficients& coeffs, double sigma2, double omega) {
  if (!(omega > 0.0) || omega > std::numbers::pi * (1.0 + 1e-12)) {
    throw ParameterError("ar_spectral_density: omega must lie in (0, pi]");
  }
  std::complex<double> d(1.0, 0.0);
  for (int k = 0; k < coeffs.order(); ++k) {
    d -= coeffs.phi[k] * std::polar(1.0, -omega * (k + 1));
  }
  const double denom = std::norm(d);
  if (denom < 1e-300) throw std::overflow_error("ar_spectral_density: unit root at omega");
  return sigma2 / (2.0 * std::numbers::pi * denom);
}

StationarityReport check_stationarity(const ArCoefficients& coeffs) {
  const int q = coeffs.order();
  if (q < 1) throw ParameterError("check_stationarity: q must be >= 1");
  StationarityReport rep;
  if (q == 1) {
    rep.moduli = {std::abs(coeffs.phi[0])};
  } else {
    Mat C = Mat::Zero(q, q);
    C.row(0) = coeffs.phi.transpose();
    C.bottomLeftCorner(q - 1, q - 1).setIdentity();
    Eigen::EigenSolver<Mat> es(C, false);
    const auto ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) rep.moduli.push_back(std::abs(ev[i]));
    std::sort(rep.moduli.rbegin(), rep.moduli.rend());
  }
  rep.stationary = rep.max_modulus() < 1.0 - 1e-9;
  return rep;
}

double ar_process_variance(const ArCoefficients& coeffs, double sigma2) {
  if (!check_stationarity(coeffs).stationary) {
    throw DegenerateInputError("ar_process_variance: process is not stationary");
  }
  const int q = coeffs.order();
  Mat A = Mat::Zero(q, q);
  A.row(0) = coeffs.phi.transpose();
  if (q > 1) A.bottomLeftCorner(q - 1, q - 1).setIdentity();
  Mat P = Mat::Zero(q, q);
  P(0, 0) = sigma2;
  // Doubling: P <- P + A P Aᵀ, A <- A².
  for (int it = 0; it < 200; ++it) {
    const Mat next = P + A * P * A.transpose();
    A = (A * A).eval();
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (change <= 1e-16 * P.cwiseAbs().maxCoeff() || A.cwiseAbs().maxCoeff() < 1e-300) break;
  }
  return P(0, 0);
}

}  // namespace qf
