#include "qforecast/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <nlohmann/json.hpp>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"
#include "qforecast/random.hpp"

namespace qf {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt3 = std::sqrt(3.0);

Vec training_steps(std::size_t n) {
  Vec s(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) s[static_cast<Eigen::Index>(i)] = -static_cast<double>(n) + i;
  return s;
}

// Gram of a stationary kernel on consecutive steps: Toeplitz fill.
Mat training_gram(const KernelSpec& spec, std::size_t n, double dt) {
  const Eigen::Index N = static_cast<Eigen::Index>(n);
  Vec lag_values(N);
  for (Eigen::Index d = 0; d < N; ++d) lag_values[d] = kernel_eval(spec, d * dt);
  Mat K(N, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    for (Eigen::Index i = 0; i < N; ++i) K(i, j) = lag_values[std::abs(i - j)];
  }
  return K;
}

Vec to_vec(std::span<const double> s) {
  Vec v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v[static_cast<Eigen::Index>(i)] = s[i];
  return v;
}

}  // namespace

const char* to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::PER: return "PER";
    case KernelFamily::RBF: return "RBF";
    case KernelFamily::RQ: return "RQ";
    case KernelFamily::MAT32: return "MAT32";
    case KernelFamily::QPER: return "QPER";
  }
  return "?";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "PER") return KernelFamily::PER;
  if (name == "RBF") return KernelFamily::RBF;
  if (name == "RQ") return KernelFamily::RQ;
  if (name == "MAT32") return KernelFamily::MAT32;
  if (name == "QPER") return KernelFamily::QPER;
  throw ParameterError("unknown kernel family '" + name + "'");
}

void KernelSpec::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ParameterError("KernelSpec: sigma2 must be > 0");
  if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
    throw ParameterError("KernelSpec: length_scale must be > 0");
  }
  if (uses_f0() && !(f0_hz > 0.0)) throw ParameterError("KernelSpec: f0_hz must be > 0");
  if (uses_extra() && !(extra > 0.0)) throw ParameterError("KernelSpec: extra must be > 0");
}

void to_json(nlohmann::json& j, const KernelSpec& spec) {
  j = nlohmann::json{{"family", to_string(spec.family)},
                     {"sigma2", spec.sigma2},
                     {"length_scale", spec.length_scale}};
  if (spec.uses_f0()) j["f0_hz"] = spec.f0_hz;
  if (spec.uses_extra()) j["extra"] = spec.extra;
}

void from_json(const nlohmann::json& j, KernelSpec& spec) {
  io::reject_unknown_keys(j, {"family", "sigma2", "length_scale", "f0_hz", "extra"}, "KernelSpec");
  try {
    spec.family = kernel_family_from_string(j.at("family").get<std::string>());
    spec.sigma2 = j.value("sigma2", 1.0);
    spec.length_scale = j.value("length_scale", 1.0);
    spec.f0_hz = j.value("f0_hz", 1.0);
    spec.extra = j.value("extra", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("KernelSpec: ") + e.what());
  }
  spec.validate();
}

double kernel_eval(const KernelSpec& spec, double nu) {
  const double l = spec.length_scale;
  switch (spec.family) {
    case KernelFamily::PER: {
      const double s = std::sin(kPi * spec.f0_hz * nu);
      return spec.sigma2 * std::exp(-2.0 * s * s / (l * l));
    }
    case KernelFamily::RBF:
      return spec.sigma2 * std::exp(-nu * nu / (2.0 * l * l));
    case KernelFamily::RQ:
      return spec.sigma2 * std::pow(1.0 + nu * nu / (2.0 * spec.extra * l * l), -spec.extra);
    case KernelFamily::MAT32: {
      const double r = kSqrt3 * std::abs(nu) / l;
      return spec.sigma2 * (1.0 + r) * std::exp(-r);
    }
    case KernelFamily::QPER: {
      const double s = std::sin(kPi * spec.f0_hz * nu);
      const double le = spec.extra;
      return spec.sigma2 * std::exp(-nu * nu / (2.0 * le * le) - 2.0 * s * s / (l * l));
    }
  }
  return 0.0;
}

std::array<double, 4> kernel_grad_log(const KernelSpec& spec, double nu) {
  const double K = kernel_eval(spec, nu);
  const double l = spec.length_scale;
  std::array<double, 4> g{K, 0.0, 0.0, 0.0};
  switch (spec.family) {
    case KernelFamily::PER:
    case KernelFamily::QPER: {
      const double x = kPi * spec.f0_hz * nu;
      const double s = std::sin(x);
      g[1] = K * 4.0 * s * s / (l * l);
      g[2] = -K * 2.0 * std::sin(2.0 * x) * x / (l * l);
      if (spec.family == KernelFamily::QPER) {
        g[3] = K * nu * nu / (spec.extra * spec.extra);
      }
      break;
    }
    case KernelFamily::RBF:
      g[1] = K * nu * nu / (l * l);
      break;
    case KernelFamily::RQ: {
      const double a = spec.extra;
      const double u = 1.0 + nu * nu / (2.0 * a * l * l);
      g[1] = K * nu * nu / (l * l * u);
      g[3] = K * (-a * std::log(u) + nu * nu / (2.0 * l * l * u));
      break;
    }
    case KernelFamily::MAT32: {
      const double r = kSqrt3 * std::abs(nu) / l;
      g[1] = spec.sigma2 * r * r * std::exp(-r);
      break;
    }
  }
  return g;
}

std::vector<double> periodic_series_coefficients(double l, int M) {
  if (M < 0) throw ParameterError("periodic series: M must be >= 0");
  if (!(l > 0.0)) throw ParameterError("periodic series: length_scale must be > 0");
  // exp(-1/l²) exp(cos x / l²): order-m term (cos x)^m / (l^{2m} m!), and
  // cos^m x = 2^{-m} Σ_k C(m, k) cos((m - 2k) x). Grouping by j = m - 2k:
  //   p_j = e^{-1/l²} Σ_β 2 C(j+2β, β) / ((2l²)^{j+2β} (j+2β)!),  β ≤ (M-j)/2
  //   p_0 = e^{-1/l²} Σ_α C(2α, α) / ((2l²)^{2α} (2α)!),         α ≤ M/2
  const double log_2l2 = std::log(2.0 * l * l);
  auto log_term = [&](int m, int k) {
    // log[ C(m, k) / ((2l²)^m m!) ] = -lgamma(k+1) - lgamma(m-k+1) - m log(2l²)
    return -std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0) - m * log_2l2;
  };
  const double pre = std::exp(-1.0 / (l * l));
  std::vector<double> p(static_cast<std::size_t>(M) + 1, 0.0);
  for (int alpha = 0; alpha <= M / 2; ++alpha) {
    p[0] += std::exp(log_term(2 * alpha, alpha));
  }
  for (int j = 1; j <= M; ++j) {
    for (int beta = 0; beta <= (M - j) / 2; ++beta) {
      p[static_cast<std::size_t>(j)] += 2.0 * std::exp(log_term(j + 2 * beta, beta));
    }
  }
  for (double& v : p) v *= pre;
  return p;
}

double periodic_kernel_truncated(const KernelSpec& spec, double nu, int M) {
  const auto p = periodic_series_coefficients(spec.length_scale, M);
  const double x = 2.0 * kPi * spec.f0_hz * nu;
  double total = p[0];
  for (int j = 1; j <= M; ++j) total += p[static_cast<std::size_t>(j)] * std::cos(j * x);
  return spec.sigma2 * total;
}

Mat gram_matrix(const KernelSpec& spec, std::span<const double> a, std::span<const double> b,
                double dt) {
  Mat K(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          kernel_eval(spec, (a[i] - b[j]) * dt);
    }
  }
  return K;
}

CholeskyResult factorize_with_jitter(const Mat& K, double R, double sigma2) {
  static constexpr double kLadder[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6};
  CholeskyResult out;
  for (double rel : kLadder) {
    Mat A = K;
    A.diagonal().array() += R + rel * sigma2;
    out.llt.compute(A);
    if (out.llt.info() == Eigen::Success) {
      // LLT only checks the pivots are positive; reject factors that are not finite.
      if (out.llt.matrixLLT().diagonal().allFinite()) {
        out.jitter = rel * sigma2;
        return out;
      }
    }
  }
  throw IllConditionedError("Gram matrix not factorizable with jitter up to 1e-6 sigma^2");
}

GprPrediction gpr_predict(std::span<const double> record, double dt, const KernelSpec& spec,
                          double R, std::span<const double> test_steps) {
  spec.validate();
  if (!(R >= 0.0)) throw ParameterError("gpr_predict: R must be >= 0");
  GprPrediction out;
  out.test_points.assign(test_steps.begin(), test_steps.end());
  const Mat Kss = gram_matrix(spec, test_steps, test_steps, dt);
  if (record.empty()) {
    out.mean = Vec::Zero(static_cast<Eigen::Index>(test_steps.size()));
    out.cov = Kss;
    return out;
  }
  const Vec train = training_steps(record.size());
  const Mat K = training_gram(spec, record.size(), dt);
  const CholeskyResult chol = factorize_with_jitter(K, R, spec.sigma2);
  out.jitter = chol.jitter;
  const Mat Ks = gram_matrix(spec, std::span<const double>(train.data(), train.size()), test_steps, dt);
  const Vec y = to_vec(record);
  const Vec alpha = chol.llt.solve(y);
  out.mean = Ks.transpose() * alpha;
  const Mat V = chol.llt.matrixL().solve(Ks);
  out.cov = Kss - V.transpose() * V;
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  return out;
}

LmlResult log_marginal_likelihood(std::span<const double> record, double dt,
                                  const KernelSpec& spec, double R, bool with_gradient) {
  spec.validate();
  if (!(R >= 0.0)) throw ParameterError("log_marginal_likelihood: R must be >= 0");
  LmlResult out;
  if (record.empty()) return out;
  const std::size_t n = record.size();
  const Mat K = training_gram(spec, n, dt);
  const CholeskyResult chol = factorize_with_jitter(K, R, spec.sigma2);
  const Vec y = to_vec(record);
  const Vec alpha = chol.llt.solve(y);
  const double log_det = 2.0 * chol.llt.matrixLLT().diagonal().array().log().sum();
  out.value = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * n * std::log(2.0 * kPi);
  if (!with_gradient) return out;

  // grad_k = ½ tr(W ∂K/∂θ_k), W = ααᵀ - K⁻¹. Every ∂K is Toeplitz, so only
  // the sums of W along diagonals are needed.
  const Eigen::Index N = static_cast<Eigen::Index>(n);
  Mat W = chol.llt.solve(Mat::Identity(N, N));
  W = (alpha * alpha.transpose() - W).eval();
  Vec diag_sum = Vec::Zero(N);
  for (Eigen::Index j = 0; j < N; ++j) {
    for (Eigen::Index i = 0; i < N; ++i) diag_sum[std::abs(i - j)] += W(i, j);
  }
  for (Eigen::Index d = 0; d < N; ++d) {
    const auto g = kernel_grad_log(spec, d * dt);
    for (int k = 0; k < 4; ++k) out.grad[static_cast<std::size_t>(k)] += 0.5 * g[static_cast<std::size_t>(k)] * diag_sum[d];
  }
  // The jitter is held fixed; only R itself is a parameter.
  out.grad[4] = 0.5 * R * diag_sum[0];
  return out;
}

void HyperBounds::validate() const {
  for (const Range* r : {&sigma2, &length_scale, &f0_hz, &extra, &R}) {
    if (!(r->lo > 0.0) || !(r->hi >= r->lo) || !std::isfinite(r->hi)) {
      throw ParameterError("HyperBounds: ranges must be finite, positive and ordered");
    }
  }
}

HyperFit optimize_hyperparams(std::span<const double> record, double dt, const KernelSpec& initial,
                              double initial_R, const HyperBounds& bounds, std::uint64_t seed,
                              int num_starts) {
  bounds.validate();
  initial.validate();
  const std::array<const Range*, 5> ranges{&bounds.sigma2, &bounds.length_scale, &bounds.f0_hz,
                                           &bounds.extra, &bounds.R};
  std::array<bool, 5> active{};
  active[0] = !bounds.sigma2.pinned();
  active[1] = !bounds.length_scale.pinned();
  active[2] = initial.uses_f0() && !bounds.f0_hz.pinned();
  active[3] = initial.uses_extra() && !bounds.extra.pinned();
  active[4] = !bounds.R.pinned();

  using Point = std::array<double, 5>;  // log parameters
  auto clamp_point = [&](Point& p) {
    for (std::size_t k = 0; k < 5; ++k) {
      if (active[k]) p[k] = std::clamp(p[k], std::log(ranges[k]->lo), std::log(ranges[k]->hi));
    }
  };
  auto to_spec = [&](const Point& p, KernelSpec& s, double& R) {
    s = initial;
    s.sigma2 = std::exp(p[0]);
    s.length_scale = std::exp(p[1]);
    s.f0_hz = std::exp(p[2]);
    s.extra = std::exp(p[3]);
    R = std::exp(p[4]);
  };
  auto evaluate = [&](const Point& p, bool grad, LmlResult& res) {
    KernelSpec s;
    double R;
    to_spec(p, s, R);
    try {
      res = log_marginal_likelihood(record, dt, s, R, grad);
      return std::isfinite(res.value);
    } catch (const IllConditionedError&) {
      return false;
    }
  };

  Point init{std::log(initial.sigma2), std::log(initial.length_scale), std::log(initial.f0_hz),
             std::log(initial.extra), std::log(std::max(initial_R, bounds.R.lo))};
  // Pinned values come from the bounds; parameters the family does not use
  // keep the initial value.
  for (std::size_t k = 0; k < 5; ++k) {
    if (ranges[k]->pinned()) init[k] = std::log(ranges[k]->lo);
  }
  clamp_point(init);

  std::vector<Point> starts{init};
  Rng rng(derive_seed(seed, Stream::kGprStarts, 0));
  for (int s = 0; s < num_starts; ++s) {
    Point p = init;
    for (std::size_t k = 0; k < 5; ++k) {
      if (!active[k]) continue;
      const double lo = std::log(ranges[k]->lo), hi = std::log(ranges[k]->hi);
      p[k] = lo + (hi - lo) * uniform01(rng);
    }
    starts.push_back(p);
  }

  HyperFit best;
  best.lml = -std::numeric_limits<double>::infinity();
  Point best_point = init;
  bool any = false;
  for (const Point& start : starts) {
    Point p = start;
    LmlResult cur;
    if (!evaluate(p, true, cur)) continue;
    ++best.starts_succeeded;
    double step = 0.5;
    for (int it = 0; it < 200; ++it) {
      double gmax = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        if (active[k]) gmax = std::max(gmax, std::abs(cur.grad[k]));
      }
      if (gmax < 1e-10) break;
      bool accepted = false;
      for (int bt = 0; bt < 40; ++bt) {
        Point trial = p;
        for (std::size_t k = 0; k < 5; ++k) {
          if (active[k]) trial[k] += step * cur.grad[k] / gmax;
        }
        clamp_point(trial);
        LmlResult next;
        if (evaluate(trial, true, next) && next.value > cur.value) {
          const double gain = next.value - cur.value;
          p = trial;
          cur = next;
          step = std::min(step * 1.5, 2.0);
          accepted = true;
          if (gain <= 1e-10 * std::max(1.0, std::abs(cur.value))) it = 1 << 20;
          break;
        }
        step *= 0.5;
      }
      if (!accepted || step < 1e-10) break;
    }
    if (cur.value > best.lml) {
      best.lml = cur.value;
      best_point = p;
      any = true;
    }
  }
  if (!any) {
    best.warnings.push_back("optimize_hyperparams: every start failed; returning the initial point");
    best.spec = initial;
    best.R = initial_R;
    return best;
  }
  to_spec(best_point, best.spec, best.R);
  return best;
}

double compute_kappa(double f0_hz, double dt, int num_train) {
  if (!(f0_hz > 0.0) || !(dt > 0.0)) throw ParameterError("compute_kappa: f0 and dt must be > 0");
  return 1.0 / (dt * f0_hz) - num_train;
}

double f0_for_kappa(double kappa, double dt, int num_train) {
  const double steps = num_train + kappa;
  if (!(steps > 0.0)) throw ParameterError("f0_for_kappa: N_T + kappa must be > 0");
  return 1.0 / (dt * steps);
}

void write_prediction_csv(std::ostream& os, const GprPrediction& pred) {
  io::CsvWriter csv(os);
  csv.header({"n_test", "mean_rad", "var_rad2"});
  for (std::size_t k = 0; k < pred.test_points.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    csv.row(pred.test_points[k], pred.mean[i], pred.cov(i, i));
  }
}

}  // namespace qf
