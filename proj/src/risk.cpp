#include "qforecast/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"
#include "qforecast/parallel.hpp"
#include "qforecast/random.hpp"

namespace qf {

namespace {

void check_shapes(const Ensemble& a, const Ensemble& b) {
  if (a.size() != b.size()) throw ShapeError("ensemble sizes differ");
  if (a.empty()) throw ShapeError("empty ensemble");
  const std::size_t steps = a.front().size();
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (a[m].size() != steps || b[m].size() != steps) throw ShapeError("step counts differ");
  }
}

double finite_median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<double> bayes_risk(const Ensemble& truths, const Ensemble& predictions) {
  check_shapes(truths, predictions);
  const std::size_t steps = truths.front().size();
  std::vector<double> risk(steps, 0.0);
  for (std::size_t m = 0; m < truths.size(); ++m) {
    for (std::size_t n = 0; n < steps; ++n) {
      const double e = truths[m][n] - predictions[m][n];
      risk[n] += e * e;
    }
  }
  for (double& r : risk) r /= static_cast<double>(truths.size());
  return risk;
}

RiskCurve normalized_risk(std::span<const double> risk, const Ensemble& truths,
                          std::vector<int> steps, double mean) {
  if (truths.empty()) throw ShapeError("normalized_risk: empty ensemble");
  const std::size_t n_steps = risk.size();
  if (steps.size() != n_steps) throw ShapeError("normalized_risk: steps and risk differ in length");
  RiskCurve out;
  out.steps = std::move(steps);
  out.ensemble_size = static_cast<int>(truths.size());
  out.values.resize(n_steps);
  for (std::size_t n = 0; n < n_steps; ++n) {
    double denom = 0.0;
    for (const auto& f : truths) {
      if (f.size() != n_steps) throw ShapeError("normalized_risk: truth length");
      const double d = f[n] - mean;
      denom += d * d;
    }
    denom /= static_cast<double>(truths.size());
    if (!(denom > 0.0)) throw DegenerateInputError("normalized_risk: zero truth variance");
    out.values[n] = risk[n] / denom;
  }
  return out;
}

RiskCurve normalized_risk_centered(std::span<const double> risk, const Ensemble& truths,
                                   std::vector<int> steps) {
  if (truths.empty()) throw ShapeError("normalized_risk: empty ensemble");
  const std::size_t n_steps = risk.size();
  if (steps.size() != n_steps) throw ShapeError("normalized_risk: steps and risk differ in length");
  RiskCurve out;
  out.steps = std::move(steps);
  out.ensemble_size = static_cast<int>(truths.size());
  out.values.resize(n_steps);
  const double m = static_cast<double>(truths.size());
  for (std::size_t n = 0; n < n_steps; ++n) {
    double mu = 0.0;
    for (const auto& f : truths) {
      if (f.size() != n_steps) throw ShapeError("normalized_risk: truth length");
      mu += f[n];
    }
    mu /= m;
    double denom = 0.0;
    for (const auto& f : truths) denom += (f[n] - mu) * (f[n] - mu);
    denom /= m;
    if (!(denom > 0.0)) throw DegenerateInputError("normalized_risk: zero truth variance");
    out.values[n] = risk[n] / denom;
  }
  return out;
}

int prediction_horizon(const RiskCurve& curve, double threshold) {
  if (!(threshold > 0.0)) throw ParameterError("prediction_horizon: threshold must be > 0");
  int horizon = 0;
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    if (!(curve.values[k] < threshold)) break;
    if (curve.steps[k] >= 1) horizon = curve.steps[k];
  }
  return horizon;
}

int prediction_horizon(std::span<const double> values, double threshold, int first_step) {
  RiskCurve c;
  c.values.assign(values.begin(), values.end());
  c.steps.resize(values.size());
  std::iota(c.steps.begin(), c.steps.end(), first_step);
  return prediction_horizon(c, threshold);
}

TuningResult select_from_losses(std::vector<double> sigma2, std::vector<double> R,
                                std::vector<double> loss_state, std::vector<double> loss_pred) {
  const std::size_t K = sigma2.size();
  if (R.size() != K || loss_state.size() != K || loss_pred.size() != K) {
    throw ShapeError("select_from_losses: arrays differ in length");
  }
  TuningResult out;
  out.sigma2 = std::move(sigma2);
  out.R = std::move(R);
  out.loss_state = std::move(loss_state);
  out.loss_pred = std::move(loss_pred);
  for (std::size_t k = 0; k < K; ++k) {
    if (!std::isfinite(out.loss_state[k]) || !std::isfinite(out.loss_pred[k])) {
      out.loss_state[k] = std::numeric_limits<double>::quiet_NaN();
      out.loss_pred[k] = std::numeric_limits<double>::quiet_NaN();
      ++out.unstable;
    }
  }
  if (out.unstable == static_cast<int>(K)) throw TuningError("every tuning trial was unstable");

  const double med_state = finite_median(out.loss_state);
  const double med_pred = finite_median(out.loss_pred);
  for (std::size_t k = 0; k < K; ++k) {
    if (out.loss_state[k] < 0.1 * med_state) out.low_state.push_back(static_cast<int>(k));
    if (out.loss_pred[k] < 0.1 * med_pred) out.low_pred.push_back(static_cast<int>(k));
  }

  auto better = [&](int a, int b) {
    const double la = out.loss_state[a], lb = out.loss_state[b];
    if (la != lb) return la < lb;
    if (out.R[a] != out.R[b]) return out.R[a] < out.R[b];
    return out.sigma2[a] < out.sigma2[b];
  };
  std::vector<int> candidates = out.low_state;
  if (candidates.empty()) {
    for (std::size_t k = 0; k < K; ++k) {
      if (std::isfinite(out.loss_state[k])) candidates.push_back(static_cast<int>(k));
    }
  }
  out.chosen = *std::min_element(candidates.begin(), candidates.end(), better);
  out.sigma2_star = out.sigma2[out.chosen];
  out.R_star = out.R[out.chosen];

  std::vector<int> common;
  std::set_intersection(out.low_state.begin(), out.low_state.end(), out.low_pred.begin(),
                        out.low_pred.end(), std::back_inserter(common));
  out.failed = common.empty();
  return out;
}

TuningResult tune_sigma_R(const TrialEvaluator& evaluate, double variance_scale,
                          const TuningOptions& options) {
  if (options.K < 10) throw ParameterError("tune_sigma_R: K must be >= 10");
  if (!(variance_scale > 0.0)) throw DegenerateInputError("tune_sigma_R: zero record variance");
  if (!(options.decade_range > 0.0)) throw ParameterError("tune_sigma_R: decade_range must be > 0");
  const std::size_t K = static_cast<std::size_t>(options.K);
  std::vector<double> sigma2(K), R(K);
  Rng rng(derive_seed(options.seed, Stream::kTuning, 0));
  const double span = 2.0 * options.decade_range;
  const double base = std::log10(variance_scale) - options.decade_range;
  for (std::size_t k = 0; k < K; ++k) {
    sigma2[k] = std::pow(10.0, base + span * uniform01(rng));
    R[k] = std::pow(10.0, base + span * uniform01(rng));
  }
  std::vector<double> ls(K), lp(K);
  parallel_for(K, options.threads, [&](std::size_t k) {
    try {
      const auto [a, b] = evaluate(sigma2[k], R[k]);
      ls[k] = a;
      lp[k] = b;
    } catch (const NumericalError&) {
      ls[k] = lp[k] = std::numeric_limits<double>::quiet_NaN();
    }
  });
  TuningResult out = select_from_losses(std::move(sigma2), std::move(R), std::move(ls), std::move(lp));
  out.variance_scale = variance_scale;
  return out;
}

void to_json(nlohmann::json& j, const TuningResult& r) {
  auto arr = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) {
      if (std::isfinite(x)) a.push_back(x);
      else a.push_back(nullptr);
    }
    return a;
  };
  nlohmann::json flags = nlohmann::json::array();
  for (std::size_t k = 0; k < r.sigma2.size(); ++k) {
    const int ki = static_cast<int>(k);
    flags.push_back({
        {"stable", std::isfinite(r.loss_state[k])},
        {"low_state", std::binary_search(r.low_state.begin(), r.low_state.end(), ki)},
        {"low_pred", std::binary_search(r.low_pred.begin(), r.low_pred.end(), ki)},
        {"chosen", ki == r.chosen},
    });
  }
  std::vector<double> sigma(r.sigma2.size());
  std::transform(r.sigma2.begin(), r.sigma2.end(), sigma.begin(), [](double s) { return std::sqrt(s); });
  j = nlohmann::json{{"sigma", arr(sigma)},
                     {"sigma2", arr(r.sigma2)},
                     {"R", arr(r.R)},
                     {"loss_state", arr(r.loss_state)},
                     {"loss_pred", arr(r.loss_pred)},
                     {"flags", flags},
                     {"chosen", r.chosen},
                     {"sigma_star", std::sqrt(r.sigma2_star)},
                     {"sigma2_star", r.sigma2_star},
                     {"R_star", r.R_star},
                     {"failed", r.failed},
                     {"unstable_trials", r.unstable},
                     {"variance_scale", r.variance_scale}};
}

void write_risk_csv(std::ostream& os, const RiskCurve& curve) {
  io::CsvWriter csv(os);
  csv.header({"n", "norm_risk"});
  for (std::size_t k = 0; k < curve.values.size(); ++k) csv.row(curve.steps[k], curve.values[k]);
}

}  // namespace qf
