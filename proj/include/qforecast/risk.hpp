#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace qf {

// Members x steps.
using Ensemble = std::vector<std::vector<double>>;

// ⟨(f_n - f̂_n)²⟩ over members, per step.
std::vector<double> bayes_risk(const Ensemble& truths, const Ensemble& predictions);

struct RiskCurve {
  std::vector<int> steps;
  std::vector<double> values;
  int ensemble_size = 0;
};

// risk / ⟨(f_n - mean)²⟩ per step.
RiskCurve normalized_risk(std::span<const double> risk, const Ensemble& truths,
                          std::vector<int> steps, double mean = 0.0);

// Same, with the ensemble mean of each step as the reference.
RiskCurve normalized_risk_centered(std::span<const double> risk, const Ensemble& truths,
                                   std::vector<int> steps);

// Largest n* >= 1 with risk(n) < threshold for every entry at step <= n*;
// 0 if none.
int prediction_horizon(const RiskCurve& curve, double threshold = 1.0);

// Same rule on a bare sequence whose first entry is step `first_step`.
int prediction_horizon(std::span<const double> values, double threshold = 1.0, int first_step = 1);

struct TuningOptions {
  int K = 40;
  double decade_range = 5.0;  // samples span [v 10^-d, v 10^d]
  std::uint64_t seed = 0;
  int threads = 1;
};

// Losses (state estimation, prediction) for one (σ², R) pair. Throws
// NumericalError for an unstable filter.
using TrialEvaluator = std::function<std::pair<double, double>(double sigma2, double R)>;

struct TuningResult {
  std::vector<double> sigma2;
  std::vector<double> R;
  std::vector<double> loss_state;  // NaN for unstable trials
  std::vector<double> loss_pred;
  std::vector<int> low_state;  // indices
  std::vector<int> low_pred;
  int chosen = -1;
  double sigma2_star = 0.0;
  double R_star = 0.0;
  bool failed = true;
  int unstable = 0;
  double variance_scale = 0.0;
};

// Pure selection step over already-evaluated losses.
TuningResult select_from_losses(std::vector<double> sigma2, std::vector<double> R,
                                std::vector<double> loss_state, std::vector<double> loss_pred);

// Log-uniform (σ², R) sampling around `variance_scale`, evaluation, selection.
TuningResult tune_sigma_R(const TrialEvaluator& evaluate, double variance_scale,
                          const TuningOptions& options);

void to_json(nlohmann::json& j, const TuningResult& result);

// Columns n, norm_risk.
void write_risk_csv(std::ostream& os, const RiskCurve& curve);

}  // namespace qf
