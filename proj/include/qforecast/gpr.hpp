#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qforecast/kalman.hpp"

namespace qf {

enum class KernelFamily { PER, RBF, RQ, MAT32, QPER };

const char* to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// PER:   σ² exp(-2 sin²(π f0 ν) / l²), l dimensionless
// RBF:   σ² exp(-ν² / 2l²)
// RQ:    σ² (1 + ν² / (2 α l²))^(-α), α = extra
// MAT32: σ² (1 + √3|ν|/l) exp(-√3|ν|/l)
// QPER:  RBF envelope with length `extra` (s) times PER
// ν in seconds.
struct KernelSpec {
  KernelFamily family = KernelFamily::PER;
  double sigma2 = 1.0;
  double length_scale = 1.0;
  double f0_hz = 1.0;
  double extra = 1.0;

  void validate() const;
  bool uses_f0() const { return family == KernelFamily::PER || family == KernelFamily::QPER; }
  bool uses_extra() const { return family == KernelFamily::RQ || family == KernelFamily::QPER; }
};

void to_json(nlohmann::json& j, const KernelSpec& spec);
void from_json(const nlohmann::json& j, KernelSpec& spec);

double kernel_eval(const KernelSpec& spec, double lag_s);

// Derivatives of the kernel value with respect to
// (log σ², log l, log f0, log extra); unused entries are 0.
std::array<double, 4> kernel_grad_log(const KernelSpec& spec, double lag_s);

// PER kernel with exp(cos x / l²) expanded to order M and regrouped as a
// cosine series σ² (p_0 + Σ_{j=1..M} p_j cos(j x)), x = 2π f0 ν.
double periodic_kernel_truncated(const KernelSpec& spec, double lag_s, int M);

// Cosine-series coefficients (p_0, p_1, ..., p_M) without the σ² factor.
std::vector<double> periodic_series_coefficients(double length_scale, int M);

// Gram matrix on integer step grids (time = step * dt).
Mat gram_matrix(const KernelSpec& spec, std::span<const double> steps_a,
                std::span<const double> steps_b, double dt);

// Cholesky of K + R I using the jitter ladder 0, 1e-12, 1e-10, 1e-8, 1e-6 (x σ²).
struct CholeskyResult {
  Eigen::LLT<Mat> llt;
  double jitter = 0.0;
};
CholeskyResult factorize_with_jitter(const Mat& K, double R, double sigma2);

struct GprPrediction {
  std::vector<double> test_points;
  Vec mean;
  Mat cov;
  double jitter = 0.0;
};

// Training samples sit at steps n = -N .. -1 (N = record length), zero prior mean.
GprPrediction gpr_predict(std::span<const double> record, double dt, const KernelSpec& spec,
                          double R, std::span<const double> test_steps);

struct LmlResult {
  double value = 0.0;
  // d/d log of (σ², l, f0, extra, R)
  std::array<double, 5> grad{};
};

LmlResult log_marginal_likelihood(std::span<const double> record, double dt,
                                  const KernelSpec& spec, double R, bool with_gradient = true);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool pinned() const { return lo == hi; }
};

struct HyperBounds {
  Range sigma2{1e-4, 1e4};
  Range length_scale{1e-3, 1e2};
  Range f0_hz{0.1, 10.0};
  Range extra{1e-2, 1e2};
  Range R{1e-8, 1e2};
  void validate() const;
};

struct HyperFit {
  KernelSpec spec;
  double R = 0.0;
  double lml = 0.0;
  int starts_succeeded = 0;
  std::vector<std::string> warnings;
};

HyperFit optimize_hyperparams(std::span<const double> record, double dt, const KernelSpec& initial,
                              double initial_R, const HyperBounds& bounds, std::uint64_t seed,
                              int num_starts = 8);

// κ = 1/(dt f0) - N_T, in steps.
double compute_kappa(double f0_hz, double dt, int num_train);
// Inverse: the f0 that yields κ.
double f0_for_kappa(double kappa, double dt, int num_train);

// Columns n_test, mean_rad, var_rad2.
void write_prediction_csv(std::ostream& os, const GprPrediction& pred);

}  // namespace qf
