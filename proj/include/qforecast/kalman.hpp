#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace qf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Dynamics Φ. The structured forms keep predict at O(dim^2).
struct DenseDynamics {
  Mat phi;
};
// AR(q) companion matrix: top row phi, ones on the subdiagonal.
struct CompanionDynamics {
  Vec phi;
};
// Block-diagonal 2x2 rotations [[c, -s], [s, c]], one per angle (rad/step).
struct BlockRotationDynamics {
  Vec angles;
};
using Dynamics = std::variant<DenseDynamics, CompanionDynamics, BlockRotationDynamics>;

// Process noise Q = σ² Γ Γᵀ.
struct LeadingUnitShaper {};  // Γ = e1
struct IdentityShaper {};     // Q = σ² I
struct ConstantShaper {
  Vec gamma;
};
// Per 2-D block j: Γ_j = Θ_j x_j / |x_j| using the previous posterior.
// Falls back to Θ_j (1,1)/√2 when |x_j| < 1e-12.
struct StateDependentShaper {};
using NoiseShaper = std::variant<LeadingUnitShaper, IdentityShaper, ConstantShaper,
                                 StateDependentShaper>;

struct LinearMeasurement {
  Vec H;
};
struct NonlinearMeasurement {
  std::function<double(const Vec&)> h;
  std::function<Vec(const Vec&)> jacobian;
};
using Measurement = std::variant<LinearMeasurement, NonlinearMeasurement>;

struct KalmanModel {
  int dim = 1;
  Dynamics dynamics = DenseDynamics{Mat::Identity(1, 1)};
  NoiseShaper shaper = LeadingUnitShaper{};
  double process_scale = 0.0;  // σ²
  double meas_noise = 0.0;     // R
  Measurement measure = LinearMeasurement{Vec::Ones(1)};

  void validate() const;
  Vec propagate(const Vec& x) const;
  double h(const Vec& x) const;
  Vec jacobian(const Vec& x) const;
  // Materialized Φ, for tests and small models.
  Mat transition_matrix() const;
};

struct KalmanState {
  Vec mean;
  Mat cov;
  long step = 0;
};

KalmanState predict_step(const KalmanState& posterior, const KalmanModel& model);

struct UpdateResult {
  KalmanState posterior;
  Vec gain;
  double innovation = 0.0;
  double predicted = 0.0;  // ŷ(−)
};

UpdateResult update_step(const KalmanState& prior, double y, const KalmanModel& model);

// Update with an externally formed innovation (QKF residuals); gain uses the
// Jacobian at the prior mean.
UpdateResult update_with_innovation(const KalmanState& prior, double innovation,
                                    const KalmanModel& model);

struct FilterOptions {
  bool store_means = true;
  bool store_covariances = false;
  bool check_psd = false;
  // When > 0 and the model is time invariant, hold the gain fixed once the
  // prior covariance changes by less than this relative amount in one step.
  double freeze_tol = 0.0;
  // Keep a copy of the posterior after this many samples (1-based; <= 0 off).
  long capture_after = 0;
};

struct FilterTrajectory {
  std::vector<Vec> means;  // posterior x̂(+)
  std::vector<Mat> covs;   // posterior P(+), only if requested
  std::vector<double> y_hat_minus;
  std::vector<double> y_hat_plus;  // h(x̂(+))
  std::vector<double> gain0;
  std::vector<double> innovations;
  KalmanState last;
  long first_step = 0;
  bool psd_ok = true;
  double worst_asymmetry = 0.0;
  double worst_min_eig = 0.0;  // most negative eigenvalue / trace seen
  bool gain_frozen = false;
  std::optional<KalmanState> captured;
};

// Predict then update for every record sample. `init` is the posterior before
// the first sample; its step is advanced by one per sample.
FilterTrajectory run_filter(std::span<const double> record, const KalmanModel& model,
                            const KalmanState& init, const FilterOptions& options = {});

struct ForecastResult {
  std::vector<double> values;     // h(x̂) for k = 1..horizon
  std::vector<double> variances;  // H P Hᵀ at the same steps
};

ForecastResult forecast(const KalmanState& last_posterior, const KalmanModel& model, int horizon);

// Mean-only forecast h(Φ^k x̂), k = 1..horizon.
std::vector<double> forecast_mean(const Vec& last_mean, const KalmanModel& model, int horizon);

// Throws NumericalError when any entry is non-finite or exceeds 1e12.
void check_finite(const KalmanState& state);

// Symmetric-PSD check: |P - Pᵀ| and the smallest eigenvalue relative to the trace.
struct PsdReport {
  double asymmetry = 0.0;
  double min_eig_rel = 0.0;
  bool ok = true;
};
PsdReport psd_report(const Mat& P);

void write_trajectory_csv(std::ostream& os, const FilterTrajectory& traj);

}  // namespace qf
