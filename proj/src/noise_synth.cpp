#include "qforecast/noise_synth.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include <nlohmann/json.hpp>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"
#include "qforecast/random.hpp"

namespace qf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Rotation recurrence is re-anchored with exact cos/sin this often.
constexpr int kAnchorStride = 32;

}  // namespace

void NoiseSpec::validate() const {
  // alpha == 0 is accepted: it yields the zero process.
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("NoiseSpec: alpha must be >= 0");
  if (!(omega0_hz > 0.0)) throw ParameterError("NoiseSpec: omega0_hz must be > 0");
  if (num_components < 1) throw ParameterError("NoiseSpec: num_components must be >= 1");
  if (!std::isfinite(eta)) throw ParameterError("NoiseSpec: eta must be finite");
  if (!(dt > 0.0)) throw ParameterError("NoiseSpec: dt must be > 0");
  if (num_train < 0 || num_predict < 0) throw ParameterError("NoiseSpec: negative segment length");
  if (mean != 0.0) throw ParameterError("NoiseSpec: mean is fixed at 0");
}

double NoiseSpec::amplitude(int j) const {
  // j F(j) = j^(eta/2)
  return alpha * kTwoPi * omega0_hz * std::pow(static_cast<double>(j), 0.5 * eta);
}

TruthRealisation synthesize_truth_with_phases(const NoiseSpec& spec,
                                              std::span<const double> phases) {
  spec.validate();
  if (phases.size() != static_cast<std::size_t>(spec.num_components)) {
    throw ParameterError("synthesize_truth: expected one phase per component");
  }
  const int length = spec.num_train + spec.num_predict + 1;
  TruthRealisation out;
  out.values.assign(static_cast<std::size_t>(length), 0.0);
  out.phases.assign(phases.begin(), phases.end());
  out.num_train = spec.num_train;
  out.num_predict = spec.num_predict;

  const int n_first = -spec.num_train;
  for (int j = 1; j <= spec.num_components; ++j) {
    const double amp = spec.amplitude(j);
    if (amp == 0.0) continue;
    const double step_angle = kTwoPi * spec.omega0_hz * j * spec.dt;
    const double cs = std::cos(step_angle);
    const double sn = std::sin(step_angle);
    const double psi = phases[static_cast<std::size_t>(j - 1)];
    double c = 0.0;
    double s = 0.0;
    for (int k = 0; k < length; ++k) {
      if (k % kAnchorStride == 0) {
        const double angle = step_angle * static_cast<double>(n_first + k) + psi;
        c = std::cos(angle);
        s = std::sin(angle);
      } else {
        const double c_next = c * cs - s * sn;
        s = s * cs + c * sn;
        c = c_next;
      }
      out.values[static_cast<std::size_t>(k)] += amp * c;
    }
  }
  return out;
}

TruthRealisation synthesize_truth(const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<double> phases(static_cast<std::size_t>(spec.num_components));
  for (auto& p : phases) p = kTwoPi * uniform01(rng);
  TruthRealisation out = synthesize_truth_with_phases(spec, phases);
  out.seed = seed;
  return out;
}

TruthRealisation truth_from_values(std::vector<double> values, int num_train, int num_predict,
                                   std::uint64_t seed) {
  if (values.size() != static_cast<std::size_t>(num_train + num_predict + 1)) {
    throw ShapeError("truth_from_values: length must be num_train + num_predict + 1");
  }
  TruthRealisation out;
  out.values = std::move(values);
  out.num_train = num_train;
  out.num_predict = num_predict;
  out.seed = seed;
  return out;
}

double analytic_covariance(const NoiseSpec& spec, int lag_steps) {
  spec.validate();
  if (lag_steps < 0) throw ParameterError("analytic_covariance: lag must be >= 0");
  double total = 0.0;
  for (int j = 1; j <= spec.num_components; ++j) {
    const double amp = spec.amplitude(j);
    total += 0.5 * amp * amp * std::cos(kTwoPi * spec.omega0_hz * j * lag_steps * spec.dt);
  }
  return total;
}

double truth_spread(const TruthRealisation& realisation) {
  const auto train = realisation.training();
  if (train.size() < 2) throw ParameterError("truth_spread: need at least 2 training samples");
  double mean = 0.0;
  for (double v : train) mean += v;
  mean /= static_cast<double>(train.size());
  double ss = 0.0;
  for (double v : train) ss += (v - mean) * (v - mean);
  return 3.0 * std::sqrt(ss / static_cast<double>(train.size() - 1));
}

void to_json(nlohmann::json& j, const NoiseSpec& spec) {
  j = nlohmann::json{{"alpha", spec.alpha},         {"omega0_hz", spec.omega0_hz},
                     {"num_components", spec.num_components},
                     {"eta", spec.eta},             {"dt", spec.dt},
                     {"num_train", spec.num_train}, {"num_predict", spec.num_predict}};
}

void from_json(const nlohmann::json& j, NoiseSpec& spec) {
  io::reject_unknown_keys(
      j, {"alpha", "omega0_hz", "num_components", "eta", "dt", "num_train", "num_predict"},
      "NoiseSpec");
  try {
    spec.alpha = j.at("alpha").get<double>();
    spec.omega0_hz = j.at("omega0_hz").get<double>();
    spec.num_components = j.at("num_components").get<int>();
    spec.eta = j.at("eta").get<double>();
    spec.dt = j.at("dt").get<double>();
    spec.num_train = j.at("num_train").get<int>();
    spec.num_predict = j.at("num_predict").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("NoiseSpec: ") + e.what());
  }
  spec.mean = 0.0;
  spec.validate();
}

void write_truth_csv(std::ostream& os, const TruthRealisation& realisation) {
  io::CsvWriter csv(os);
  csv.header({"n", "f_rad"});
  for (std::size_t k = 0; k < realisation.values.size(); ++k) {
    csv.row(static_cast<int>(k) - realisation.num_train, realisation.values[k]);
  }
}

}  // namespace qf
