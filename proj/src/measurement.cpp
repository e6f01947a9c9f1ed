#include "qforecast/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qforecast/errors.hpp"
#include "qforecast/io.hpp"

namespace qf {

void MeasurementSpec::validate() const {
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
    throw ParameterError("MeasurementSpec: noise_level must be >= 0");
  }
}

double derive_R(const TruthRealisation& realisation, double noise_level) {
  if (!(noise_level >= 0.0)) throw ParameterError("derive_R: noise_level must be >= 0");
  if (noise_level == 0.0) return 0.0;
  const double spread = truth_spread(realisation);
  if (spread == 0.0) throw DegenerateInputError("derive_R: truth spread is zero");
  const double s = noise_level * spread;
  return s * s;
}

LinearRecord linearize(const TruthRealisation& realisation, const MeasurementSpec& spec) {
  spec.validate();
  LinearRecord rec;
  rec.noise_variance = derive_R(realisation, spec.noise_level);
  const double sd = std::sqrt(rec.noise_variance);
  const auto train = realisation.training();
  rec.values.assign(train.begin(), train.end());
  if (sd > 0.0) {
    Rng rng(derive_seed(spec.seed, Stream::kMeasurement, 0));
    for (double& y : rec.values) y += sd * standard_normal(rng);
  }
  return rec;
}

double born_probability(double f) {
  const double c = std::cos(0.5 * f);
  return c * c;
}

int quantize(double bias, Rng& rng, bool* clamped) {
  const double b = std::clamp(bias, -0.5, 0.5);
  if (clamped) *clamped = (b != bias);
  const double p = b + 0.5;
  if (p >= 1.0) return 1;
  if (p <= 0.0) return 0;
  return uniform01(rng) < p ? 1 : 0;
}

BinaryRecord make_binary_record(const TruthRealisation& realisation, const MeasurementSpec& spec) {
  spec.validate();
  BinaryRecord rec;
  rec.noise_variance = derive_R(realisation, spec.noise_level);
  const double sd = std::sqrt(rec.noise_variance);
  Rng noise_rng(derive_seed(spec.seed, Stream::kMeasurement, 1));
  Rng coin_rng(derive_seed(spec.seed, Stream::kQuantizer, 0));
  const auto train = realisation.training();
  rec.bits.reserve(train.size());
  for (double f : train) {
    double bias = 0.5 * std::cos(f);
    if (sd > 0.0) bias += sd * standard_normal(noise_rng);
    bool clamped = false;
    rec.bits.push_back(quantize(bias, coin_rng, &clamped));
    if (clamped) ++rec.clamp_events;
  }
  return rec;
}

void write_linear_csv(std::ostream& os, const LinearRecord& record) {
  io::CsvWriter csv(os);
  csv.header({"n", "y_rad"});
  const int n0 = -static_cast<int>(record.values.size());
  for (std::size_t k = 0; k < record.values.size(); ++k) {
    csv.row(n0 + static_cast<int>(k), record.values[k]);
  }
}

void write_binary_csv(std::ostream& os, const BinaryRecord& record) {
  io::CsvWriter csv(os);
  csv.header({"n", "d_bit"});
  const int n0 = -static_cast<int>(record.bits.size());
  for (std::size_t k = 0; k < record.bits.size(); ++k) {
    csv.row(n0 + static_cast<int>(k), record.bits[k]);
  }
}

double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

}  // namespace qf
