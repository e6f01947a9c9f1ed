#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "qforecast/noise_synth.hpp"
#include "qforecast/random.hpp"

namespace qf {

struct MeasurementSpec {
  double noise_level = 0.01;  // N.L. as a fraction, not percent
  double tau_info = 0.0;      // Ramsey duration, metadata only
  std::uint64_t seed = 0;

  void validate() const;
};

// y_n for n = -num_train .. -1
struct LinearRecord {
  std::vector<double> values;
  double noise_variance = 0.0;
};

struct BinaryRecord {
  std::vector<int> bits;
  double noise_variance = 0.0;
  long clamp_events = 0;
};

// R = (noise_level * truth_spread)^2
double derive_R(const TruthRealisation& realisation, double noise_level);

LinearRecord linearize(const TruthRealisation& realisation, const MeasurementSpec& spec);

// Pr(d = 1 | f) = cos^2(f / 2)
double born_probability(double f);

// Bernoulli draw with p = clamp(bias, -0.5, 0.5) + 0.5. Sets *clamped when the
// input was out of range.
int quantize(double bias, Rng& rng, bool* clamped = nullptr);

BinaryRecord make_binary_record(const TruthRealisation& realisation, const MeasurementSpec& spec);

void write_linear_csv(std::ostream& os, const LinearRecord& record);
void write_binary_csv(std::ostream& os, const BinaryRecord& record);

double sample_variance(const std::vector<double>& values);

}  // namespace qf
