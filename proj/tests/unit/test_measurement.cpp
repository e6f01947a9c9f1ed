#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "qforecast/errors.hpp"
#include "qforecast/measurement.hpp"
#include "qforecast/noise_synth.hpp"
#include "qforecast/random.hpp"

using namespace qf;

namespace {

constexpr double kPi = std::numbers::pi;

TruthRealisation constant_truth(double f, int N) {
  return truth_from_values(std::vector<double>(static_cast<std::size_t>(N + 1), f), N, 0);
}

TruthRealisation flat_top_truth(int N, std::uint64_t seed) {
  NoiseSpec s;
  s.omega0_hz = 0.497;
  s.num_components = 20;
  s.num_train = N;
  s.num_predict = 5;
  return synthesize_truth(s, seed);
}

// Independent two-pass standard deviation.
double std_oracle(std::span<const double> v) {
  long double sum = 0.0L;
  for (double x : v) sum += x;
  const long double mean = sum / v.size();
  long double ss = 0.0L;
  for (double x : v) ss += (x - mean) * (x - mean);
  return static_cast<double>(std::sqrt(ss / (v.size() - 1)));
}

}  // namespace

TEST_CASE("derive_R") {
  const auto t = flat_top_truth(2000, 1);
  CHECK(derive_R(t, 0.0) == 0.0);
  const double sd = std_oracle(t.training());
  CHECK(derive_R(t, 0.01) == doctest::Approx(std::pow(0.01 * 3.0 * sd, 2)).epsilon(1e-12));
  // spread 3 and N.L. 0.1: a two-point record with sample std 1
  const auto two = truth_from_values({-std::sqrt(0.5), std::sqrt(0.5), 0.0}, 2, 0);
  CHECK(truth_spread(two) == doctest::Approx(3.0));
  CHECK(derive_R(two, 0.1) == doctest::Approx(0.09));
  CHECK_THROWS_AS(derive_R(constant_truth(1.0, 10), 0.1), DegenerateInputError);
}

TEST_CASE("linearize") {
  const auto t = flat_top_truth(100000, 2);
  MeasurementSpec none{0.0, 0.0, 5};
  const auto exact = linearize(t, none);
  REQUIRE(exact.values.size() == 100000);
  for (std::size_t k = 0; k < exact.values.size(); ++k) CHECK(exact.values[k] == t.values[k]);

  MeasurementSpec ms{0.1, 0.0, 5};
  const auto rec = linearize(t, ms);
  const double R = rec.noise_variance;
  double m = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < rec.values.size(); ++k) {
    const double v = rec.values[k] - t.values[k];
    m += v;
    m2 += v * v;
  }
  const double n = rec.values.size();
  m /= n;
  const double var = m2 / n - m * m;
  CHECK(std::abs(m) < 3.0 * std::sqrt(R / n));
  CHECK(std::abs(var - R) < 3.0 * R * std::sqrt(2.0 / n));
  CHECK(linearize(t, ms).values == rec.values);
}

TEST_CASE("born probability") {
  CHECK(born_probability(0.0) == doctest::Approx(1.0));
  CHECK(born_probability(kPi) == doctest::Approx(0.0).scale(1.0));
  CHECK(born_probability(kPi / 2) == doctest::Approx(0.5));
  for (double f = -7.0; f < 7.0; f += 0.37) {
    CHECK(born_probability(f) == born_probability(-f));
    CHECK(born_probability(f) >= 0.0);
    CHECK(born_probability(f) <= 1.0);
    const double p0 = 1.0 - born_probability(f);
    const double s = std::sin(0.5 * f);
    CHECK(p0 == doctest::Approx(s * s).scale(1.0));
  }
}

TEST_CASE("quantize") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    CHECK(quantize(0.5, rng) == 1);
    CHECK(quantize(-0.5, rng) == 0);
  }
  bool clamped = false;
  CHECK(quantize(0.7, rng, &clamped) == 1);
  CHECK(clamped);
  CHECK(quantize(-3.0, rng, &clamped) == 0);
  CHECK(clamped);
  quantize(0.1, rng, &clamped);
  CHECK_FALSE(clamped);
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += quantize(0.0, rng);
  CHECK(std::abs(ones / double(n) - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("binary records") {
  MeasurementSpec ms{0.0, 0.0, 3};
  const auto up = make_binary_record(constant_truth(0.0, 500), ms);
  for (int b : up.bits) CHECK(b == 1);
  const auto down = make_binary_record(constant_truth(kPi, 500), ms);
  for (int b : down.bits) CHECK(b == 0);
  const int n = 100000;
  const auto half = make_binary_record(constant_truth(kPi / 2, n), ms);
  long ones = 0;
  for (int b : half.bits) ones += b;
  CHECK(std::abs(ones / double(n) - 0.5) < 3.0 * std::sqrt(0.25 / n));
  CHECK(half.clamp_events == 0);

  for (double f : {0.4, 1.3, 2.2}) {
    const auto r = make_binary_record(constant_truth(f, n), ms);
    long k = 0;
    for (int b : r.bits) k += b;
    const double p = born_probability(f);
    CHECK(std::abs(k / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("binary record noise is clamped and counted") {
  const auto t = flat_top_truth(5000, 4);
  MeasurementSpec ms{0.25, 0.0, 8};
  const auto r = make_binary_record(t, ms);
  CHECK(r.noise_variance == doctest::Approx(derive_R(t, 0.25)));
  CHECK(r.clamp_events > 0);
  for (int b : r.bits) CHECK((b == 0 || b == 1));
  CHECK(make_binary_record(t, ms).bits == r.bits);
}

TEST_CASE("record csv headers") {
  LinearRecord lin{{1.0, 2.0}, 0.0};
  std::ostringstream a;
  write_linear_csv(a, lin);
  CHECK(a.str().rfind("n,y_rad\n-2,1\n-1,2\n", 0) == 0);
  BinaryRecord bin;
  bin.bits = {1, 0, 1};
  std::ostringstream b;
  write_binary_csv(b, bin);
  CHECK(b.str() == "n,d_bit\n-3,1\n-2,0\n-1,1\n");
}

TEST_CASE("negative noise level is rejected") {
  MeasurementSpec ms{-0.1, 0.0, 0};
  CHECK_THROWS_AS(ms.validate(), ParameterError);
}
