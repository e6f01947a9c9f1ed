#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "qforecast/errors.hpp"
#include "qforecast/random.hpp"
#include "qforecast/risk.hpp"

using namespace qf;

namespace {

Ensemble random_ensemble(int M, int steps, std::uint64_t seed) {
  Rng rng(seed);
  Ensemble e(M, std::vector<double>(steps));
  for (auto& row : e) {
    for (double& v : row) v = 2.0 * standard_normal(rng);
  }
  return e;
}

std::vector<int> iota_steps(int n, int first = 0) {
  std::vector<int> s(n);
  for (int k = 0; k < n; ++k) s[k] = first + k;
  return s;
}

}  // namespace

TEST_CASE("bayes risk") {
  const Ensemble t = random_ensemble(7, 12, 1);
  for (double r : bayes_risk(t, t)) CHECK(r == 0.0);
  const Ensemble zero(7, std::vector<double>(12, 0.0));
  const auto r0 = bayes_risk(t, zero);
  for (int n = 0; n < 12; ++n) {
    double s = 0.0;
    for (const auto& row : t) s += row[n] * row[n];
    CHECK(r0[n] == doctest::Approx(s / 7.0));
  }
  const Ensemble a{{1.0}, {-1.0}};
  const Ensemble b{{0.0}, {0.0}};
  CHECK(bayes_risk(a, b)[0] == 1.0);
  CHECK_THROWS_AS(bayes_risk(a, Ensemble{{0.0}}), ShapeError);
  CHECK_THROWS_AS(bayes_risk(a, Ensemble{{0.0, 1.0}, {0.0, 1.0}}), ShapeError);
}

TEST_CASE("normalized risk") {
  const Ensemble t = random_ensemble(9, 20, 2);
  const Ensemble zero(9, std::vector<double>(20, 0.0));
  const auto one = normalized_risk(bayes_risk(t, zero), t, iota_steps(20));
  for (double v : one.values) CHECK(v == 1.0);
  CHECK(one.ensemble_size == 9);
  const auto perfect = normalized_risk(bayes_risk(t, t), t, iota_steps(20));
  for (double v : perfect.values) CHECK(v == 0.0);
  Ensemble half = t;
  for (auto& row : half) {
    for (double& v : row) v *= 0.5;
  }
  for (double v : normalized_risk(bayes_risk(t, half), t, iota_steps(20)).values) {
    CHECK(v == doctest::Approx(0.25));
  }
  const Ensemble flat(3, std::vector<double>(2, 0.0));
  CHECK_THROWS_AS(normalized_risk(bayes_risk(flat, flat), flat, iota_steps(2)), DegenerateInputError);
  CHECK_THROWS_AS(normalized_risk(bayes_risk(t, t), t, iota_steps(3)), ShapeError);
}

TEST_CASE("centered normalization uses the per-step ensemble mean") {
  Ensemble t{{1.0, 3.0}, {3.0, 5.0}};
  Ensemble mean_pred{{2.0, 4.0}, {2.0, 4.0}};
  const auto c = normalized_risk_centered(bayes_risk(t, mean_pred), t, iota_steps(2));
  CHECK(c.values[0] == 1.0);
  CHECK(c.values[1] == 1.0);
}

TEST_CASE("prediction horizon") {
  CHECK(prediction_horizon(std::vector<double>(50, 0.5)) == 50);
  CHECK(prediction_horizon(std::vector<double>{0.5, 1.2, 0.5}) == 1);
  CHECK(prediction_horizon(std::vector<double>(10, 1.0)) == 0);
  CHECK(prediction_horizon(std::vector<double>{0.9, 0.7, 0.85}, 0.8) == 0);
  // Step 0 is not part of the count but does terminate the prefix.
  RiskCurve c{iota_steps(4), {0.1, 0.2, 0.3, 2.0}, 5};
  CHECK(prediction_horizon(c) == 2);
  c.values[0] = 1.5;
  CHECK(prediction_horizon(c) == 0);
  CHECK_THROWS_AS(prediction_horizon(c, 0.0), ParameterError);
}

TEST_CASE("horizon is monotone in the threshold") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(30);
    double x = 0.0;
    for (double& r : v) {
      x += 0.1 * uniform01(rng);
      r = x;
    }
    const double t1 = 0.2 + uniform01(rng), t2 = t1 + uniform01(rng);
    CHECK(prediction_horizon(v, t1) <= prediction_horizon(v, t2));
  }
}

TEST_CASE("quadratic bowl picks the sample nearest the minimum") {
  const double s0 = 1e-2, r0 = 10.0;
  auto bowl = [&](double s2, double R) {
    const double a = std::log10(s2 / s0), b = std::log10(R / r0);
    return a * a + b * b;
  };
  TuningOptions opt;
  opt.K = 60;
  opt.seed = 9;
  const auto res =
      tune_sigma_R([&](double s2, double R) { return std::make_pair(bowl(s2, R), bowl(s2, R)); }, 1.0, opt);
  CHECK_FALSE(res.failed);
  int nearest = 0;
  for (int k = 1; k < opt.K; ++k) {
    if (bowl(res.sigma2[k], res.R[k]) < bowl(res.sigma2[nearest], res.R[nearest])) nearest = k;
  }
  CHECK(res.chosen == nearest);
  CHECK(res.sigma2_star == res.sigma2[nearest]);
  bool in_low = false;
  for (int k : res.low_state) in_low = in_low || k == res.chosen;
  CHECK(in_low);
  for (int k = 0; k < opt.K; ++k) {
    CHECK(res.sigma2[k] >= 1e-5 * (1 - 1e-12));
    CHECK(res.sigma2[k] <= 1e5 * (1 + 1e-12));
  }
}

TEST_CASE("equal losses give empty low-loss sets and failure") {
  const std::vector<double> s(10, 1.0), r(10, 1.0), l(10, 3.0);
  const auto res = select_from_losses(s, r, l, l);
  CHECK(res.low_state.empty());
  CHECK(res.failed);
}

TEST_CASE("disjoint regions fail, overlapping regions pass") {
  std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, r(10, 1.0);
  std::vector<double> ls(10, 1.0), lp(10, 1.0);
  ls[0] = 0.01;
  lp[5] = 0.01;
  auto res = select_from_losses(s, r, ls, lp);
  CHECK(res.failed);
  CHECK(res.chosen == 0);
  lp[0] = 0.01;
  res = select_from_losses(s, r, ls, lp);
  CHECK_FALSE(res.failed);
}

TEST_CASE("ties prefer smaller R then smaller sigma") {
  std::vector<double> s{3, 2, 1, 1, 5, 5, 5, 5, 5, 5};
  std::vector<double> r{1, 1, 2, 1, 5, 5, 5, 5, 5, 5};
  std::vector<double> l{0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  CHECK(select_from_losses(s, r, l, l).chosen == 3);
}

TEST_CASE("unstable trials are excluded from the median") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> s(10, 1.0), r(10, 1.0);
  std::vector<double> l{nan, nan, nan, nan, nan, nan, 0.05, 1.0, 1.0, 1.0};
  const auto res = select_from_losses(s, r, l, l);
  CHECK(res.unstable == 6);
  CHECK(res.low_state == std::vector<int>{6});
  CHECK_FALSE(res.failed);
  std::vector<double> all(10, nan);
  CHECK_THROWS_AS(select_from_losses(s, r, all, all), TuningError);
  int calls = 0;
  TuningOptions opt;
  opt.K = 10;
  CHECK_THROWS_AS(tune_sigma_R([&](double, double) -> std::pair<double, double> {
                    ++calls;
                    throw NumericalError("diverged", 3);
                  }, 1.0, opt),
                  TuningError);
  CHECK(calls == 10);
}

TEST_CASE("tuning is deterministic and validates inputs") {
  auto eval = [](double s2, double R) { return std::make_pair(s2 / R, R / s2); };
  TuningOptions opt;
  opt.K = 20;
  opt.seed = 5;
  const auto a = tune_sigma_R(eval, 2.0, opt);
  opt.threads = 3;
  const auto b = tune_sigma_R(eval, 2.0, opt);
  CHECK(a.sigma2 == b.sigma2);
  CHECK(a.loss_state == b.loss_state);
  CHECK(a.chosen == b.chosen);
  opt.K = 5;
  CHECK_THROWS_AS(tune_sigma_R(eval, 2.0, opt), ParameterError);
  opt.K = 20;
  CHECK_THROWS_AS(tune_sigma_R(eval, 0.0, opt), DegenerateInputError);
}

TEST_CASE("tuning json and risk csv") {
  std::vector<double> s(10, 1.0), r(10, 4.0);
  std::vector<double> l{0.01, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  nlohmann::json j = select_from_losses(s, r, l, l);
  for (const char* k : {"sigma", "R", "loss_state", "loss_pred", "flags"}) CHECK(j.contains(k));
  CHECK(j["flags"].size() == 10);
  CHECK(j["failed"] == false);
  CHECK(j["flags"][0]["chosen"] == true);

  std::ostringstream os;
  write_risk_csv(os, RiskCurve{{0, 1}, {1.0, 0.5}, 2});
  CHECK(os.str() == "n,norm_risk\n0,1\n1,0.5\n");
}
