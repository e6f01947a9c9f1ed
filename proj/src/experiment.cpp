#include "qforecast/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qforecast/errors.hpp"
#include "qforecast/gpr.hpp"
#include "qforecast/io.hpp"
#include "qforecast/parallel.hpp"
#include "qforecast/random.hpp"

namespace qf {

namespace {

using nlohmann::json;

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kMaxFailedFraction = 0.2;

double sum_sq_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<double> truth_slice(const TruthRealisation& t, int from, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = t.at_step(from + k);
  return out;
}

std::vector<int> step_range(int from, int count) {
  std::vector<int> s(static_cast<std::size_t>(count));
  std::iota(s.begin(), s.end(), from);
  return s;
}

bool needs_tuning(const AlgorithmConfig& a) {
  return a.kind == AlgorithmKind::AKF || a.kind == AlgorithmKind::LKFFB ||
         (a.kind == AlgorithmKind::QKF && !a.perfect_model);
}

// Strongest LSF horizon any entry needs for lag order q.
std::map<int, int> lsf_orders(const ExperimentConfig& config) {
  std::map<int, int> orders;
  const int full = config.noise.num_predict + 1;
  for (const auto& a : config.algorithms) {
    int h = 0;
    if (a.kind == AlgorithmKind::LSF) h = full;
    else if (a.kind == AlgorithmKind::AKF || a.kind == AlgorithmKind::QKF) h = 1;
    else continue;
    orders[a.q] = std::max(orders[a.q], h);
  }
  return orders;
}

std::vector<double> ar_path(const ArCoefficients& c, double sigma2, int length, int burn_in,
                            std::uint64_t seed) {
  Rng rng(seed);
  const int q = c.order();
  const double sd = std::sqrt(sigma2);
  std::vector<double> lag(static_cast<std::size_t>(q), 0.0);  // lag[0] most recent
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(length));
  for (int t = 0; t < burn_in + length; ++t) {
    double v = sd * standard_normal(rng);
    for (int k = 0; k < q; ++k) v += c.phi[k] * lag[static_cast<std::size_t>(k)];
    if (q > 0) {
      std::rotate(lag.rbegin(), lag.rbegin() + 1, lag.rend());
      lag[0] = v;
    }
    if (t >= burn_in) out.push_back(v);
  }
  return out;
}

// Harmonic forecast from the state captured after n_C samples, aligned so the
// first returned value is step n = 0.
std::vector<double> lkffb_forecast(const LkffbExtraction& ex, const LkffbBasis& basis,
                                   int num_train, int horizon) {
  const int skip = num_train - static_cast<int>(ex.step);
  std::vector<double> all = harmonic_predict(ex, basis, skip + horizon);
  return std::vector<double>(all.end() - horizon, all.end());
}

template <class Fn>
void guarded(Fn&& fn, bool& ok, std::string& message) {
  try {
    fn();
    ok = true;
  } catch (const NumericalError& e) {
    ok = false;
    message = e.what();
  } catch (const DegenerateInputError& e) {
    ok = false;
    message = e.what();
  } catch (const IllConditionedError& e) {
    ok = false;
    message = e.what();
  }
}

double mean_record_variance(const std::vector<Member>& members) {
  double s = 0.0;
  for (const auto& m : members) s += sample_variance(m.linear.values);
  return s / static_cast<double>(members.size());
}

}  // namespace

const AlgorithmResult* ExperimentResult::find(const std::string& label) const {
  for (const auto& a : algorithms) {
    if (a.label == label) return &a;
  }
  return nullptr;
}

Member make_member(const ExperimentConfig& config, std::uint64_t index) {
  Member m;
  m.index = index;
  m.truth = synthesize_truth(config.noise, derive_seed(config.master_seed, Stream::kTruth, index));
  MeasurementSpec ms = config.measurement;
  ms.seed = derive_seed(config.master_seed, Stream::kMeasurement, index);
  m.linear = linearize(m.truth, ms);
  return m;
}

void fit_lsf(Member& member, int q, int max_horizon) {
  member.lsf[q] = train_lsf(member.linear.values, q, max_horizon);
}

std::vector<Member> make_ensemble(const ExperimentConfig& config, std::uint64_t offset, int count,
                                  int threads) {
  std::vector<Member> members(static_cast<std::size_t>(count));
  const auto orders = lsf_orders(config);
  parallel_for(members.size(), threads, [&](std::size_t i) {
    members[i] = make_member(config, offset + i);
    for (const auto& [q, h] : orders) fit_lsf(members[i], q, h);
  });
  return members;
}

QkfMember make_qkf_member(const ExperimentConfig& config, const AlgorithmConfig& algo,
                          const Member& base) {
  QkfMember qm;
  const int N = config.noise.num_train;
  const int P = config.noise.num_predict;
  const auto& lsf = base.lsf.at(algo.q);
  qm.coeffs = lsf.coefficients();
  qm.coeffs.offset = 0.0;
  MeasurementSpec ms = config.measurement;
  ms.seed = derive_seed(config.master_seed, Stream::kMeasurement, base.index);
  if (algo.perfect_model) {
    if (!check_stationarity(qm.coeffs).stationary) {
      throw DegenerateInputError("QKF perfect model: learned AR coefficients are not stationary");
    }
    const double unit_var = ar_process_variance(qm.coeffs, 1.0);
    qm.sigma2 = algo.truth_std_rad * algo.truth_std_rad / unit_var;
    const int burn_in = std::max(5000, 50 * algo.q);
    auto values = ar_path(qm.coeffs, qm.sigma2, N + P + 1, burn_in,
                          derive_seed(config.master_seed, Stream::kReference, base.index));
    qm.truth = truth_from_values(std::move(values), N, P, base.truth.seed);
  } else {
    qm.truth = base.truth;
  }
  qm.bits = make_binary_record(qm.truth, ms);
  qm.R = algo.perfect_model
             ? qkf_innovation_variance(qm.truth.training(), qm.bits.noise_variance, algo.expected_residual)
             : qm.bits.noise_variance;
  qm.quantizer_seed = derive_seed(config.master_seed, Stream::kFilter, base.index);
  return qm;
}

RunOutput run_akf_member(const Member& m, int q, double sigma2, double R, int n_L, int horizon,
                         bool freeze) {
  const auto& rec = m.linear.values;
  const int N = static_cast<int>(rec.size());
  const KalmanModel model = build_akf(m.lsf.at(q).coefficients(), sigma2, R);
  FilterOptions opt;
  opt.store_means = false;
  opt.freeze_tol = freeze ? 1e-12 : 0.0;
  const auto traj = run_filter(rec, model, akf_initial_state(rec, q, -N), opt);
  RunOutput out;
  out.state.assign(traj.y_hat_plus.end() - n_L, traj.y_hat_plus.end());
  out.forecast = forecast_mean(traj.last.mean, model, horizon);
  out.state_truth = truth_slice(m.truth, -n_L, n_L);
  out.forecast_truth = truth_slice(m.truth, 0, horizon);
  return out;
}

RunOutput run_lkffb_member(const Member& m, const LkffbBasis& basis, double sigma2, double R,
                           int n_L, int horizon, Vec* final_state) {
  const auto& rec = m.linear.values;
  const int N = static_cast<int>(rec.size());
  const KalmanModel model = build_lkffb(basis, sigma2, R);
  const int n_c = std::min(optimal_training_time(basis), N);
  FilterOptions opt;
  opt.store_means = false;
  opt.capture_after = n_c;
  const auto traj =
      run_filter(rec, model, lkffb_initial_state(basis, sample_variance(rec), -N), opt);
  const Vec& x = traj.captured ? traj.captured->mean : traj.last.mean;
  const LkffbExtraction ex = extract_from_state(x, basis, n_c);
  if (final_state) *final_state = x;
  RunOutput out;
  out.state.assign(traj.y_hat_plus.end() - n_L, traj.y_hat_plus.end());
  out.forecast = lkffb_forecast(ex, basis, N, horizon);
  out.state_truth = truth_slice(m.truth, -n_L, n_L);
  out.forecast_truth = truth_slice(m.truth, 0, horizon);
  return out;
}

RunOutput run_lsf_member(const Member& m, int q, int horizon) {
  const auto& model = m.lsf.at(q);
  const std::span<const double> rec(m.linear.values);
  const int N = static_cast<int>(rec.size());
  RunOutput out;
  const int n_L = std::min(N - q, 50);
  for (int k = N - n_L; k < N; ++k) out.state.push_back(lsf_predict(model, rec.first(k), 1));
  out.state_truth = truth_slice(m.truth, -n_L, n_L);
  out.forecast = lsf_forecast(model, rec, horizon);
  out.forecast_truth = truth_slice(m.truth, 0, horizon);
  return out;
}

RunOutput run_qkf_member(const QkfMember& m, const QkfModel& model, int n_L, int horizon) {
  const int N = static_cast<int>(m.bits.bits.size());
  const auto traj = run_qkf(m.bits, model, qkf_initial_state(m.bits.bits, model.coeffs.order(), -N));
  RunOutput out;
  for (auto it = traj.f_hat.end() - n_L; it != traj.f_hat.end(); ++it) {
    out.state.push_back(std::clamp(qkf_measure(*it), -0.5, 0.5));
  }
  out.forecast = qkf_forecast(traj.last, model, horizon);
  for (int n = -n_L; n < 0; ++n) out.state_truth.push_back(qkf_measure(m.truth.at_step(n)));
  for (int n = 0; n < horizon; ++n) out.forecast_truth.push_back(qkf_measure(m.truth.at_step(n)));
  return out;
}

LkffbBasis basis_for(const ExperimentConfig& config, const AlgorithmConfig& algo) {
  const double f_res = 1.0 / (config.noise.dt * config.noise.num_train);
  const double f0 = algo.basis_f0_hz > 0.0 ? algo.basis_f0_hz : f_res;
  return build_basis(algo.basis, f0, algo.basis_num_osc, config.noise.dt, config.noise.num_train,
                     algo.basis_include_zero);
}

int cutoff_index(const std::vector<double>& spectrum, int window) {
  const int n = static_cast<int>(spectrum.size());
  if (window < 1 || n < 2 * window) throw ParameterError("cutoff_index: spectrum too short");
  std::vector<double> L(spectrum.size());
  for (std::size_t i = 0; i < L.size(); ++i) L[i] = std::log(std::max(spectrum[i], 1e-300));
  int best = window - 1;
  double best_drop = -INFINITY;
  for (int i = window - 1; i + window < n; ++i) {
    double before = 0.0, after = 0.0;
    for (int k = 0; k < window; ++k) {
      before += L[static_cast<std::size_t>(i - k)];
      after += L[static_cast<std::size_t>(i + 1 + k)];
    }
    const double drop = (before - after) / window;
    if (drop > best_drop) {
      best_drop = drop;
      best = i;
    }
  }
  return best;
}

namespace {

struct Evaluation {
  Ensemble state_truths, state_preds, truths, preds, variances;
  std::vector<char> ok;  // not vector<bool>: written from worker threads
  std::vector<std::string> messages;
  std::vector<Vec> lkffb_states;
  std::vector<ArCoefficients> coeffs;
  std::vector<double> clamp_fraction;
};

void finish_risk(AlgorithmResult& res, const Evaluation& ev, bool centered, int first_step,
                 double threshold, int ensemble) {
  Ensemble truths, preds;
  for (std::size_t i = 0; i < ev.ok.size(); ++i) {
    if (!ev.ok[i]) {
      ++res.failed_members;
      res.warnings.push_back("member " + std::to_string(i) + " excluded: " + ev.messages[i]);
      continue;
    }
    truths.push_back(ev.truths[i]);
    preds.push_back(ev.preds[i]);
  }
  if (res.failed_members > kMaxFailedFraction * ensemble || truths.empty()) {
    throw NumericalError(res.label + ": " + std::to_string(res.failed_members) + " of " +
                             std::to_string(ensemble) + " members failed",
                         -1);
  }
  const auto risk = bayes_risk(truths, preds);
  const auto steps = step_range(first_step, static_cast<int>(risk.size()));
  res.risk = centered ? normalized_risk_centered(risk, truths, steps)
                      : normalized_risk(risk, truths, steps);
  res.horizon = prediction_horizon(res.risk, threshold);
  for (std::size_t i = 0; i < ev.ok.size(); ++i) {
    if (!ev.ok[i]) continue;
    res.example_truth = ev.truths[i];
    res.example_prediction = ev.preds[i];
    if (i < ev.variances.size()) res.example_variance = ev.variances[i];
    break;
  }
}

TuningOptions tuning_options(const ExperimentConfig& config, std::uint64_t salt, int threads) {
  TuningOptions t;
  t.K = config.tuning.K;
  t.decade_range = config.tuning.decade_range;
  t.seed = derive_seed(config.master_seed, Stream::kTuning, salt);
  t.threads = threads;
  return t;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentResult result;
  result.name = config.name;
  result.warnings = config.validate();
  const int threads = resolve_threads(options.threads);
  const int M = config.ensemble;
  const int N = config.noise.num_train;
  const int P = config.noise.num_predict;
  const int n_L = config.tuning.n_L;
  const int full = P + 1;

  const std::vector<Member> eval = make_ensemble(config, kEvaluationOffset, M, threads);
  std::vector<Member> tune;
  if (std::any_of(config.algorithms.begin(), config.algorithms.end(), needs_tuning)) {
    tune = make_ensemble(config, kTuningOffset, M, threads);
  }

  for (std::size_t a_idx = 0; a_idx < config.algorithms.size(); ++a_idx) {
    const AlgorithmConfig& algo = config.algorithms[a_idx];
    const auto t0 = std::chrono::steady_clock::now();
    AlgorithmResult res;
    res.label = algo.label.empty() ? to_string(algo.kind) : algo.label;
    res.kind = algo.kind;
    Evaluation ev;
    ev.ok.assign(static_cast<std::size_t>(M), false);
    ev.messages.resize(static_cast<std::size_t>(M));
    ev.truths.resize(static_cast<std::size_t>(M));
    ev.preds.resize(static_cast<std::size_t>(M));

    const auto tally = [&](const RunOutput& o, std::size_t i) {
      ev.truths[i] = o.forecast_truth;
      ev.preds[i] = o.forecast;
    };

    switch (algo.kind) {
      case AlgorithmKind::LSF: {
        ev.coeffs.resize(static_cast<std::size_t>(M));
        parallel_for(eval.size(), threads, [&](std::size_t i) {
          bool ok = false;
          guarded([&] {
            tally(run_lsf_member(eval[i], algo.q, full), i);
            ev.coeffs[i] = eval[i].lsf.at(algo.q).coefficients();
          }, ok, ev.messages[i]);
          ev.ok[i] = ok;
        });
        finish_risk(res, ev, false, 0, config.tuning.horizon_threshold, M);
        for (std::size_t i = 0; i < eval.size(); ++i) {
          if (ev.ok[i]) res.ar_coeffs.push_back(ev.coeffs[i]);
        }
        for (const auto& m : eval) {
          for (const auto& w : m.lsf.at(algo.q).warnings) res.warnings.push_back(w);
        }
        break;
      }
      case AlgorithmKind::AKF: {
        const bool freeze = config.tuning.freeze_gain;
        const TrialEvaluator evaluate = [&](double s2, double R) {
          double ls = 0.0, lp = 0.0;
          for (const auto& m : tune) {
            const RunOutput o = run_akf_member(m, algo.q, s2, R, n_L, n_L, freeze);
            ls += sum_sq_diff(o.state, o.state_truth);
            lp += sum_sq_diff(o.forecast, o.forecast_truth);
          }
          return std::make_pair(ls, lp);
        };
        res.tuning = tune_sigma_R(evaluate, mean_record_variance(tune),
                                  tuning_options(config, a_idx, threads));
        const double s2 = res.tuning->sigma2_star, R = res.tuning->R_star;
        parallel_for(eval.size(), threads, [&](std::size_t i) {
          bool ok = false;
          guarded([&] { tally(run_akf_member(eval[i], algo.q, s2, R, n_L, full, freeze), i); }, ok,
                  ev.messages[i]);
          ev.ok[i] = ok;
        });
        finish_risk(res, ev, false, 0, config.tuning.horizon_threshold, M);
        for (std::size_t i = 0; i < eval.size(); ++i) {
          if (ev.ok[i]) res.ar_coeffs.push_back(eval[i].lsf.at(algo.q).coefficients());
        }
        break;
      }
      case AlgorithmKind::LKFFB: {
        const LkffbBasis basis = basis_for(config, algo);
        const TrialEvaluator evaluate = [&](double s2, double R) {
          double ls = 0.0, lp = 0.0;
          for (const auto& m : tune) {
            const RunOutput o = run_lkffb_member(m, basis, s2, R, n_L, n_L);
            ls += sum_sq_diff(o.state, o.state_truth);
            lp += sum_sq_diff(o.forecast, o.forecast_truth);
          }
          return std::make_pair(ls, lp);
        };
        res.tuning = tune_sigma_R(evaluate, mean_record_variance(tune),
                                  tuning_options(config, a_idx, threads));
        const double s2 = res.tuning->sigma2_star, R = res.tuning->R_star;
        ev.lkffb_states.resize(static_cast<std::size_t>(M));
        parallel_for(eval.size(), threads, [&](std::size_t i) {
          bool ok = false;
          guarded([&] { tally(run_lkffb_member(eval[i], basis, s2, R, n_L, full, &ev.lkffb_states[i]), i); },
                  ok, ev.messages[i]);
          ev.ok[i] = ok;
        });
        finish_risk(res, ev, false, 0, config.tuning.horizon_threshold, M);
        res.lkffb_power.assign(static_cast<std::size_t>(basis.size()), 0.0);
        int used = 0;
        for (std::size_t i = 0; i < eval.size(); ++i) {
          if (!ev.ok[i]) continue;
          const Vec& x = ev.lkffb_states[i];
          for (int j = 0; j < basis.size(); ++j) {
            res.lkffb_power[static_cast<std::size_t>(j)] += x.segment<2>(2 * j).squaredNorm();
          }
          if (used == 0) {
            res.example_extraction =
                extract_from_state(x, basis, std::min(optimal_training_time(basis), N));
          }
          ++used;
        }
        for (double& p : res.lkffb_power) p /= used;
        break;
      }
      case AlgorithmKind::QKF: {
        std::vector<QkfMember> eval_q(eval.size());
        std::vector<char> made(eval.size(), 0);
        parallel_for(eval.size(), threads, [&](std::size_t i) {
          bool ok = false;
          guarded([&] { eval_q[i] = make_qkf_member(config, algo, eval[i]); }, ok, ev.messages[i]);
          made[i] = ok;
        });
        QkfModel base;
        base.expected_residual = algo.expected_residual;
        double s2 = 0.0, R = 0.0;
        if (!algo.perfect_model) {
          std::vector<QkfMember> tune_q(tune.size());
          parallel_for(tune.size(), threads,
                       [&](std::size_t i) { tune_q[i] = make_qkf_member(config, algo, tune[i]); });
          const TrialEvaluator evaluate = [&](double ts2, double tR) {
            double ls = 0.0, lp = 0.0;
            for (const auto& m : tune_q) {
              QkfModel model = base;
              model.coeffs = m.coeffs;
              model.sigma2 = ts2;
              model.R = tR;
              model.quantizer_seed = m.quantizer_seed;
              const RunOutput o = run_qkf_member(m, model, n_L, n_L);
              ls += sum_sq_diff(o.state, o.state_truth);
              lp += sum_sq_diff(o.forecast, o.forecast_truth);
            }
            return std::make_pair(ls, lp);
          };
          double scale = 0.0;
          for (const auto& m : tune_q) scale += m.R;
          scale /= static_cast<double>(tune_q.size());
          res.tuning = tune_sigma_R(evaluate, scale, tuning_options(config, a_idx, threads));
          s2 = res.tuning->sigma2_star;
          R = res.tuning->R_star;
        }
        ev.clamp_fraction.assign(eval.size(), 0.0);
        parallel_for(eval.size(), threads, [&](std::size_t i) {
          if (!made[i]) return;
          const QkfMember& m = eval_q[i];
          QkfModel model = base;
          model.coeffs = m.coeffs;
          model.sigma2 = algo.perfect_model ? m.sigma2 : s2;
          model.R = algo.perfect_model ? m.R : R;
          model.quantizer_seed = m.quantizer_seed;
          bool ok = false;
          guarded([&] { tally(run_qkf_member(m, model, n_L, full), i); }, ok, ev.messages[i]);
          ev.ok[i] = ok;
          ev.clamp_fraction[i] =
              static_cast<double>(m.bits.clamp_events) / static_cast<double>(m.bits.bits.size());
        });
        finish_risk(res, ev, true, 0, config.tuning.horizon_threshold, M);
        int used = 0;
        for (std::size_t i = 0; i < eval.size(); ++i) {
          if (!ev.ok[i]) continue;
          res.clamp_fraction += ev.clamp_fraction[i];
          res.ar_coeffs.push_back(eval_q[i].coeffs);
          ++used;
        }
        res.clamp_fraction /= used;
        break;
      }
      case AlgorithmKind::GPR: {
        const int T = algo.gpr_test_steps > 0 ? algo.gpr_test_steps : full;
        if (T > full) throw ParameterError("GPR test_steps must not exceed num_predict + 1");
        std::vector<double> test(static_cast<std::size_t>(T));
        std::iota(test.begin(), test.end(), 0.0);
        ev.variances.resize(static_cast<std::size_t>(M));
        std::vector<std::string> fit_notes(static_cast<std::size_t>(M));
        parallel_for(eval.size(), threads, [&](std::size_t i) {
          const Member& m = eval[i];
          KernelSpec spec = algo.kernel;
          if (algo.kappa) spec.f0_hz = f0_for_kappa(*algo.kappa, config.noise.dt, N);
          double R = algo.gpr_R ? *algo.gpr_R : m.linear.noise_variance;
          bool ok = false;
          guarded([&] {
            if (algo.optimize) {
              HyperBounds b = algo.bounds;
              if (algo.kappa) b.f0_hz = Range{spec.f0_hz, spec.f0_hz};
              const HyperFit fit = optimize_hyperparams(
                  m.linear.values, config.noise.dt, spec, R, b,
                  derive_seed(config.master_seed, Stream::kGprStarts, m.index), algo.num_starts);
              spec = fit.spec;
              R = fit.R;
              std::ostringstream note;
              note << "member " << i << " fit: sigma2=" << io::format_double(spec.sigma2)
                   << " l=" << io::format_double(spec.length_scale)
                   << " f0_hz=" << io::format_double(spec.f0_hz) << " R=" << io::format_double(R);
              fit_notes[i] = note.str();
            }
            const GprPrediction pred = gpr_predict(m.linear.values, config.noise.dt, spec, R, test);
            ev.preds[i].assign(pred.mean.data(), pred.mean.data() + pred.mean.size());
            const Vec var = pred.cov.diagonal();
            ev.variances[i].assign(var.data(), var.data() + var.size());
            ev.truths[i] = truth_slice(m.truth, 0, T);
          }, ok, ev.messages[i]);
          ev.ok[i] = ok;
        });
        for (const auto& s : fit_notes) {
          if (!s.empty()) res.warnings.push_back(s);
        }
        finish_risk(res, ev, false, 0, config.tuning.horizon_threshold, M);
        break;
      }
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.algorithms.push_back(std::move(res));
  }
  result.spectrum = spectral_report(config, result);
  return result;
}

std::optional<SpectrumReport> spectral_report(const ExperimentConfig& config,
                                              const ExperimentResult& result) {
  const AlgorithmResult* akf = nullptr;
  const AlgorithmResult* lk = nullptr;
  const AlgorithmConfig* lk_cfg = nullptr;
  for (std::size_t i = 0; i < result.algorithms.size() && i < config.algorithms.size(); ++i) {
    const auto& r = result.algorithms[i];
    if (r.kind == AlgorithmKind::AKF && !akf) akf = &r;
    if (r.kind == AlgorithmKind::LKFFB && !lk) {
      lk = &r;
      lk_cfg = &config.algorithms[i];
    }
  }
  if (!akf && !lk) return std::nullopt;

  const double dt = config.noise.dt;
  LkffbBasis basis;
  if (lk_cfg) {
    basis = basis_for(config, *lk_cfg);
  } else {
    const int count = config.noise.num_train / 2;
    basis = build_basis(BasisKind::A, 1.0 / (dt * config.noise.num_train), count, dt,
                        config.noise.num_train);
  }
  const double df = basis.f0_hz;
  const double dw = kTwoPi * df;

  SpectrumReport rep;
  std::vector<int> nonzero;
  for (int j = 0; j < basis.size(); ++j) {
    if (basis.frequencies[static_cast<std::size_t>(j)] > 0.0) nonzero.push_back(j);
  }
  for (int j : nonzero) rep.omega_rad_per_s.push_back(kTwoPi * basis.frequencies[static_cast<std::size_t>(j)]);

  // True line powers a_k² / 2 gathered into bins of width df around each grid point.
  rep.s_true.assign(nonzero.size(), 0.0);
  for (int k = 1; k <= config.noise.num_components; ++k) {
    const double f = k * config.noise.omega0_hz;
    const double a = config.noise.amplitude(k);
    for (std::size_t b = 0; b < nonzero.size(); ++b) {
      const double c = basis.frequencies[static_cast<std::size_t>(nonzero[b])];
      if (f >= c - 0.5 * df && f < c + 0.5 * df) {
        rep.s_true[b] += 0.5 * a * a;
        break;
      }
    }
  }
  for (double& s : rep.s_true) s /= 2.0 * dw;

  if (akf && akf->tuning && !akf->ar_coeffs.empty()) {
    rep.s_akf.assign(nonzero.size(), 0.0);
    const double s2 = akf->tuning->sigma2_star;
    for (const auto& c : akf->ar_coeffs) {
      for (std::size_t b = 0; b < nonzero.size(); ++b) {
        const double w = rep.omega_rad_per_s[b] * dt;
        if (w > 0.0 && w <= M_PI) rep.s_akf[b] += dt * ar_spectral_density(c, s2, w);
      }
    }
    for (double& s : rep.s_akf) s /= static_cast<double>(akf->ar_coeffs.size());
  }
  if (lk && !lk->lkffb_power.empty()) {
    for (int j : nonzero) {
      rep.s_lkffb.push_back(0.5 * lk->lkffb_power[static_cast<std::size_t>(j)] / (2.0 * dw));
    }
  }
  return rep;
}

void write_spectrum_csv(std::ostream& os, const SpectrumReport& report) {
  io::CsvWriter csv(os);
  csv.header({"omega_rad_per_s", "S_true", "S_akf", "S_lkffb"});
  const auto cell = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? io::format_double(v[i]) : std::string();
  };
  for (std::size_t i = 0; i < report.omega_rad_per_s.size(); ++i) {
    csv.row(report.omega_rad_per_s[i], report.s_true[i], std::string_view(cell(report.s_akf, i)),
            std::string_view(cell(report.s_lkffb, i)));
  }
}

std::filesystem::path write_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                                    const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const fs::path root = out_dir / config.name;
  fs::create_directories(root);
  const auto put = [](const fs::path& p, const std::string& s) { io::write_file_atomic(p, s); };

  json cfg;
  to_json(cfg, config);
  put(root / "config.json", cfg.dump(2) + "\n");

  json summary;
  summary["name"] = result.name;
  summary["figure"] = config.figure;
  summary["deviations"] = config.deviations;
  summary["warnings"] = result.warnings;
  json timing;
  json algos = json::array();
  for (const auto& r : result.algorithms) {
    const fs::path dir = root / r.label;
    fs::create_directories(dir);
    std::ostringstream risk;
    write_risk_csv(risk, r.risk);
    put(dir / "risk.csv", risk.str());

    std::ostringstream trace;
    io::CsvWriter tw(trace);
    if (r.example_variance.empty()) {
      tw.header({"n", "truth_rad", "prediction_rad"});
      for (std::size_t k = 0; k < r.example_truth.size(); ++k) {
        tw.row(static_cast<int>(k), r.example_truth[k], r.example_prediction[k]);
      }
    } else {
      tw.header({"n", "truth_rad", "prediction_rad", "variance_rad2"});
      for (std::size_t k = 0; k < r.example_truth.size(); ++k) {
        tw.row(static_cast<int>(k), r.example_truth[k], r.example_prediction[k],
               r.example_variance[k]);
      }
    }
    put(dir / "trace.csv", trace.str());

    if (r.kind == AlgorithmKind::GPR) {
      GprPrediction p;
      for (std::size_t k = 0; k < r.example_prediction.size(); ++k) p.test_points.push_back(double(k));
      p.mean = Eigen::Map<const Vec>(r.example_prediction.data(), Eigen::Index(r.example_prediction.size()));
      p.cov = Mat::Zero(p.mean.size(), p.mean.size());
      for (Eigen::Index k = 0; k < p.mean.size(); ++k) p.cov(k, k) = r.example_variance[std::size_t(k)];
      std::ostringstream os;
      write_prediction_csv(os, p);
      put(dir / "prediction.csv", os.str());
    }
    if (r.kind == AlgorithmKind::LKFFB && !r.example_extraction.frequencies.empty()) {
      std::ostringstream os;
      write_extraction_csv(os, r.example_extraction);
      put(dir / "extraction.csv", os.str());
    }
    if (!r.ar_coeffs.empty()) {
      json c;
      c["order"] = r.ar_coeffs.front().order();
      c["phi"] = std::vector<double>(r.ar_coeffs.front().phi.data(),
                                     r.ar_coeffs.front().phi.data() + r.ar_coeffs.front().phi.size());
      c["offset"] = r.ar_coeffs.front().offset;
      put(dir / "coefficients.json", c.dump(2) + "\n");
    }
    if (r.tuning) {
      json t;
      to_json(t, *r.tuning);
      put(dir / "tuning.json", t.dump(2) + "\n");
    }
    if (result.spectrum && (r.kind == AlgorithmKind::AKF || r.kind == AlgorithmKind::LKFFB)) {
      std::ostringstream os;
      write_spectrum_csv(os, *result.spectrum);
      put(dir / "spectrum.csv", os.str());
    }
    json a;
    a["label"] = r.label;
    a["type"] = to_string(r.kind);
    a["horizon"] = r.horizon;
    a["failed_members"] = r.failed_members;
    a["ensemble_size"] = r.risk.ensemble_size;
    a["warnings"] = r.warnings;
    if (r.tuning) {
      a["sigma2_star"] = r.tuning->sigma2_star;
      a["R_star"] = r.tuning->R_star;
      a["tuning_failed"] = r.tuning->failed;
    }
    if (r.kind == AlgorithmKind::QKF) a["clamp_fraction"] = r.clamp_fraction;
    algos.push_back(a);
    timing[r.label] = r.seconds;
  }
  summary["algorithms"] = algos;
  put(root / "summary.json", summary.dump(2) + "\n");
  put(root / "timing.json", timing.dump(2) + "\n");
  return root;
}

}  // namespace qf
