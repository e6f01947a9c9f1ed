#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qforecast/config.hpp"
#include "qforecast/errors.hpp"
#include "qforecast/experiment.hpp"
#include "qforecast/io.hpp"
#include "qforecast/kalman.hpp"
#include "qforecast/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qf;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
  int threads = 0;
  std::optional<int> ensemble;
  std::optional<int> trials;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads (default: QFORECAST_THREADS or 1)");
}

void add_scale(CLI::App* app, Common& c) {
  app->add_option("--ensemble", c.ensemble, "ensemble size M (overrides the config)");
  app->add_option("--trials", c.trials, "tuning trials K (overrides the config)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.ensemble) cfg.ensemble = *c.ensemble;
  if (c.trials) cfg.tuning.K = *c.trials;
  return cfg;
}

// A bare NoiseSpec file or an experiment config with a "noise" block.
NoiseSpec load_noise(const std::string& path) {
  const json j = io::read_json_file(path);
  if (j.contains("noise")) return load_config(path).noise;
  return j.get<NoiseSpec>();
}

std::string to_csv(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

int cmd_synth(const Common& c) {
  const NoiseSpec spec = load_noise(c.config);
  const auto truth = synthesize_truth(spec, derive_seed(c.seed.value_or(0), Stream::kTruth, 0));
  fs::create_directories(c.out);
  io::write_file_atomic(fs::path(c.out) / "truth.csv",
                        to_csv([&](std::ostream& os) { write_truth_csv(os, truth); }));
  return 0;
}

int cmd_measure(const Common& c) {
  ExperimentConfig cfg = load(c);
  const Member m = make_member(cfg, 0);
  MeasurementSpec ms = cfg.measurement;
  ms.seed = derive_seed(cfg.master_seed, Stream::kMeasurement, 0);
  const BinaryRecord bits = make_binary_record(m.truth, ms);
  fs::create_directories(c.out);
  const fs::path o(c.out);
  io::write_file_atomic(o / "truth.csv", to_csv([&](std::ostream& os) { write_truth_csv(os, m.truth); }));
  io::write_file_atomic(o / "linear.csv", to_csv([&](std::ostream& os) { write_linear_csv(os, m.linear); }));
  io::write_file_atomic(o / "binary.csv", to_csv([&](std::ostream& os) { write_binary_csv(os, bits); }));
  json meta{{"R", m.linear.noise_variance}, {"clamp_events", bits.clamp_events}};
  io::write_file_atomic(o / "measurement.json", meta.dump(2) + "\n");
  return 0;
}

int cmd_filter(const Common& c, const std::string& algorithm, std::optional<double> sigma2,
               std::optional<double> R) {
  ExperimentConfig cfg = load(c);
  const AlgorithmKind kind = algorithm_kind_from_string(algorithm);
  const AlgorithmConfig* algo = cfg.find(kind);
  AlgorithmConfig fallback;
  fallback.kind = kind;
  if (!algo) algo = &fallback;
  Member m = make_member(cfg, 0);
  const double r = R.value_or(m.linear.noise_variance);
  const double s2 = sigma2.value_or(r);
  const auto& rec = m.linear.values;
  const int N = static_cast<int>(rec.size());
  fs::create_directories(c.out);
  const fs::path o(c.out);
  switch (kind) {
    case AlgorithmKind::AKF: {
      fit_lsf(m, algo->q, 1);
      const KalmanModel model = build_akf(m.lsf.at(algo->q).coefficients(), s2, r);
      FilterOptions opt;
      opt.store_means = false;
      const auto traj = run_filter(rec, model, akf_initial_state(rec, algo->q, -N), opt);
      io::write_file_atomic(o / "trajectory.csv",
                            to_csv([&](std::ostream& os) { write_trajectory_csv(os, traj); }));
      break;
    }
    case AlgorithmKind::LKFFB: {
      const LkffbBasis basis = basis_for(cfg, *algo);
      const KalmanModel model = build_lkffb(basis, s2, r);
      FilterOptions opt;
      opt.store_means = false;
      const auto traj =
          run_filter(rec, model, lkffb_initial_state(basis, sample_variance(rec), -N), opt);
      io::write_file_atomic(o / "trajectory.csv",
                            to_csv([&](std::ostream& os) { write_trajectory_csv(os, traj); }));
      const auto ex = extract_from_state(traj.last.mean, basis, N);
      io::write_file_atomic(o / "extraction.csv",
                            to_csv([&](std::ostream& os) { write_extraction_csv(os, ex); }));
      break;
    }
    case AlgorithmKind::QKF: {
      fit_lsf(m, algo->q, 1);
      const QkfMember qm = make_qkf_member(cfg, *algo, m);
      QkfModel model;
      model.coeffs = qm.coeffs;
      model.sigma2 = sigma2.value_or(algo->perfect_model ? qm.sigma2 : qm.R);
      model.R = R.value_or(qm.R);
      model.quantizer_seed = qm.quantizer_seed;
      model.expected_residual = algo->expected_residual;
      const auto traj =
          run_qkf(qm.bits, model, qkf_initial_state(qm.bits.bits, model.coeffs.order(), -N));
      io::write_file_atomic(o / "qkf.csv", to_csv([&](std::ostream& os) { write_qkf_csv(os, traj); }));
      break;
    }
    default:
      throw ParameterError("filter supports AKF, LKFFB and QKF");
  }
  return 0;
}

int report(const std::vector<std::pair<ExperimentConfig, ExperimentResult>>& runs,
           const std::string& out) {
  for (const auto& [cfg, res] : runs) {
    const fs::path dir = write_outputs(cfg, res, out);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& a : res.algorithms) {
      std::cout << cfg.name << " " << a.label << " horizon=" << a.horizon;
      if (a.tuning) {
        std::cout << " sigma2*=" << io::format_double(a.tuning->sigma2_star)
                  << " R*=" << io::format_double(a.tuning->R_star)
                  << " failed=" << (a.tuning->failed ? "true" : "false");
      }
      if (a.failed_members) std::cout << " excluded=" << a.failed_members;
      std::cout << "\n";
    }
    std::cout << "wrote " << dir.string() << "\n";
  }
  return 0;
}

int cmd_experiment(const Common& c, const std::function<bool(AlgorithmKind)>& keep) {
  const ExperimentConfig base = load(c);
  std::vector<std::pair<ExperimentConfig, ExperimentResult>> runs;
  for (ExperimentConfig cfg : expand_sweep(base)) {
    std::vector<AlgorithmConfig> algos;
    for (const auto& a : cfg.algorithms) {
      if (keep(a.kind)) algos.push_back(a);
    }
    if (algos.empty()) throw ParameterError("config has no algorithm for this subcommand");
    cfg.algorithms = std::move(algos);
    RunOptions opt;
    opt.threads = resolve_threads(c.threads);
    runs.emplace_back(cfg, run_experiment(cfg, opt));
  }
  return report(runs, c.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecasting of non-Markovian qubit dephasing"};
  app.require_subcommand(1);

  Common synth, measure, filter, tune, experiment, spectrum;
  auto* s_synth = app.add_subcommand("synth", "write a truth realisation (truth.csv)");
  add_common(s_synth, synth);
  auto* s_measure = app.add_subcommand("measure", "write truth, linear and binary records");
  add_common(s_measure, measure);

  auto* s_filter = app.add_subcommand("filter", "run one filter on one record");
  add_common(s_filter, filter);
  std::string algorithm = "AKF";
  std::optional<double> f_sigma2, f_R;
  s_filter->add_option("--algorithm", algorithm, "AKF, LKFFB or QKF");
  s_filter->add_option("--sigma2", f_sigma2, "process noise variance");
  s_filter->add_option("--R", f_R, "measurement noise variance");

  auto* s_tune = app.add_subcommand("tune", "tune the Kalman filters and evaluate them");
  add_common(s_tune, tune);
  add_scale(s_tune, tune);
  auto* s_exp = app.add_subcommand("experiment", "run every configured algorithm");
  add_common(s_exp, experiment);
  add_scale(s_exp, experiment);
  auto* s_spec = app.add_subcommand("spectrum", "AKF and LKFFB spectral estimates");
  add_common(s_spec, spectrum);
  add_scale(s_spec, spectrum);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (s_synth->parsed()) return cmd_synth(synth);
    if (s_measure->parsed()) return cmd_measure(measure);
    if (s_filter->parsed()) return cmd_filter(filter, algorithm, f_sigma2, f_R);
    if (s_tune->parsed()) {
      return cmd_experiment(tune, [](AlgorithmKind k) {
        return k == AlgorithmKind::AKF || k == AlgorithmKind::LKFFB || k == AlgorithmKind::QKF;
      });
    }
    if (s_exp->parsed()) return cmd_experiment(experiment, [](AlgorithmKind) { return true; });
    if (s_spec->parsed()) {
      return cmd_experiment(spectrum, [](AlgorithmKind k) {
        return k == AlgorithmKind::AKF || k == AlgorithmKind::LKFFB;
      });
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
