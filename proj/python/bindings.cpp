#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "qforecast/ar_models.hpp"
#include "qforecast/config.hpp"
#include "qforecast/errors.hpp"
#include "qforecast/experiment.hpp"
#include "qforecast/gpr.hpp"
#include "qforecast/measurement.hpp"
#include "qforecast/noise_synth.hpp"
#include "qforecast/risk.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Dicts cross the boundary as JSON text.
json to_json_value(const py::object& obj) {
  const py::module_ js = py::module_::import("json");
  return json::parse(js.attr("dumps")(obj).cast<std::string>());
}

py::object from_json_value(const json& j) {
  const py::module_ js = py::module_::import("json");
  return js.attr("loads")(j.dump());
}

qf::NoiseSpec noise_spec(const py::dict& d) { return to_json_value(d).get<qf::NoiseSpec>(); }

qf::ExperimentConfig config_from(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) return qf::load_config(obj.cast<std::string>());
  qf::ExperimentConfig c = to_json_value(obj).get<qf::ExperimentConfig>();
  c.validate();
  return c;
}

py::dict summarize(const qf::ExperimentResult& r) {
  py::dict out;
  out["name"] = r.name;
  out["warnings"] = r.warnings;
  py::dict algos;
  for (const auto& a : r.algorithms) {
    py::dict d;
    d["type"] = qf::to_string(a.kind);
    d["horizon"] = a.horizon;
    d["steps"] = a.risk.steps;
    d["risk"] = a.risk.values;
    d["ensemble_size"] = a.risk.ensemble_size;
    d["failed_members"] = a.failed_members;
    d["prediction"] = a.example_prediction;
    d["truth"] = a.example_truth;
    if (a.tuning) {
      json t;
      qf::to_json(t, *a.tuning);
      d["tuning"] = from_json_value(t);
    }
    algos[py::str(a.label)] = d;
  }
  out["algorithms"] = algos;
  if (r.spectrum) {
    py::dict s;
    s["omega_rad_per_s"] = r.spectrum->omega_rad_per_s;
    s["S_true"] = r.spectrum->s_true;
    s["S_akf"] = r.spectrum->s_akf;
    s["S_lkffb"] = r.spectrum->s_lkffb;
    out["spectrum"] = s;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Forecasting of non-Markovian qubit dephasing records";

  py::register_exception<qf::ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<qf::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<qf::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("synthesize_truth",
        [](const py::dict& spec, std::uint64_t seed) { return qf::synthesize_truth(noise_spec(spec), seed).values; },
        py::arg("spec"), py::arg("seed"),
        "Truth path at n = -num_train..num_predict.");
  m.def("analytic_covariance",
        [](const py::dict& spec, int lag) { return qf::analytic_covariance(noise_spec(spec), lag); },
        py::arg("spec"), py::arg("lag"));
  m.def("measure",
        [](const py::dict& spec, std::uint64_t seed, double noise_level) {
          const auto truth = qf::synthesize_truth(noise_spec(spec), seed);
          qf::MeasurementSpec ms;
          ms.noise_level = noise_level;
          ms.seed = seed;
          const auto rec = qf::linearize(truth, ms);
          const auto bits = qf::make_binary_record(truth, ms);
          py::dict d;
          d["truth"] = truth.values;
          d["linear"] = rec.values;
          d["R"] = rec.noise_variance;
          d["bits"] = bits.bits;
          return d;
        },
        py::arg("spec"), py::arg("seed"), py::arg("noise_level") = 0.01);
  m.def("fit_ar",
        [](const std::vector<double>& record, int q) {
          const auto fit = qf::train_lsf(record, q, 1);
          const auto c = fit.coefficients();
          py::dict d;
          d["phi"] = std::vector<double>(c.phi.data(), c.phi.data() + c.phi.size());
          d["offset"] = c.offset;
          d["residual_variance"] = fit.residual_variance;
          return d;
        },
        py::arg("record"), py::arg("q"));
  m.def("gpr_predict",
        [](const std::vector<double>& record, double dt, const py::dict& kernel, double R,
           const std::vector<double>& test_steps) {
          const auto spec = to_json_value(kernel).get<qf::KernelSpec>();
          const auto p = qf::gpr_predict(record, dt, spec, R, test_steps);
          py::dict d;
          d["mean"] = std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size());
          const qf::Vec var = p.cov.diagonal();
          d["variance"] = std::vector<double>(var.data(), var.data() + var.size());
          return d;
        },
        py::arg("record"), py::arg("dt"), py::arg("kernel"), py::arg("R"), py::arg("test_steps"));
  m.def("kappa", &qf::compute_kappa, py::arg("f0_hz"), py::arg("dt"), py::arg("num_train"));
  m.def("prediction_horizon",
        [](const std::vector<double>& risk, double threshold) { return qf::prediction_horizon(risk, threshold, 0); },
        py::arg("risk"), py::arg("threshold") = 1.0,
        "Horizon of a risk curve whose first entry is step 0.");
  m.def("expand_sweep",
        [](const py::object& config) {
          py::list out;
          for (const auto& c : qf::expand_sweep(config_from(config))) {
            json j;
            qf::to_json(j, c);
            out.append(from_json_value(j));
          }
          return out;
        },
        py::arg("config"));
  m.def("run_experiment",
        [](const py::object& config, int threads, const std::string& out_dir) {
          const qf::ExperimentConfig c = config_from(config);
          qf::RunOptions opt;
          opt.threads = threads;
          qf::ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = qf::run_experiment(c, opt);
            if (!out_dir.empty()) qf::write_outputs(c, r, out_dir);
          }
          return summarize(r);
        },
        py::arg("config"), py::arg("threads") = 1, py::arg("out_dir") = "",
        "Config as a path or a dict; returns per-algorithm horizons, risks and tuning.");
}
