#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rcrm/serialization.hpp"
#include "rcrm/simulator.hpp"
#include "rcrm/study.hpp"
#include "rcrm/trial_engine.hpp"

namespace py = pybind11;
using namespace rcrm;

namespace {

// JSON values cross into Python as their text form and are decoded there.
py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

ObservationSet tallies(int doses, const std::vector<int>& subjects, const std::vector<int>& dlts) {
  if (static_cast<int>(subjects.size()) != doses || static_cast<int>(dlts.size()) != doses) {
    throw std::invalid_argument("subjects and dlts need one entry per dose");
  }
  ObservationSet obs(doses);
  for (int d = 1; d <= doses; ++d) obs.add(d, subjects[d - 1], dlts[d - 1]);
  return obs;
}

// A live trial: engine, state and the random stream used for randomization.
class Trial {
 public:
  Trial(TrialConfig config, std::uint64_t seed) : engine_(std::move(config)), rng_(seed), state_(engine_.start()) {}

  void record(int dlt_count) { state_ = engine_.record_outcomes(state_, dlt_count, rng_); }
  py::object state() const { return to_python(to_json(state_)); }
  std::optional<int> current_dose() const { return state_.current_dose(); }
  bool finished() const { return state_.terminal(); }
  std::optional<int> final_mtd() const { return state_.final_mtd; }
  std::string status() const { return std::string(to_string(state_.status)); }

 private:
  TrialEngine engine_;
  RandomStream rng_;
  TrialState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Continual reassessment method and randomized CRM dose-finding";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);

  py::enum_<DesignVariant>(m, "DesignVariant")
      .value("CRM", DesignVariant::CRM)
      .value("RCRM1", DesignVariant::RCRM1)
      .value("RCRM2", DesignVariant::RCRM2);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("skeleton", &ModelConfig::skeleton)
      .def_readwrite("target", &ModelConfig::target)
      .def_readwrite("prior_mean", &ModelConfig::prior_mean)
      .def_readwrite("prior_sd", &ModelConfig::prior_sd)
      .def_readwrite("grid_lo", &ModelConfig::grid_lo)
      .def_readwrite("grid_hi", &ModelConfig::grid_hi)
      .def_readwrite("grid_points", &ModelConfig::grid_points)
      .def("validate", &ModelConfig::validate);

  py::class_<TrialConfig>(m, "TrialConfig")
      .def(py::init<>())
      .def_readwrite("model", &TrialConfig::model)
      .def_readwrite("variant", &TrialConfig::variant)
      .def_readwrite("cohort_size", &TrialConfig::cohort_size)
      .def_readwrite("max_subjects", &TrialConfig::max_subjects)
      .def_readwrite("stop_threshold", &TrialConfig::stop_threshold)
      .def("validate", &TrialConfig::validate);

  py::class_<Posterior>(m, "Posterior")
      .def_readonly("dose_means", &Posterior::dose_means)
      .def_readonly("mtd_probs", &Posterior::mtd_probs)
      .def_readonly("p_overtoxic", &Posterior::p_overtoxic)
      .def_readonly("nodes", &Posterior::nodes)
      .def_readonly("weights", &Posterior::weights);

  m.def("dlt_probability", &rcrm::dlt_probability, py::arg("alpha"), py::arg("dose"), py::arg("config"));
  m.def("mtd_index", &rcrm::mtd_index, py::arg("alpha"), py::arg("config"));
  m.def(
      "compute_posterior",
      [](const ModelConfig& config, const std::vector<int>& subjects, const std::vector<int>& dlts) {
        return compute_posterior(tallies(config.doses(), subjects, dlts), config);
      },
      py::arg("config"), py::arg("subjects"), py::arg("dlts"),
      "Posterior given per-dose subject and DLT counts.");

  py::class_<Scenario>(m, "Scenario")
      .def(py::init(&Scenario::make), py::arg("name"), py::arg("true_probs"), py::arg("target") = 0.30)
      .def_readonly("name", &Scenario::name)
      .def_readonly("true_probs", &Scenario::true_probs)
      .def_readonly("true_mtd", &Scenario::true_mtd);
  m.def("paper_scenarios", &paper_scenarios, py::arg("target") = 0.30);

  py::class_<ScenarioResult>(m, "ScenarioResult")
      .def_readonly("n_trials", &ScenarioResult::n_trials)
      .def_readonly("selection_counts", &ScenarioResult::selection_counts)
      .def_readonly("overtoxic_count", &ScenarioResult::overtoxic_count)
      .def_readonly("cohorts_at_mtd", &ScenarioResult::cohorts_at_mtd)
      .def_property_readonly("selection_probs", &ScenarioResult::selection_probs)
      .def_property_readonly("overtoxic_prob", &ScenarioResult::overtoxic_prob)
      .def_property_readonly("avg_dlts", &ScenarioResult::avg_dlts)
      .def_property_readonly("mean_cohorts_at_mtd", &ScenarioResult::mean_cohorts_at_mtd)
      .def_property_readonly("sd_cohorts_at_mtd", &ScenarioResult::sd_cohorts_at_mtd);

  m.def(
      "run_study",
      [](const TrialConfig& config, const Scenario& scenario, int n_trials, std::uint64_t seed, unsigned threads) {
        py::gil_scoped_release release;
        return run_study(config, scenario, n_trials, seed, threads);
      },
      py::arg("config"), py::arg("scenario"), py::arg("n_trials"), py::arg("seed"), py::arg("threads") = 0);

  m.def(
      "simulate_trial",
      [](const TrialConfig& config, const Scenario& scenario, std::uint64_t seed, std::uint64_t trial) {
        RandomStream rng(seed, trial);
        return to_python(to_json(simulate_trial(TrialEngine(config), scenario, rng)));
      },
      py::arg("config"), py::arg("scenario"), py::arg("seed"), py::arg("trial") = 0,
      "Runs one simulated trial; returns the terminal state as a dict.");

  py::class_<Trial>(m, "Trial")
      .def(py::init<TrialConfig, std::uint64_t>(), py::arg("config"), py::arg("seed"))
      .def("record", &Trial::record, py::arg("dlt_count"))
      .def_property_readonly("state", &Trial::state)
      .def_property_readonly("current_dose", &Trial::current_dose)
      .def_property_readonly("finished", &Trial::finished)
      .def_property_readonly("final_mtd", &Trial::final_mtd)
      .def_property_readonly("status", &Trial::status);

  m.def(
      "run_spec_json",
      [](const std::string& text, unsigned threads) {
        const StudySpec spec = parse_study_spec(text);
        std::vector<StudyCell> cells;
        {
          py::gil_scoped_release release;
          cells = run_spec(spec, threads);
        }
        json out = json::array();
        for (const auto& c : cells) {
          json r = to_json(c.result);
          r["scenario"] = c.scenario;
          r["design"] = std::string(to_string(c.design));
          out.push_back(std::move(r));
        }
        return to_python(out);
      },
      py::arg("spec_json"), py::arg("threads") = 0, "Runs a study spec given as JSON text.");
}
