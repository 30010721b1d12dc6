// Copyright 2026 The lmbrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings for the core operations.

#include <cstdint>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lmbrl/agent.h"
#include "lmbrl/config.h"
#include "lmbrl/envsuite.h"
#include "lmbrl/harness.h"
#include "lmbrl/latent.h"
#include "lmbrl/planner.h"
#include "lmbrl/results.h"

namespace py = pybind11;

namespace lmbrl {
namespace {

// Stateful wrapper so Python code can step an environment directly.
class Environment {
 public:
  Environment(EnvSpec spec, uint64_t seed) : spec_(std::move(spec)), rng_(seed) {
    spec_.Validate();
    state_ = lmbrl::Reset(spec_, rng_);
  }

  Eigen::VectorXd Reset() {
    state_ = lmbrl::Reset(spec_, rng_);
    return Observe(spec_, state_);
  }

  py::tuple Step(const Eigen::VectorXd& action) {
    StepResult r = lmbrl::Step(spec_, state_, action, rng_);
    state_ = r.state;
    return py::make_tuple(Observe(spec_, state_), r.reward);
  }

  Eigen::VectorXd observation() const { return Observe(spec_, state_); }
  Eigen::Vector2d physical() const { return state_.physical; }
  const EnvSpec& spec() const { return spec_; }

 private:
  EnvSpec spec_;
  Rng rng_;
  EnvState state_;
};

py::dict RewardDict(const RewardRecord& r) {
  py::dict d;
  d["agent"] = r.agent;
  d["env_id"] = r.env_id;
  d["tilt_deg"] = r.tilt_deg;
  d["seed"] = r.seed;
  d["episode"] = r.episode;
  d["phase"] = PhaseName(r.phase);
  d["reward"] = r.reward;
  d["normalized"] = r.normalized;
  return d;
}

py::dict ResultDict(const ResultSet& rs) {
  py::list rewards, embeddings, posteriors;
  for (const auto& r : rs.rewards) rewards.append(RewardDict(r));
  for (const auto& e : rs.embeddings) {
    py::dict d;
    d["agent"] = e.agent;
    d["env_id"] = e.env_id;
    d["tilt_deg"] = e.tilt_deg;
    d["seed"] = e.seed;
    d["source"] = e.source;
    d["mean"] = e.mean;
    d["variance"] = e.variance;
    embeddings.append(d);
  }
  for (const auto& p : rs.posteriors) {
    py::dict d;
    d["agent"] = p.agent;
    d["env_id"] = p.env_id;
    d["tilt_deg"] = p.tilt_deg;
    d["seed"] = p.seed;
    d["episode"] = p.episode;
    d["t"] = p.t;
    d["mean"] = p.mean;
    d["variance"] = p.variance;
    posteriors.append(d);
  }
  py::dict out;
  out["rewards"] = rewards;
  out["embeddings"] = embeddings;
  out["posteriors"] = posteriors;
  return out;
}

// `scorer` maps an (N, A, H) array of action sequences to N scores.
Eigen::MatrixXd CemOptimizePy(const py::function& scorer, const Eigen::VectorXd& low,
                              const Eigen::VectorXd& high, int horizon, int population,
                              double elite_fraction, int iterations, uint64_t seed) {
  PlannerConfig config;
  config.population = population;
  config.elite_fraction = elite_fraction;
  config.iterations = iterations;
  config.Validate();
  ActionBounds bounds{low, high};
  SequenceScorer wrapped = [&](std::span<const Eigen::MatrixXd> seqs) {
    const py::ssize_t n = static_cast<py::ssize_t>(seqs.size());
    const py::ssize_t a = low.size();
    py::array_t<double> batch({n, a, static_cast<py::ssize_t>(horizon)});
    auto view = batch.mutable_unchecked<3>();
    for (py::ssize_t i = 0; i < n; ++i) {
      for (py::ssize_t j = 0; j < a; ++j) {
        for (int t = 0; t < horizon; ++t) view(i, j, t) = seqs[i](j, t);
      }
    }
    Eigen::VectorXd scores = scorer(batch).cast<Eigen::VectorXd>();
    if (scores.size() != n) throw std::invalid_argument("scorer must return one score per sequence");
    return scores;
  };
  Rng rng(seed);
  return CemOptimize(wrapped, CemDistribution::Initial(bounds, horizon), bounds, config, rng)
      .distribution.mean;
}

}  // namespace
}  // namespace lmbrl

PYBIND11_MODULE(_lmbrl, m) {
  using namespace lmbrl;
  m.doc() = "Latent-variable model-based reinforcement learning";

  py::enum_<EnvFamily>(m, "EnvFamily")
      .value("TILTED_PENDULUM", EnvFamily::kTiltedPendulum)
      .value("SLOPE_CAR", EnvFamily::kSlopeCar);

  py::class_<EnvSpec>(m, "EnvSpec")
      .def_static("pendulum", &EnvSpec::Pendulum, py::arg("tilt_deg"), py::arg("env_id") = 0)
      .def_static("slope_car", &EnvSpec::SlopeCar, py::arg("tilt_deg"), py::arg("env_id") = 0)
      .def_readwrite("family", &EnvSpec::family)
      .def_readwrite("env_id", &EnvSpec::env_id)
      .def_readwrite("tilt_deg", &EnvSpec::tilt_deg)
      .def_readwrite("mass", &EnvSpec::mass)
      .def_readwrite("friction", &EnvSpec::friction)
      .def_readwrite("episode_length", &EnvSpec::episode_length)
      .def_readwrite("action_low", &EnvSpec::action_low)
      .def_readwrite("action_high", &EnvSpec::action_high)
      .def_readwrite("dt", &EnvSpec::dt)
      .def_readwrite("process_noise", &EnvSpec::process_noise)
      .def_readwrite("init_noise", &EnvSpec::init_noise)
      .def_readwrite("integration_step", &EnvSpec::integration_step)
      .def_property_readonly("observation_dim", &EnvSpec::observation_dim)
      .def("validate", &EnvSpec::Validate);

  py::class_<Environment>(m, "Environment")
      .def(py::init<EnvSpec, uint64_t>(), py::arg("spec"), py::arg("seed") = 0)
      .def("reset", &Environment::Reset)
      .def("step", &Environment::Step, py::arg("action"),
           "Advance one step; returns (observation, reward).")
      .def_property_readonly("observation", &Environment::observation)
      .def_property_readonly("physical_state", &Environment::physical)
      .def_property_readonly("spec", &Environment::spec);

  m.def("pendulum_energy", [](const EnvSpec& spec, double angle, double velocity) {
    EnvState s;
    s.physical = {angle, velocity};
    return PendulumEnergy(spec, s);
  });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("from_json", [](const std::string& text) {
        return ExperimentConfig::FromJson(nlohmann::json::parse(text));
      })
      .def_static("load", &ExperimentConfig::Load)
      .def("to_json", [](const ExperimentConfig& c) { return c.ToJson().dump(); })
      .def("save", &ExperimentConfig::Save)
      .def("validate", &ExperimentConfig::Validate)
      .def("hash", [](const ExperimentConfig& c) { return HashToHex(c.Hash()); })
      .def_property(
          "agent", [](const ExperimentConfig& c) { return AgentName(c.agent); },
          [](ExperimentConfig& c, const std::string& name) { c.agent = ParseAgent(name); })
      .def_property(
          "test_prior", [](const ExperimentConfig& c) { return TestPriorName(c.test_prior); },
          [](ExperimentConfig& c, const std::string& name) {
            c.test_prior = ParseTestPrior(name);
          })
      .def_readwrite("env", &ExperimentConfig::env)
      .def_readwrite("train_tilts", &ExperimentConfig::train_tilts)
      .def_readwrite("episodes_per_env", &ExperimentConfig::episodes_per_env)
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("checkpoints", &ExperimentConfig::checkpoints)
      .def_readwrite("test_episodes", &ExperimentConfig::test_episodes)
      .def_readwrite("learn", &ExperimentConfig::learn);

  py::class_<Agent>(m, "Agent")
      .def_static("load", &Agent::Load, py::arg("path"))
      .def("save", &Agent::Save, py::arg("path"))
      .def_property_readonly("kind", [](const Agent& a) { return AgentName(a.kind()); })
      .def("knows", &Agent::Knows, py::arg("env_id"))
      .def("episodes_seen", &Agent::episodes_seen, py::arg("env_id"))
      .def("posterior", [](const Agent& a, int env_id) {
        const DiagGaussian& q = a.posteriors().at(env_id);
        return py::make_tuple(q.mean, q.variance());
      }, py::arg("env_id"));

  m.def("kl_diag_gaussian",
        [](const Eigen::VectorXd& q_mean, const Eigen::VectorXd& q_logvar,
           const Eigen::VectorXd& p_mean, const Eigen::VectorXd& p_logvar) {
          return KlDiagGaussian({q_mean, q_logvar}, {p_mean, p_logvar});
        },
        py::arg("q_mean"), py::arg("q_logvar"), py::arg("p_mean"), py::arg("p_logvar"));

  m.def("bootstrap_ci", &BootstrapCi, py::arg("values"), py::arg("n_boot") = 500,
        py::arg("level") = 0.95, py::arg("seed") = 0);

  m.def("cem_optimize", &CemOptimizePy, py::arg("scorer"), py::arg("low"), py::arg("high"),
        py::arg("horizon"), py::arg("population") = 500, py::arg("elite_fraction") = 0.1,
        py::arg("iterations") = 5, py::arg("seed") = 0,
        "Cross-entropy optimization of action sequences; returns the final mean (A, H).");

  m.def("run_training",
        [](const ExperimentConfig& config, uint64_t seed) {
          TrainingOutput out;
          {
            py::gil_scoped_release release;
            out = RunTraining(config, seed);
          }
          return py::make_tuple(ResultDict(out.results), out.agent);
        },
        py::arg("config"), py::arg("seed") = 0,
        "Train one agent; returns (results, agent).");

  m.def("run_test_adaptation",
        [](const Agent& agent, const ExperimentConfig& config, uint64_t seed, bool adapt,
           bool dynamic) {
          ResultSet rs;
          {
            py::gil_scoped_release release;
            if (dynamic) {
              rs = RunDynamicAdaptation(agent, config, seed, adapt);
            } else {
              AdaptationOptions options;
              options.adapt = adapt;
              std::vector<EnvSpec> envs;
              for (const EnvSpec& s : config.Split().test) {
                if (agent.Knows(s.env_id)) envs.push_back(s);
              }
              rs = RunTestAdaptation(agent, envs, config, seed, options);
            }
          }
          return ResultDict(rs);
        },
        py::arg("agent"), py::arg("config"), py::arg("seed") = 0, py::arg("adapt") = true,
        py::arg("dynamic") = false);
}
