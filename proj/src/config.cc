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

#include "lmbrl/config.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lmbrl {

using nlohmann::json;

std::string AgentName(AgentKind kind) {
  switch (kind) {
    case AgentKind::kSpecialist:
      return "specialist";
    case AgentKind::kGeneralist:
      return "generalist";
    case AgentKind::kLatent:
      return "latent";
  }
  return "unknown";
}

AgentKind ParseAgent(const std::string& name) {
  if (name == "specialist") return AgentKind::kSpecialist;
  if (name == "generalist") return AgentKind::kGeneralist;
  if (name == "latent") return AgentKind::kLatent;
  throw std::invalid_argument("unknown agent kind '" + name + "'");
}

std::string TestPriorName(TestPrior prior) {
  return prior == TestPrior::kStandard ? "standard" : "training_moments";
}

TestPrior ParseTestPrior(const std::string& name) {
  if (name == "standard") return TestPrior::kStandard;
  if (name == "training_moments") return TestPrior::kTrainingMoments;
  throw std::invalid_argument("unknown test prior '" + name + "'");
}

void ExperimentConfig::Validate() const {
  env.Validate();
  planner.Validate();
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  if (episodes_per_env < 1) {
    throw std::invalid_argument("config: episodes_per_env must be >= 1");
  }
  for (int c : checkpoints) {
    if (c < 1 || c > episodes_per_env) {
      throw std::invalid_argument("config: checkpoint " + std::to_string(c) +
                                  " outside [1, " +
                                  std::to_string(episodes_per_env) + "]");
    }
  }
  for (double tilt : train_tilts) {
    EnvSpec probe = env;
    probe.tilt_deg = tilt;
    probe.Validate();
  }
  if (model.members < 2) {
    throw std::invalid_argument("config: ensemble needs >= 2 members");
  }
  if (agent == AgentKind::kLatent && model.latent_dim < 1) {
    throw std::invalid_argument("config: latent agent needs latent_dim >= 1");
  }
  if (online.iterations < 0 || online.samples < 1 || test_episodes < 0 ||
      baseline_rollouts < 1) {
    throw std::invalid_argument("config: invalid online/test settings");
  }
}

int ExperimentConfig::ResolvedSwitchStep() const {
  return switch_step < 0 ? env.episode_length / 2 : switch_step;
}

EnvSplit ExperimentConfig::Split() const {
  EnvSplit out = MakeSplit(split, env);
  if (!train_tilts.empty()) {
    out.train.clear();
    for (size_t i = 0; i < train_tilts.size(); ++i) {
      EnvSpec spec = env;
      spec.tilt_deg = train_tilts[i];
      spec.env_id = static_cast<int>(i);
      out.train.push_back(spec);
    }
  }
  return out;
}

json ExperimentConfig::ToJson() const {
  json j;
  j["version"] = kVersion;
  j["env"] = {{"family", FamilyName(env.family)},
              {"mass", env.mass},
              {"friction", env.friction},
              {"episode_length", env.episode_length},
              {"action_low", env.action_low},
              {"action_high", env.action_high},
              {"dt", env.dt},
              {"process_noise", env.process_noise},
              {"init_noise", env.init_noise},
              {"integration_step", env.integration_step}};
  j["split"] = split == SplitKind::kFiveTrain ? "five" : "two";
  j["train_tilts"] = train_tilts;
  j["agent"] = AgentName(agent);
  j["episodes_per_env"] = episodes_per_env;
  j["seeds"] = seeds;
  j["checkpoints"] = checkpoints;
  j["planner"] = {{"population", planner.population},
                  {"elite_fraction", planner.elite_fraction},
                  {"iterations", planner.iterations},
                  {"horizon", planner.horizon},
                  {"particles", planner.particles},
                  {"variance_floor", planner.variance_floor},
                  {"momentum", planner.momentum},
                  {"seed", planner.seed}};
  j["model"] = {
      {"members", model.members},
      {"hidden", model.hidden},
      {"latent_dim", model.latent_dim},
      {"logvar_min", model.logvar_bounds.min},
      {"logvar_max", model.logvar_bounds.max},
      {"batch_size", model.batch_size},
      {"train_rounds", model.train_rounds},
      {"train_unit",
       model.train_unit == TrainUnit::kEpochs ? "epochs" : "steps"},
      {"theta_lr", model.theta_optimizer.learning_rate},
      {"phi_lr", model.phi_optimizer.learning_rate},
      {"stddev_floor", model.stddev_floor}};
  j["online"] = {{"iterations", online.iterations},
                 {"learning_rate", online.learning_rate},
                 {"samples", online.samples},
                 {"test_prior", TestPriorName(test_prior)}};
  j["learn"] = learn;
  j["test_episodes"] = test_episodes;
  j["switch_step"] = switch_step;
  j["dynamic_tilt_before"] = dynamic_tilt_before;
  j["dynamic_tilt_after"] = dynamic_tilt_after;
  j["baseline_rollouts"] = baseline_rollouts;
  j["output_dir"] = output_dir;
  return j;
}

ExperimentConfig ExperimentConfig::FromJson(const json& j) {
  const int version = j.value("version", 0);
  if (version != kVersion) {
    throw std::invalid_argument("config: unsupported version " +
                                std::to_string(version));
  }
  ExperimentConfig c;
  if (j.contains("env")) {
    const json& e = j.at("env");
    EnvFamily family = ParseFamily(e.value("family", "tilted-pendulum"));
    c.env = family == EnvFamily::kTiltedPendulum ? EnvSpec::Pendulum(0.0)
                                                 : EnvSpec::SlopeCar(0.0);
    c.env.mass = e.value("mass", c.env.mass);
    c.env.friction = e.value("friction", c.env.friction);
    c.env.episode_length = e.value("episode_length", c.env.episode_length);
    c.env.action_low = e.value("action_low", c.env.action_low);
    c.env.action_high = e.value("action_high", c.env.action_high);
    c.env.dt = e.value("dt", c.env.dt);
    c.env.process_noise = e.value("process_noise", c.env.process_noise);
    c.env.init_noise = e.value("init_noise", c.env.init_noise);
    c.env.integration_step =
        e.value("integration_step", c.env.integration_step);
  }
  const std::string split = j.value("split", "five");
  if (split != "five" && split != "two") {
    throw std::invalid_argument("config: split must be 'five' or 'two'");
  }
  c.split = split == "five" ? SplitKind::kFiveTrain : SplitKind::kTwoTrain;
  c.train_tilts = j.value("train_tilts", c.train_tilts);
  c.agent = ParseAgent(j.value("agent", "latent"));
  c.episodes_per_env = j.value("episodes_per_env", c.episodes_per_env);
  c.seeds = j.value("seeds", c.seeds);
  c.checkpoints = j.value("checkpoints", c.checkpoints);
  if (j.contains("planner")) {
    const json& p = j.at("planner");
    c.planner.population = p.value("population", c.planner.population);
    c.planner.elite_fraction = p.value("elite_fraction", c.planner.elite_fraction);
    c.planner.iterations = p.value("iterations", c.planner.iterations);
    c.planner.horizon = p.value("horizon", c.planner.horizon);
    c.planner.particles = p.value("particles", c.planner.particles);
    c.planner.variance_floor = p.value("variance_floor", c.planner.variance_floor);
    c.planner.momentum = p.value("momentum", c.planner.momentum);
    c.planner.seed = p.value("seed", c.planner.seed);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    c.model.members = m.value("members", c.model.members);
    c.model.hidden = m.value("hidden", c.model.hidden);
    c.model.latent_dim = m.value("latent_dim", c.model.latent_dim);
    c.model.logvar_bounds.min = m.value("logvar_min", c.model.logvar_bounds.min);
    c.model.logvar_bounds.max = m.value("logvar_max", c.model.logvar_bounds.max);
    c.model.batch_size = m.value("batch_size", c.model.batch_size);
    c.model.train_rounds = m.value("train_rounds", c.model.train_rounds);
    const std::string unit = m.value("train_unit", "epochs");
    if (unit != "epochs" && unit != "steps") {
      throw std::invalid_argument("config: train_unit must be epochs|steps");
    }
    c.model.train_unit =
        unit == "epochs" ? TrainUnit::kEpochs : TrainUnit::kGradientSteps;
    c.model.theta_optimizer.learning_rate =
        m.value("theta_lr", c.model.theta_optimizer.learning_rate);
    c.model.phi_optimizer.learning_rate =
        m.value("phi_lr", c.model.phi_optimizer.learning_rate);
    c.model.stddev_floor = m.value("stddev_floor", c.model.stddev_floor);
  }
  if (j.contains("online")) {
    const json& o = j.at("online");
    c.online.iterations = o.value("iterations", c.online.iterations);
    c.online.learning_rate = o.value("learning_rate", c.online.learning_rate);
    c.online.samples = o.value("samples", c.online.samples);
    c.test_prior = ParseTestPrior(
        o.value("test_prior", TestPriorName(c.test_prior)));
  }
  c.learn = j.value("learn", c.learn);
  c.test_episodes = j.value("test_episodes", c.test_episodes);
  c.switch_step = j.value("switch_step", c.switch_step);
  c.dynamic_tilt_before = j.value("dynamic_tilt_before", c.dynamic_tilt_before);
  c.dynamic_tilt_after = j.value("dynamic_tilt_after", c.dynamic_tilt_after);
  c.baseline_rollouts = j.value("baseline_rollouts", c.baseline_rollouts);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.Validate();
  return c;
}

ExperimentConfig ExperimentConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return FromJson(json::parse(in));
}

void ExperimentConfig::Save(const std::string& path) const {
  std::ofstream out(path);
  out << ToJson().dump(2) << "\n";
  if (!out) throw std::runtime_error("config: cannot write " + path);
}

uint64_t ExperimentConfig::Hash() const {
  const std::string canonical = ToJson().dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string HashToHex(uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace lmbrl
