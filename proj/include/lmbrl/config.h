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

#ifndef LMBRL_CONFIG_H_
#define LMBRL_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmbrl/ensemble.h"
#include "lmbrl/envsuite.h"
#include "lmbrl/inference.h"
#include "lmbrl/planner.h"

namespace lmbrl {

enum class AgentKind { kSpecialist, kGeneralist, kLatent };

// Starting posterior for an unseen environment: the standard-normal prior or
// the moment-matched mixture of the training posteriors.
enum class TestPrior { kStandard, kTrainingMoments };

std::string TestPriorName(TestPrior prior);
TestPrior ParseTestPrior(const std::string& name);

std::string AgentName(AgentKind kind);
AgentKind ParseAgent(const std::string& name);

// Everything that determines an experiment. Serialized as a single versioned
// JSON document.
struct ExperimentConfig {
  static constexpr int kVersion = 1;

  EnvSpec env = EnvSpec::Pendulum(0.0);
  SplitKind split = SplitKind::kFiveTrain;
  // replaces the split's training tilts when non-empty (ids 0..K-1)
  std::vector<double> train_tilts;
  AgentKind agent = AgentKind::kLatent;
  int episodes_per_env = 30;
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<int> checkpoints = {5, 15, 30};
  PlannerConfig planner;
  EnsembleConfig model;
  OnlineUpdateConfig online;
  TestPrior test_prior = TestPrior::kStandard;
  // skip model training (evaluate a frozen agent)
  bool learn = true;
  int test_episodes = 5;
  // step at which the dynamic environment switches; negative means T / 2
  int switch_step = -1;
  double dynamic_tilt_before = -6.0;
  double dynamic_tilt_after = 6.0;
  int baseline_rollouts = 50;
  std::string output_dir = "results";

  // Throws std::invalid_argument describing the first violated constraint.
  void Validate() const;
  int ResolvedSwitchStep() const;
  EnvSplit Split() const;

  nlohmann::json ToJson() const;
  static ExperimentConfig FromJson(const nlohmann::json& j);
  static ExperimentConfig Load(const std::string& path);
  void Save(const std::string& path) const;

  // FNV-1a over the canonical (key-sorted) JSON form.
  uint64_t Hash() const;
};

std::string HashToHex(uint64_t hash);

}  // namespace lmbrl

#endif  // LMBRL_CONFIG_H_
